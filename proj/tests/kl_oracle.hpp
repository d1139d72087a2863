#pragma once

// Exact expected KL estimator for order-1 tabular policies, by propagating
// the state distribution of the sampling chain.

#include <cmath>
#include <vector>

#include "dpgrpo/grpo.hpp"
#include "dpgrpo/policy.hpp"

namespace oracle {

// Order-1 tabular pair over the micro vocab with EOS made unreachable so
// sampled completions have exactly `len` tokens.
struct TabularPair {
    dpgrpo::Policy current;
    dpgrpo::Policy ref;
};

inline TabularPair make_tabular_pair(std::uint64_t seed, double scale = 1.0) {
    using namespace dpgrpo;
    const Vocab& v = Vocab::micro();
    TabularPair p{Policy::tabular(v, 1), Policy::tabular(v, 1)};
    Rng rng(seed);
    for (Policy* pol : {&p.current, &p.ref}) {
        for (double& w : pol->params()) w = scale * (2.0 * rng.uniform() - 1.0);
        for (std::size_t r = 0; r < pol->rows(); ++r) pol->params()[r * v.size() + v.eos()] = -60.0;
    }
    return p;
}

inline double row_kl(const dpgrpo::Policy& p, const dpgrpo::Policy& q, dpgrpo::TokenId prev) {
    std::vector<dpgrpo::TokenId> ctx{prev};
    const auto lp = p.token_logprobs({ctx, 1});
    const auto lq = q.token_logprobs({ctx, 1});
    double kl = 0.0;
    for (std::size_t j = 0; j < lp.size(); ++j) kl += std::exp(lp[j]) * (lp[j] - lq[j]);
    return kl;
}

// E over completions of length `len` sampled from `current` after `prompt_last`
// of the per-token mean of r - log r - 1, r = ref / current. Each term's
// expectation under current is KL(current(.|s) || ref(.|s)).
inline double exact_mean_kl(const dpgrpo::Policy& current, const dpgrpo::Policy& ref, dpgrpo::TokenId prompt_last,
                            std::size_t len) {
    const std::size_t v = current.cols();
    std::vector<double> state(v, 0.0), next(v);
    state[prompt_last] = 1.0;
    double total = 0.0;
    for (std::size_t t = 0; t < len; ++t) {
        std::fill(next.begin(), next.end(), 0.0);
        for (std::size_t s = 0; s < v; ++s) {
            if (state[s] == 0.0) continue;
            const auto tok = static_cast<dpgrpo::TokenId>(s);
            total += state[s] * row_kl(current, ref, tok);
            std::vector<dpgrpo::TokenId> ctx{tok};
            const auto lp = current.token_logprobs({ctx, 1});
            for (std::size_t j = 0; j < v; ++j) next[j] += state[s] * std::exp(lp[j]);
        }
        state.swap(next);
    }
    return total / static_cast<double>(len);
}

struct MonteCarlo {
    double mean = 0.0;
    double stderr_ = 0.0;
    bool all_terms_nonnegative = true;
};

inline MonteCarlo sampled_mean_kl(const dpgrpo::Policy& current, const dpgrpo::Policy& ref,
                                  dpgrpo::TokenId prompt_last, std::size_t len, std::size_t n,
                                  std::uint64_t seed) {
    using namespace dpgrpo;
    MonteCarlo mc;
    std::vector<TokenId> prompt{prompt_last};
    Rng rng(seed);
    double sum = 0.0, sum_sq = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const TokenSequence s = sample_completion(current, prompt, 1.0, len, rng);
        for (double term : kl_token_terms(current, ref, s)) mc.all_terms_nonnegative &= term >= 0.0;
        const double x = kl_penalty(current, ref, s).loss;
        sum += x;
        sum_sq += x * x;
    }
    const double dn = static_cast<double>(n);
    mc.mean = sum / dn;
    const double var = (sum_sq - dn * mc.mean * mc.mean) / (dn - 1.0);
    mc.stderr_ = std::sqrt(var / dn);
    return mc;
}

}  // namespace oracle
