#include "dpgrpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <limits>

#include "dpgrpo/errors.hpp"

namespace dpgrpo {

std::string to_string(PolicyKind kind) {
    return kind == PolicyKind::tabular ? "tabular" : "feature";
}

PolicyKind policy_kind_from_string(const std::string& s) {
    if (s == "tabular") return PolicyKind::tabular;
    if (s == "feature") return PolicyKind::feature;
    throw ValidationError("unknown policy kind '" + s + "'");
}

Policy::Policy(PolicyKind kind, Vocab vocab, std::size_t order, std::size_t rows)
    : kind_(kind), vocab_(std::move(vocab)), order_(order), rows_(rows),
      params_(rows * vocab_.size(), 0.0) {}

Policy Policy::tabular(Vocab vocab, std::size_t order) {
    if (order == 0 || order > 3) throw ValidationError("tabular context order must be 1..3");
    std::size_t rows = 1;
    for (std::size_t i = 0; i < order; ++i) rows *= vocab.size();
    return Policy(PolicyKind::tabular, std::move(vocab), order, rows);
}

Policy Policy::feature(Vocab vocab, std::size_t buckets, std::size_t order) {
    if (buckets < 2) throw ValidationError("feature policy needs at least 2 buckets");
    if (order == 0 || order > 8) throw ValidationError("feature n-gram order must be 1..8");
    return Policy(PolicyKind::feature, std::move(vocab), order, buckets);
}

bool Policy::compatible(const Policy& other) const noexcept {
    return kind_ == other.kind_ && order_ == other.order_ && rows_ == other.rows_ &&
           vocab_ == other.vocab_;
}

bool Policy::operator==(const Policy& other) const {
    return compatible(other) && params_ == other.params_;
}

std::uint64_t Policy::prompt_signature(std::span<const TokenId> prompt) const {
    std::uint64_t h = 0x51ed270b27a3c6f5ULL;
    for (TokenId t : prompt) h = mix64(h ^ (t + 1));
    return h;
}

void Policy::rows_with_signature(std::span<const TokenId> tokens, std::uint64_t sig,
                                 std::vector<std::size_t>& out) const {
    out.clear();
    const std::size_t n = tokens.size();
    auto back = [&](std::size_t i) -> TokenId {  // i-th token from the end, BOS-padded
        return i < n ? tokens[n - 1 - i] : vocab_.bos();
    };
    if (kind_ == PolicyKind::tabular) {
        std::size_t key = 0;
        for (std::size_t i = order_; i-- > 0;) key = key * vocab_.size() + back(i);
        out.push_back(key);
        return;
    }
    out.push_back(mix64(0x1234567ULL) % rows_);  // bias
    std::uint64_t gram = 0;
    for (std::size_t k = 0; k < order_; ++k) {
        gram = mix64(gram ^ (static_cast<std::uint64_t>(back(k)) + 1) ^ (k << 32));
        out.push_back(mix64(gram ^ 0xa5a5a5a5ULL) % rows_);
        out.push_back(mix64(gram ^ sig) % rows_);
    }
}

void Policy::active_rows(Context ctx, std::vector<std::size_t>& out) const {
    std::uint64_t sig = kind_ == PolicyKind::feature
                            ? prompt_signature(ctx.tokens.first(std::min(ctx.prompt_len, ctx.tokens.size())))
                            : 0;
    rows_with_signature(ctx.tokens, sig, out);
}

void Policy::logprobs_from_rows(std::span<const std::size_t> rows, double temperature,
                                std::span<double> out) const {
    const std::size_t v = cols();
    std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t r : rows) {
        const double* row = params_.data() + r * v;
        for (std::size_t j = 0; j < v; ++j) out[j] += row[j];
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < v; ++j) {
        out[j] /= temperature;
        mx = std::max(mx, out[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < v; ++j) z += std::exp(out[j] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t j = 0; j < v; ++j) out[j] -= lse;
}

std::vector<double> Policy::token_logprobs(Context ctx, double temperature) const {
    if (ctx.tokens.size() > max_context_) {
        throw ValidationError("context of " + std::to_string(ctx.tokens.size()) +
                              " tokens exceeds cap " + std::to_string(max_context_));
    }
    if (!(temperature > 0.0)) throw ValidationError("temperature must be > 0");
    std::vector<std::size_t> rows;
    active_rows(ctx, rows);
    std::vector<double> out(cols());
    logprobs_from_rows(rows, temperature, out);
    return out;
}

void Policy::check_sequence(const TokenSequence& seq) const {
    if (seq.prompt_len > seq.tokens.size() || seq.completion_len() == 0) {
        throw ValidationError("sequence has an empty completion span");
    }
    if (seq.tokens.size() - 1 > max_context_) {
        throw ValidationError("sequence of " + std::to_string(seq.tokens.size()) +
                              " tokens exceeds context cap " + std::to_string(max_context_));
    }
    for (TokenId t : seq.tokens) {
        if (t >= cols()) throw ValidationError("token id out of vocab range");
    }
}

std::vector<double> Policy::completion_logprobs(const TokenSequence& seq) const {
    check_sequence(seq);
    const std::uint64_t sig = kind_ == PolicyKind::feature ? prompt_signature(seq.prompt()) : 0;
    std::vector<std::size_t> rows;
    std::vector<double> lp(cols());
    std::vector<double> out;
    out.reserve(seq.completion_len());
    std::span<const TokenId> all(seq.tokens);
    for (std::size_t pos = seq.prompt_len; pos < seq.tokens.size(); ++pos) {
        rows_with_signature(all.first(pos), sig, rows);
        logprobs_from_rows(rows, 1.0, lp);
        out.push_back(lp[seq.tokens[pos]]);
    }
    return out;
}

double Policy::sequence_logprob(const TokenSequence& seq) const {
    double total = 0.0;
    for (double x : completion_logprobs(seq)) total += x;
    return total;
}

void Policy::accumulate_logprob_grad(const TokenSequence& seq, std::span<const double> weights,
                                     std::span<double> grad,
                                     std::vector<std::size_t>* touched) const {
    check_sequence(seq);
    if (weights.size() != seq.completion_len()) {
        throw ValidationError("one weight per completion token required");
    }
    if (grad.size() != params_.size()) throw ValidationError("gradient size mismatch");
    const std::uint64_t sig = kind_ == PolicyKind::feature ? prompt_signature(seq.prompt()) : 0;
    const std::size_t v = cols();
    std::vector<std::size_t> rows;
    std::vector<double> lp(v);
    std::vector<double> delta(v);
    std::span<const TokenId> all(seq.tokens);
    for (std::size_t pos = seq.prompt_len; pos < seq.tokens.size(); ++pos) {
        const double w = weights[pos - seq.prompt_len];
        if (w == 0.0) continue;
        rows_with_signature(all.first(pos), sig, rows);
        logprobs_from_rows(rows, 1.0, lp);
        for (std::size_t j = 0; j < v; ++j) delta[j] = -w * std::exp(lp[j]);
        delta[seq.tokens[pos]] += w;
        if (touched) touched->insert(touched->end(), rows.begin(), rows.end());
        for (std::size_t r : rows) {
            double* g = grad.data() + r * v;
            for (std::size_t j = 0; j < v; ++j) g[j] += delta[j];
        }
    }
}

std::vector<double> Policy::grad_sequence_logprob(const TokenSequence& seq) const {
    std::vector<double> grad(params_.size(), 0.0);
    std::vector<double> ones(seq.completion_len(), 1.0);
    accumulate_logprob_grad(seq, ones, grad);
    return grad;
}

std::string Policy::checksum() const {
    // FNV-1a over 64-bit words of the parameter bit patterns.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double x : params_) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof bits);
        h ^= bits;
        h *= 0x100000001b3ULL;
    }
    h = mix64(h ^ params_.size());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

void check_decode_args(const Policy& policy, std::span<const TokenId> prompt, std::size_t max_len) {
    if (max_len == 0) throw ValidationError("max_len must be >= 1");
    if (prompt.size() + max_len - 1 > policy.max_context()) {
        throw ValidationError("prompt plus max_len exceeds the context cap");
    }
}

}  // namespace

TokenSequence sample_completion(const Policy& policy, std::span<const TokenId> prompt,
                                double temperature, std::size_t max_len, Rng& rng) {
    if (!(temperature > 0.0)) throw ValidationError("temperature must be > 0");
    check_decode_args(policy, prompt, max_len);
    TokenSequence seq{std::vector<TokenId>(prompt.begin(), prompt.end()), prompt.size()};
    const TokenId eos = policy.vocab().eos();
    for (std::size_t step = 0; step < max_len; ++step) {
        std::vector<double> lp = policy.token_logprobs({seq.tokens, seq.prompt_len}, temperature);
        const double u = rng.uniform();
        double acc = 0.0;
        TokenId pick = static_cast<TokenId>(lp.size() - 1);
        for (std::size_t j = 0; j < lp.size(); ++j) {
            acc += std::exp(lp[j]);
            if (u < acc) {
                pick = static_cast<TokenId>(j);
                break;
            }
        }
        seq.tokens.push_back(pick);
        if (pick == eos) break;
    }
    return seq;
}

TokenSequence greedy_completion(const Policy& policy, std::span<const TokenId> prompt,
                                std::size_t max_len) {
    check_decode_args(policy, prompt, max_len);
    TokenSequence seq{std::vector<TokenId>(prompt.begin(), prompt.end()), prompt.size()};
    const TokenId eos = policy.vocab().eos();
    for (std::size_t step = 0; step < max_len; ++step) {
        std::vector<double> lp = policy.token_logprobs({seq.tokens, seq.prompt_len});
        auto best = std::max_element(lp.begin(), lp.end());
        TokenId pick = static_cast<TokenId>(best - lp.begin());
        seq.tokens.push_back(pick);
        if (pick == eos) break;
    }
    return seq;
}

}  // namespace dpgrpo
