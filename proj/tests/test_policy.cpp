#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "dpgrpo/errors.hpp"
#include "dpgrpo/gradcheck.hpp"
#include "dpgrpo/policy.hpp"

using namespace dpgrpo;

namespace {

void randomize(Policy& p, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    for (double& w : p.params()) w = scale * (2.0 * rng.uniform() - 1.0);
}

TokenSequence seq_of(const Vocab& v, std::vector<std::string> prompt, std::vector<std::string> completion) {
    TokenSequence s;
    s.tokens.push_back(v.bos());
    for (auto& t : prompt) s.tokens.push_back(v.id(t));
    s.prompt_len = s.tokens.size();
    for (auto& t : completion) s.tokens.push_back(v.id(t));
    return s;
}

std::vector<double> fd_sequence_grad(Policy p, const TokenSequence& seq, double h = 1e-5) {
    std::vector<double> g(p.num_params());
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double w = p.params()[i];
        p.params()[i] = w + h;
        const double up = p.sequence_logprob(seq);
        p.params()[i] = w - h;
        const double dn = p.sequence_logprob(seq);
        p.params()[i] = w;
        g[i] = (up - dn) / (2 * h);
    }
    return g;
}

}  // namespace

TEST(Policy, ZeroTabularIsUniform) {
    const Vocab& v = Vocab::micro();
    Policy p = Policy::tabular(v, 2);
    std::vector<TokenId> ctx{v.bos(), v.id("7")};
    for (double lp : p.token_logprobs({ctx, 1})) EXPECT_NEAR(std::exp(lp), 1.0 / v.size(), 1e-15);
}

TEST(Policy, ShapesFollowKind) {
    const Vocab& v = Vocab::micro();
    EXPECT_EQ(Policy::tabular(v, 1).rows(), v.size());
    EXPECT_EQ(Policy::tabular(v, 2).rows(), v.size() * v.size());
    EXPECT_EQ(Policy::feature(v, 1024, 3).rows(), 1024u);
    EXPECT_EQ(Policy::feature(v, 1024, 3).num_params(), 1024u * v.size());
    EXPECT_THROW(Policy::tabular(v, 0), ValidationError);
    EXPECT_THROW(Policy::tabular(v, 4), ValidationError);
    EXPECT_THROW(Policy::feature(v, 1, 3), ValidationError);
}

TEST(Policy, DistributionsNormalize) {
    const Vocab& v = Vocab::micro();
    for (Policy p : {Policy::tabular(v, 2), Policy::feature(v, 4096, 4)}) {
        randomize(p, 9, 5.0);
        Rng rng(2);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<TokenId> ctx{v.bos()};
            const std::size_t n = rng.below(20);
            for (std::size_t i = 0; i < n; ++i) ctx.push_back(static_cast<TokenId>(rng.below(v.size())));
            double z = 0.0;
            for (double lp : p.token_logprobs({ctx, std::min<std::size_t>(ctx.size(), 3)})) {
                EXPECT_LE(lp, 0.0);
                z += std::exp(lp);
            }
            EXPECT_NEAR(z, 1.0, 1e-9);
        }
    }
}

TEST(Policy, FeatureBumpRaisesThatTokenOnly) {
    const Vocab& v = Vocab::micro();
    Policy p = Policy::feature(v, 2048, 3);
    randomize(p, 4);
    std::vector<TokenId> ctx{v.bos(), v.id("what"), v.id("is")};
    const Context c{ctx, ctx.size()};
    const std::vector<double> before = p.token_logprobs(c);
    std::vector<std::size_t> rows;
    p.active_rows(c, rows);
    const TokenId tok = v.id("7");
    p.params()[rows[1] * v.size() + tok] += 0.7;
    const std::vector<double> after = p.token_logprobs(c);
    EXPECT_GT(after[tok], before[tok]);

    // Independent softmax over the summed active rows.
    std::vector<double> logits(v.size(), 0.0);
    for (std::size_t r : rows) {
        for (std::size_t j = 0; j < v.size(); ++j) logits[j] += p.params()[r * v.size() + j];
    }
    double z = 0.0;
    for (double l : logits) z += std::exp(l);
    for (std::size_t j = 0; j < v.size(); ++j) EXPECT_NEAR(after[j], logits[j] - std::log(z), 1e-12);
}

TEST(Policy, ContextCapIsEnforced) {
    const Vocab& v = Vocab::micro();
    Policy p = Policy::tabular(v, 1);
    p.set_max_context(4);
    std::vector<TokenId> ok(4, v.bos()), too_long(5, v.bos());
    EXPECT_NO_THROW(p.token_logprobs({ok, 1}));
    EXPECT_THROW(p.token_logprobs({too_long, 1}), ValidationError);
}

TEST(Policy, UniformSequenceLogprob) {
    const Vocab& v = Vocab::micro();
    const Policy p = Policy::tabular(v, 2);
    const TokenSequence s = seq_of(v, {"what", "is"}, {"<think>", "1", "2", "</think>"});
    EXPECT_NEAR(p.sequence_logprob(s), 4 * std::log(1.0 / v.size()), 1e-12);
}

TEST(Policy, EmptyCompletionIsRejected) {
    const Vocab& v = Vocab::micro();
    const Policy p = Policy::tabular(v, 2);
    const TokenSequence s = seq_of(v, {"what"}, {});
    EXPECT_THROW(p.sequence_logprob(s), ValidationError);
}

TEST(Policy, DeterministicPolicyScoresItsGreedyOutputAtZero) {
    const Vocab& v = Vocab::micro();
    Policy p = Policy::tabular(v, 1);
    // Row for previous token t puts all mass on (t + 1) mod |V|.
    for (std::size_t t = 0; t < v.size(); ++t) p.params()[t * v.size() + (t + 1) % v.size()] = 1000.0;
    std::vector<TokenId> prompt{v.bos(), v.id("7")};
    TokenSequence s = greedy_completion(p, prompt, 8);
    EXPECT_EQ(s.completion_len(), 8u);
    EXPECT_EQ(p.sequence_logprob(s), 0.0);
}

TEST(Policy, GradientMatchesFiniteDifferences) {
    const Vocab& v = Vocab::micro();
    Policy p = Policy::tabular(v, 1);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        randomize(p, seed, 2.0);
        const TokenSequence s = seq_of(v, {"what", "is", "7"}, {"<think>", "direct", "7", "+", "7", "</think>"});
        const std::vector<double> a = p.grad_sequence_logprob(s);
        const std::vector<double> fd = fd_sequence_grad(p, s);
        EXPECT_LT(relative_error(a, fd), 1e-6);
    }
}

TEST(Policy, FeatureGradientMatchesFiniteDifferencesOnActiveRows) {
    const Vocab& v = Vocab::micro();
    Policy p = Policy::feature(v, 64, 2);
    randomize(p, 1);
    const TokenSequence s = seq_of(v, {"what", "is"}, {"yes", "no", "<eos>"});
    EXPECT_LT(relative_error(p.grad_sequence_logprob(s), fd_sequence_grad(p, s)), 1e-6);
}

TEST(Policy, GradientIsLocalToVisitedContexts) {
    const Vocab& v = Vocab::micro();
    Policy p = Policy::tabular(v, 1);
    randomize(p, 3);
    const TokenSequence s = seq_of(v, {"what"}, {"7", "+"});
    const std::vector<double> g = p.grad_sequence_logprob(s);
    const std::set<std::size_t> visited{v.id("what"), v.id("7")};
    for (std::size_t r = 0; r < p.rows(); ++r) {
        if (visited.contains(r)) continue;
        for (std::size_t j = 0; j < v.size(); ++j) ASSERT_EQ(g[r * v.size() + j], 0.0);
    }
}

TEST(Policy, LogitGradientSumsToZeroPerPosition) {
    const Vocab& v = Vocab::micro();
    Policy p = Policy::tabular(v, 1);
    randomize(p, 5);
    const TokenSequence s = seq_of(v, {"what"}, {"7"});
    const std::vector<double> g = p.grad_sequence_logprob(s);
    const std::size_t r = v.id("what");
    const double sum = std::accumulate(g.begin() + r * v.size(), g.begin() + (r + 1) * v.size(), 0.0);
    EXPECT_NEAR(sum, 0.0, 1e-12);
}

TEST(Sampling, FixedRngIsReproducible) {
    const Vocab& v = Vocab::micro();
    Policy p = Policy::feature(v, 512, 3);
    randomize(p, 8);
    std::vector<TokenId> prompt{v.bos(), v.id("what")};
    Rng a(77), b(77);
    EXPECT_EQ(sample_completion(p, prompt, 1.0, 30, a), sample_completion(p, prompt, 1.0, 30, b));
}

TEST(Sampling, StopsAtEosOrLengthCap) {
    const Vocab& v = Vocab::micro();
    Policy p = Policy::tabular(v, 1);
    randomize(p, 8);
    std::vector<TokenId> prompt{v.bos()};
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        TokenSequence s = sample_completion(p, prompt, 1.0, 10, rng);
        ASSERT_GE(s.completion_len(), 1u);
        ASSERT_LE(s.completion_len(), 10u);
        if (s.completion_len() < 10) EXPECT_EQ(s.tokens.back(), v.eos());
        for (std::size_t k = s.prompt_len; k + 1 < s.tokens.size(); ++k) EXPECT_NE(s.tokens[k], v.eos());
    }
}

TEST(Sampling, ColdTemperatureMatchesGreedy) {
    const Vocab& v = Vocab::micro();
    Policy p = Policy::tabular(v, 2);
    randomize(p, 12, 3.0);
    std::vector<TokenId> prompt{v.bos(), v.id("what"), v.id("is")};
    Rng rng(5);
    EXPECT_EQ(sample_completion(p, prompt, 1e-6, 20, rng), greedy_completion(p, prompt, 20));
}

TEST(Sampling, UniformFirstTokenFrequenciesWithinThreeSigma) {
    const Vocab& v = Vocab::micro();
    const Policy p = Policy::tabular(v, 1);
    std::vector<TokenId> prompt{v.bos()};
    Rng rng(2024);
    const int n = 100000;
    std::vector<int> counts(v.size(), 0);
    for (int i = 0; i < n; ++i) ++counts[sample_completion(p, prompt, 1.0, 1, rng).tokens.back()];
    const double q = 1.0 / v.size();
    const double sigma = std::sqrt(q * (1 - q) / n);
    for (int c : counts) EXPECT_LE(std::abs(static_cast<double>(c) / n - q), 3 * sigma);
}

TEST(Sampling, StepDistributionEqualsTokenLogprobs) {
    const Vocab& v = Vocab::micro();
    Policy p = Policy::tabular(v, 1);
    randomize(p, 31, 2.0);
    std::vector<TokenId> prompt{v.bos(), v.id("what")};
    const std::vector<double> lp = p.token_logprobs({prompt, prompt.size()});
    Rng rng(99);
    const int n = 100000;
    std::vector<int> counts(v.size(), 0);
    for (int i = 0; i < n; ++i) ++counts[sample_completion(p, prompt, 1.0, 1, rng).tokens.back()];
    for (std::size_t j = 0; j < v.size(); ++j) {
        const double q = std::exp(lp[j]);
        EXPECT_LE(std::abs(static_cast<double>(counts[j]) / n - q), 4 * std::sqrt(q * (1 - q) / n)) << j;
    }
}

TEST(Policy, ChecksumTracksParameters) {
    const Vocab& v = Vocab::micro();
    Policy a = Policy::tabular(v, 1), b = Policy::tabular(v, 1);
    EXPECT_EQ(a.checksum(), b.checksum());
    b.params()[3] = 1e-300;
    EXPECT_NE(a.checksum(), b.checksum());
    EXPECT_EQ(a.checksum().size(), 16u);
}
