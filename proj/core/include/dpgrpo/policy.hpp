#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dpgrpo/rng.hpp"
#include "dpgrpo/vocab.hpp"

namespace dpgrpo {

// Prompt followed by completion in one buffer. Only completion tokens are
// scored.
struct TokenSequence {
    std::vector<TokenId> tokens;
    std::size_t prompt_len = 0;

    std::span<const TokenId> prompt() const { return {tokens.data(), prompt_len}; }
    std::span<const TokenId> completion() const {
        return std::span<const TokenId>(tokens).subspan(prompt_len);
    }
    std::size_t completion_len() const { return tokens.size() - prompt_len; }

    bool operator==(const TokenSequence&) const = default;
};

// The history a next-token distribution conditions on: all tokens so far,
// of which the first prompt_len belong to the prompt.
struct Context {
    std::span<const TokenId> tokens;
    std::size_t prompt_len = 0;
};

// A prompt to decode from, with a stable id for keying rng streams and
// reports.
struct PromptTokens {
    std::string id;
    std::vector<TokenId> tokens;
};

enum class PolicyKind { tabular, feature };

std::string to_string(PolicyKind kind);
PolicyKind policy_kind_from_string(const std::string& s);

// Autoregressive softmax policy over a Vocab. Parameters are a dense
// rows x |V| matrix of logit contributions; each context selects a small
// set of rows whose sum is the logit vector.
//
//  - tabular: one row per distinct window of the last `order` tokens
//    (|V|^order rows). Exact and small; used by the oracle tests.
//  - feature: hashed n-gram features (orders 1..order), each both plain and
//    conjoined with a hash of the whole prompt, plus a bias row. This is the
//    trainable model for end-to-end runs.
//
// All gradients are analytic: d log p(y|c) / d W[r, v] = 1[v == y] - p(v|c)
// for every active row r.
class Policy {
public:
    static constexpr std::size_t kDefaultMaxContext = 256;
    static constexpr std::size_t kDefaultBuckets = std::size_t{1} << 15;

    static Policy tabular(Vocab vocab, std::size_t order = 2);
    static Policy feature(Vocab vocab, std::size_t buckets = kDefaultBuckets, std::size_t order = 4);

    PolicyKind kind() const noexcept { return kind_; }
    const Vocab& vocab() const noexcept { return vocab_; }
    std::size_t order() const noexcept { return order_; }
    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return vocab_.size(); }
    std::size_t max_context() const noexcept { return max_context_; }
    void set_max_context(std::size_t n) { max_context_ = n; }

    std::span<const double> params() const noexcept { return params_; }
    std::span<double> params() noexcept { return params_; }
    std::size_t num_params() const noexcept { return params_.size(); }

    // Same kind, vocab and shape.
    bool compatible(const Policy& other) const noexcept;

    // Rows whose sum gives the logits at `ctx`. May repeat a row on hash
    // collision; callers treat each occurrence independently.
    void active_rows(Context ctx, std::vector<std::size_t>& out) const;

    // Log-probabilities over the vocab. exp() of the result sums to 1.
    // Throws ValidationError when the context exceeds max_context().
    std::vector<double> token_logprobs(Context ctx, double temperature = 1.0) const;

    // log p of each completion token given its prefix.
    std::vector<double> completion_logprobs(const TokenSequence& seq) const;

    // Sum of completion_logprobs. Throws on an empty completion.
    double sequence_logprob(const TokenSequence& seq) const;

    // grad += sum_t weights[t] * d log p(completion[t] | prefix) / d params.
    // weights.size() must equal seq.completion_len(). Rows written are
    // appended to `touched` when given (duplicates possible).
    void accumulate_logprob_grad(const TokenSequence& seq, std::span<const double> weights,
                                 std::span<double> grad,
                                 std::vector<std::size_t>* touched = nullptr) const;

    // Exact gradient of sequence_logprob.
    std::vector<double> grad_sequence_logprob(const TokenSequence& seq) const;

    // FNV-1a over the 64-bit parameter words, finished with the size; 16 hex
    // digits.
    std::string checksum() const;

    bool operator==(const Policy& other) const;

private:
    Policy(PolicyKind kind, Vocab vocab, std::size_t order, std::size_t rows);

    void check_sequence(const TokenSequence& seq) const;
    std::uint64_t prompt_signature(std::span<const TokenId> prompt) const;
    void rows_with_signature(std::span<const TokenId> tokens, std::uint64_t sig,
                             std::vector<std::size_t>& out) const;
    // Log-softmax of the summed rows, written into `out`.
    void logprobs_from_rows(std::span<const std::size_t> rows, double temperature,
                            std::span<double> out) const;

    PolicyKind kind_;
    Vocab vocab_;
    std::size_t order_;
    std::size_t rows_;
    std::size_t max_context_ = kDefaultMaxContext;
    std::vector<double> params_;
};

// Autoregressive sampling with logits divided by `temperature`. Stops after
// EOS or max_len completion tokens. The prompt is copied into the result.
TokenSequence sample_completion(const Policy& policy, std::span<const TokenId> prompt,
                                double temperature, std::size_t max_len, Rng& rng);

// Argmax decoding (lowest id wins ties); the temperature -> 0 limit.
TokenSequence greedy_completion(const Policy& policy, std::span<const TokenId> prompt,
                                std::size_t max_len);

}  // namespace dpgrpo
