#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dpgrpo/dataset.hpp"
#include "dpgrpo/policy.hpp"
#include "dpgrpo/rewards.hpp"

namespace dpgrpo {

// ---------------------------------------------------------------------------
// Task encoding

// BOS, caption tokens, question tokens.
std::vector<TokenId> encode_solve_prompt(const Vocab& vocab, std::string_view caption,
                                         std::string_view question);

// Solve prompt followed by the think-wrapped rationale, answer line and EOS.
TokenSequence encode_think_sample(const Vocab& vocab, const ThinkSample& sample);

// A gradeable query: prompt tokens plus the key total_reward checks against
// (gold answer for solve, "1"/"0" label for judgment tasks).
struct Query {
    std::string id;
    TaskKind kind = TaskKind::solve;
    std::vector<TokenId> prompt;
    std::string key;
};

Query solve_query(const Vocab& vocab, const SeedSample& seed);
Query solve_query(const Vocab& vocab, const ThinkSample& sample);
// Prompt: caption, question, first solution, second solution, instruction.
Query judgment_query(const Vocab& vocab, const PairSample& pair);

// One solve query per distinct seed id, in first-seen order.
std::vector<Query> solve_queries(const Vocab& vocab, std::span<const ThinkSample> samples);

// Round-robin over the three lists (solve, discrimination, preference);
// exhausted lists drop out.
std::vector<Query> interleave_tasks(std::span<const Query> solve, std::span<const Query> discrimination,
                                    std::span<const Query> preference);

// ---------------------------------------------------------------------------
// Objectives

struct LossAndGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

// Mean over the batch of -sequence_logprob, with its gradient.
LossAndGrad sft_loss(const Policy& policy, std::span<const TokenSequence> batch);

// Mean of -sequence_logprob without the gradient.
double mean_nll(const Policy& policy, std::span<const TokenSequence> batch);

// (r_i - mean) / (population std + std_floor). All-equal rewards give zeros.
std::vector<double> compute_advantages(std::span<const double> rewards, double std_floor = 1e-6);

// -min(ratio * adv, clip(ratio, 1 - eps, 1 + eps) * adv).
double clipped_surrogate(double ratio, double advantage, double eps);

// Per completion token: r - log r - 1 with r = p_ref(token) / p_current(token).
std::vector<double> kl_token_terms(const Policy& current, const Policy& ref, const TokenSequence& seq);

// Mean of kl_token_terms over the completion, with the gradient w.r.t. the
// current parameters.
LossAndGrad kl_penalty(const Policy& current, const Policy& ref, const TokenSequence& seq);

// ---------------------------------------------------------------------------
// GRPO

enum class RatioBaseline {
    per_step,   // ratio against the snapshot taken before sampling
    reference,  // ratio against the frozen reference policy
};

struct GrpoConfig {
    std::size_t group_size = 4;
    double temperature = 1.0;
    double clip_eps = 0.2;
    double kl_beta = 0.04;
    double adv_std_floor = 1e-6;
    double learning_rate = 3.0;
    std::size_t steps = 2000;
    std::size_t queries_per_step = 4;
    std::size_t max_len = 64;
    std::uint64_t seed = 0;
    RatioBaseline ratio_baseline = RatioBaseline::per_step;
    RewardWeights weights;
};

void validate(const GrpoConfig& cfg);

struct GroupRollout {
    Query query;
    std::vector<TokenSequence> completions;
    std::vector<std::string> texts;
    std::vector<RewardBreakdown> rewards;
    std::vector<double> advantages;
    // Per completion, per token; filled by grpo_loss when requested.
    std::vector<std::vector<double>> ratios;
    std::vector<std::vector<double>> clipped_ratios;
};

// Samples group_size completions for one query from `sampler` and grades
// them. Completion j uses the stream derived from (seed, step, query id, j).
GroupRollout rollout_group(const Policy& sampler, const Query& query, const GrpoConfig& cfg,
                           std::size_t step);

struct GrpoLoss {
    double loss = 0.0;
    double surrogate = 0.0;  // clipped-surrogate part of loss
    double kl = 0.0;         // mean KL estimator (unscaled by beta)
    std::vector<double> grad;
};

// Mean over completions of the per-completion token mean of
//   clipped_surrogate(exp(logp_cur - logp_old), adv, eps) + beta * (r - log r - 1).
// Gradient w.r.t. `current` only. When `record_ratios` is set, the per-token
// ratio and clipped ratio are stored in each group.
GrpoLoss grpo_loss(const Policy& current, const Policy& old, const Policy& ref,
                   std::span<GroupRollout> groups, const GrpoConfig& cfg, bool record_ratios = false);

// ---------------------------------------------------------------------------
// Training loops

struct SftConfig {
    std::size_t steps = 500;
    std::size_t batch_size = 16;
    double learning_rate = 0.2;
    std::uint64_t seed = 0;
};

struct SftTraceRow {
    std::size_t step = 0;
    double loss = 0.0;
    std::string checksum;  // parameters after the update
};

struct SftResult {
    Policy policy;
    std::vector<SftTraceRow> trace;
};

// Plain gradient descent on minibatch NLL. Minibatches walk a permutation of
// the dataset reshuffled every epoch. Throws DivergenceError on a non-finite
// loss.
SftResult train_sft(Policy policy, std::span<const TokenSequence> dataset, const SftConfig& cfg);

struct GrpoTraceRow {
    std::size_t step = 0;
    double mean_accuracy = 0.0;  // over solve completions; 0 when none
    double mean_format = 0.0;
    double mean_judgment = 0.0;  // over judgment completions; 0 when none
    double mean_total = 0.0;
    std::size_t n_solve = 0;     // solve completions this step
    std::size_t n_judgment = 0;  // judgment completions this step
    double loss = 0.0;
    double kl = 0.0;
    std::string checksum;
};

struct GrpoResult {
    Policy policy;
    std::vector<GrpoTraceRow> trace;
};

using GrpoStepCallback = std::function<void(const GrpoTraceRow&)>;

// Each step: take the next queries_per_step queries (cycling through
// `tasks`), sample groups from the pre-update policy, grade, normalize
// advantages, then one gradient step on grpo_loss against the frozen copy of
// the initial policy.
GrpoResult train_grpo(Policy policy, std::span<const Query> tasks, const GrpoConfig& cfg,
                      const GrpoStepCallback& on_step = {});

// Fraction of `samples` completions per query (temperature sampling) whose
// accuracy / judgment signal is 1. With samples == 0, greedy decoding once.
struct TaskAccuracy {
    double solve = 0.0;
    double discrimination = 0.0;
    double preference = 0.0;
    std::size_t n_solve = 0, n_discrimination = 0, n_preference = 0;
    double overall = 0.0;
};
TaskAccuracy evaluate_accuracy(const Policy& policy, std::span<const Query> tasks, std::size_t samples,
                               double temperature, std::size_t max_len, std::uint64_t seed,
                               const RewardWeights& weights = {});

}  // namespace dpgrpo
