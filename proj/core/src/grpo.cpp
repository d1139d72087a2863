#include "dpgrpo/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "dpgrpo/errors.hpp"

namespace dpgrpo {

// ---------------------------------------------------------------------------
// Task encoding

std::vector<TokenId> encode_solve_prompt(const Vocab& vocab, std::string_view caption,
                                         std::string_view question) {
    std::vector<TokenId> out{vocab.bos()};
    for (TokenId t : vocab.encode(caption)) out.push_back(t);
    for (TokenId t : vocab.encode(question)) out.push_back(t);
    return out;
}

TokenSequence encode_think_sample(const Vocab& vocab, const ThinkSample& sample) {
    TokenSequence seq;
    seq.tokens = encode_solve_prompt(vocab, sample.image_caption, sample.question);
    seq.prompt_len = seq.tokens.size();
    for (TokenId t : vocab.encode(sample.completion_text())) seq.tokens.push_back(t);
    seq.tokens.push_back(vocab.eos());
    return seq;
}

Query solve_query(const Vocab& vocab, const SeedSample& seed) {
    return {seed.id, TaskKind::solve, encode_solve_prompt(vocab, seed.image_caption, seed.question),
            seed.gold_answer};
}

Query solve_query(const Vocab& vocab, const ThinkSample& sample) {
    return {sample.seed_id, TaskKind::solve,
            encode_solve_prompt(vocab, sample.image_caption, sample.question), sample.answer};
}

Query judgment_query(const Vocab& vocab, const PairSample& pair) {
    validate(pair);
    Query q;
    q.kind = pair.kind == PairKind::discrimination ? TaskKind::discrimination : TaskKind::preference;
    q.id = pair.seed_id + "/" + to_string(pair.kind);
    q.prompt = encode_solve_prompt(vocab, pair.image_caption, pair.question);
    for (std::string_view part : {std::string_view(pair.first), std::string_view(pair.second),
                                  std::string_view(pair.instruction)}) {
        for (TokenId t : vocab.encode(part)) q.prompt.push_back(t);
    }
    q.key = std::to_string(pair.label);
    return q;
}

std::vector<Query> solve_queries(const Vocab& vocab, std::span<const ThinkSample> samples) {
    std::vector<Query> out;
    std::unordered_set<std::string> seen;
    for (const ThinkSample& s : samples) {
        if (seen.insert(s.seed_id).second) out.push_back(solve_query(vocab, s));
    }
    return out;
}

std::vector<Query> interleave_tasks(std::span<const Query> solve, std::span<const Query> discrimination,
                                    std::span<const Query> preference) {
    std::vector<Query> out;
    out.reserve(solve.size() + discrimination.size() + preference.size());
    const std::size_t n = std::max({solve.size(), discrimination.size(), preference.size()});
    for (std::size_t i = 0; i < n; ++i) {
        if (i < solve.size()) out.push_back(solve[i]);
        if (i < discrimination.size()) out.push_back(discrimination[i]);
        if (i < preference.size()) out.push_back(preference[i]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Objectives

namespace {

double sft_loss_into(const Policy& policy, std::span<const TokenSequence> batch, std::span<double> grad,
                     std::vector<std::size_t>* touched) {
    if (batch.empty()) throw ValidationError("SFT batch is empty");
    const double scale = 1.0 / static_cast<double>(batch.size());
    double loss = 0.0;
    std::vector<double> weights;
    for (const TokenSequence& seq : batch) {
        loss -= scale * policy.sequence_logprob(seq);
        weights.assign(seq.completion_len(), -scale);
        policy.accumulate_logprob_grad(seq, weights, grad, touched);
    }
    return loss;
}

}  // namespace

LossAndGrad sft_loss(const Policy& policy, std::span<const TokenSequence> batch) {
    LossAndGrad out;
    out.grad.assign(policy.num_params(), 0.0);
    out.loss = sft_loss_into(policy, batch, out.grad, nullptr);
    return out;
}

double mean_nll(const Policy& policy, std::span<const TokenSequence> batch) {
    if (batch.empty()) throw ValidationError("NLL over an empty batch");
    double total = 0.0;
    for (const TokenSequence& seq : batch) total -= policy.sequence_logprob(seq);
    return total / static_cast<double>(batch.size());
}

std::vector<double> compute_advantages(std::span<const double> rewards, double std_floor) {
    if (rewards.size() < 2) throw ValidationError("advantages need a group of at least 2");
    const double n = static_cast<double>(rewards.size());
    const double mean = std::accumulate(rewards.begin(), rewards.end(), 0.0) / n;
    double var = 0.0;
    bool all_equal = true;
    for (double r : rewards) {
        var += (r - mean) * (r - mean);
        all_equal = all_equal && r == rewards[0];
    }
    std::vector<double> out(rewards.size(), 0.0);
    if (all_equal) return out;
    const double denom = std::sqrt(var / n) + std_floor;
    for (std::size_t i = 0; i < rewards.size(); ++i) out[i] = (rewards[i] - mean) / denom;
    return out;
}

double clipped_surrogate(double ratio, double advantage, double eps) {
    if (!(ratio > 0.0)) throw ValidationError("probability ratio must be positive");
    const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
    return -std::min(ratio * advantage, clipped * advantage);
}

namespace {

void require_compatible(const Policy& a, const Policy& b, const char* what) {
    if (!a.compatible(b)) throw ValidationError(std::string(what) + " policy has a different shape or vocab");
}

}  // namespace

std::vector<double> kl_token_terms(const Policy& current, const Policy& ref, const TokenSequence& seq) {
    require_compatible(current, ref, "reference");
    const std::vector<double> lc = current.completion_logprobs(seq);
    const std::vector<double> lr = ref.completion_logprobs(seq);
    std::vector<double> out(lc.size());
    for (std::size_t t = 0; t < lc.size(); ++t) {
        const double log_r = lr[t] - lc[t];
        // expm1 keeps the value exact (and >= 0) when the policies agree.
        out[t] = std::expm1(log_r) - log_r;
    }
    return out;
}

LossAndGrad kl_penalty(const Policy& current, const Policy& ref, const TokenSequence& seq) {
    require_compatible(current, ref, "reference");
    const std::vector<double> lc = current.completion_logprobs(seq);
    const std::vector<double> lr = ref.completion_logprobs(seq);
    const double inv_n = 1.0 / static_cast<double>(lc.size());
    LossAndGrad out;
    out.grad.assign(current.num_params(), 0.0);
    std::vector<double> weights(lc.size());
    for (std::size_t t = 0; t < lc.size(); ++t) {
        const double log_r = lr[t] - lc[t];
        out.loss += inv_n * (std::expm1(log_r) - log_r);
        // d/d logp_cur of (r - log r - 1) = 1 - r
        weights[t] = -inv_n * std::expm1(log_r);
    }
    current.accumulate_logprob_grad(seq, weights, out.grad);
    return out;
}

void validate(const GrpoConfig& cfg) {
    if (cfg.group_size < 2) throw ValidationError("group size must be >= 2");
    if (!(cfg.clip_eps > 0.0 && cfg.clip_eps < 1.0)) throw ValidationError("clip epsilon must lie in (0, 1)");
    if (!(cfg.kl_beta >= 0.0)) throw ValidationError("KL coefficient must be >= 0");
    if (!(cfg.temperature > 0.0)) throw ValidationError("temperature must be > 0");
    if (!(cfg.adv_std_floor >= 0.0)) throw ValidationError("advantage std floor must be >= 0");
    if (!(cfg.learning_rate > 0.0)) throw ValidationError("learning rate must be > 0");
    if (cfg.max_len == 0) throw ValidationError("max_len must be >= 1");
    if (cfg.queries_per_step == 0) throw ValidationError("queries_per_step must be >= 1");
    if (cfg.weights.task < 0.0 || cfg.weights.format < 0.0) throw ValidationError("reward weights must be >= 0");
}

GroupRollout rollout_group(const Policy& sampler, const Query& query, const GrpoConfig& cfg,
                           std::size_t step) {
    GroupRollout g;
    g.query = query;
    std::vector<double> totals;
    for (std::size_t j = 0; j < cfg.group_size; ++j) {
        Rng rng(derive_seed(cfg.seed, {step, fnv1a(query.id), j}));
        TokenSequence seq = sample_completion(sampler, query.prompt, cfg.temperature, cfg.max_len, rng);
        std::string text = sampler.vocab().decode(seq.completion());
        RewardBreakdown r = total_reward(query.kind, text, query.key, cfg.weights);
        totals.push_back(r.total);
        g.completions.push_back(std::move(seq));
        g.texts.push_back(std::move(text));
        g.rewards.push_back(r);
    }
    g.advantages = compute_advantages(totals, cfg.adv_std_floor);
    return g;
}

namespace {

// Fills loss, surrogate and kl of `out`; the gradient goes to `grad`.
void grpo_loss_into(const Policy& current, const Policy& old, const Policy& ref, std::span<GroupRollout> groups,
                    const GrpoConfig& cfg, bool record_ratios, GrpoLoss& out, std::span<double> grad,
                    std::vector<std::size_t>* touched) {
    require_compatible(current, old, "old");
    require_compatible(current, ref, "reference");
    std::size_t n_seq = 0;
    for (const GroupRollout& g : groups) {
        if (g.advantages.size() != g.completions.size()) {
            throw ValidationError("group " + g.query.id + " is missing advantages");
        }
        n_seq += g.completions.size();
    }
    if (n_seq == 0) return;
    const double lo = 1.0 - cfg.clip_eps;
    const double hi = 1.0 + cfg.clip_eps;
    const bool same_old = &old == &current;
    std::vector<double> weights;
    for (GroupRollout& g : groups) {
        if (record_ratios) {
            g.ratios.assign(g.completions.size(), {});
            g.clipped_ratios.assign(g.completions.size(), {});
        }
        for (std::size_t i = 0; i < g.completions.size(); ++i) {
            const TokenSequence& seq = g.completions[i];
            const double adv = g.advantages[i];
            const std::vector<double> lc = current.completion_logprobs(seq);
            const std::vector<double> lo_p = same_old ? lc : old.completion_logprobs(seq);
            const std::vector<double> lr = ref.completion_logprobs(seq);
            const double scale = 1.0 / (static_cast<double>(n_seq) * static_cast<double>(lc.size()));
            weights.assign(lc.size(), 0.0);
            for (std::size_t t = 0; t < lc.size(); ++t) {
                const double ratio = std::exp(lc[t] - lo_p[t]);
                const double clipped = std::clamp(ratio, lo, hi);
                const double surrogate = -std::min(ratio * adv, clipped * adv);
                const double log_r = lr[t] - lc[t];
                const double kl = std::expm1(log_r) - log_r;
                out.surrogate += scale * surrogate;
                out.kl += scale * kl;
                // The unclipped branch is active when it attains the min; the
                // clipped branch is constant in the parameters.
                const double d_surrogate = ratio * adv <= clipped * adv ? -ratio * adv : 0.0;
                const double d_kl = -std::expm1(log_r);
                weights[t] = scale * (d_surrogate + cfg.kl_beta * d_kl);
                if (record_ratios) {
                    g.ratios[i].push_back(ratio);
                    g.clipped_ratios[i].push_back(clipped);
                }
            }
            current.accumulate_logprob_grad(seq, weights, grad, touched);
        }
    }
    out.loss = out.surrogate + cfg.kl_beta * out.kl;
}

}  // namespace

GrpoLoss grpo_loss(const Policy& current, const Policy& old, const Policy& ref,
                   std::span<GroupRollout> groups, const GrpoConfig& cfg, bool record_ratios) {
    GrpoLoss out;
    out.grad.assign(current.num_params(), 0.0);
    grpo_loss_into(current, old, ref, groups, cfg, record_ratios, out, out.grad, nullptr);
    return out;
}

// ---------------------------------------------------------------------------
// Training loops

namespace {

// Dense gradient buffer plus the rows written since the last step, so an
// update touches only those rows.
struct RowGrad {
    std::vector<double> grad;
    std::vector<std::size_t> rows;

    explicit RowGrad(const Policy& p) : grad(p.num_params(), 0.0) {}

    void step(Policy& policy, double lr) {
        std::sort(rows.begin(), rows.end());
        rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
        const std::size_t v = policy.cols();
        auto params = policy.params();
        for (std::size_t r : rows) {
            for (std::size_t i = r * v; i < (r + 1) * v; ++i) {
                params[i] -= lr * grad[i];
                grad[i] = 0.0;
            }
        }
        rows.clear();
    }
};

}  // namespace

SftResult train_sft(Policy policy, std::span<const TokenSequence> dataset, const SftConfig& cfg) {
    if (dataset.empty()) throw ValidationError("SFT dataset is empty");
    if (cfg.batch_size == 0) throw ValidationError("SFT batch size must be >= 1");
    if (!(cfg.learning_rate > 0.0)) throw ValidationError("learning rate must be > 0");
    SftResult result{std::move(policy), {}};
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(dataset.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t cursor = order.size();
    std::vector<TokenSequence> batch;
    RowGrad grad(result.policy);
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        batch.clear();
        while (batch.size() < std::min(cfg.batch_size, dataset.size())) {
            if (cursor == order.size()) {
                rng.shuffle(std::span<std::size_t>(order));
                cursor = 0;
            }
            batch.push_back(dataset[order[cursor++]]);
        }
        const double loss = sft_loss_into(result.policy, batch, grad.grad, &grad.rows);
        if (!std::isfinite(loss)) throw DivergenceError(step, "non-finite SFT loss");
        grad.step(result.policy, cfg.learning_rate);
        result.trace.push_back({step, loss, result.policy.checksum()});
    }
    return result;
}

GrpoResult train_grpo(Policy policy, std::span<const Query> tasks, const GrpoConfig& cfg,
                      const GrpoStepCallback& on_step) {
    validate(cfg);
    if (cfg.steps > 0 && tasks.empty()) throw ValidationError("GRPO task set is empty");
    const Policy ref = policy;
    GrpoResult result{std::move(policy), {}};
    std::size_t cursor = 0;
    std::vector<GroupRollout> groups;
    RowGrad grad(result.policy);
    for (std::size_t step = 0; step < cfg.steps; ++step) {
        groups.clear();
        for (std::size_t q = 0; q < cfg.queries_per_step; ++q) {
            groups.push_back(rollout_group(result.policy, tasks[cursor], cfg, step));
            cursor = (cursor + 1) % tasks.size();
        }
        // One update per sampled batch: at loss time the pre-update snapshot
        // equals the current parameters, so the current policy serves as
        // pi_old without a copy.
        const Policy& old = cfg.ratio_baseline == RatioBaseline::per_step ? result.policy : ref;
        GrpoLoss lg;
        grpo_loss_into(result.policy, old, ref, groups, cfg, false, lg, grad.grad, &grad.rows);
        if (!std::isfinite(lg.loss)) throw DivergenceError(step, "non-finite GRPO loss");
        grad.step(result.policy, cfg.learning_rate);

        GrpoTraceRow row;
        row.step = step;
        row.loss = lg.loss;
        row.kl = lg.kl;
        std::size_t n = 0, n_acc = 0, n_judge = 0;
        for (const GroupRollout& g : groups) {
            for (const RewardBreakdown& r : g.rewards) {
                ++n;
                row.mean_format += r.format;
                row.mean_total += r.total;
                if (r.accuracy) {
                    ++n_acc;
                    row.mean_accuracy += *r.accuracy;
                }
                if (r.judgment) {
                    ++n_judge;
                    row.mean_judgment += *r.judgment;
                }
            }
        }
        if (n) {
            row.mean_format /= static_cast<double>(n);
            row.mean_total /= static_cast<double>(n);
        }
        row.n_solve = n_acc;
        row.n_judgment = n_judge;
        if (n_acc) row.mean_accuracy /= static_cast<double>(n_acc);
        if (n_judge) row.mean_judgment /= static_cast<double>(n_judge);
        row.checksum = result.policy.checksum();
        if (on_step) on_step(row);
        result.trace.push_back(std::move(row));
    }
    return result;
}

TaskAccuracy evaluate_accuracy(const Policy& policy, std::span<const Query> tasks, std::size_t samples,
                               double temperature, std::size_t max_len, std::uint64_t seed,
                               const RewardWeights& weights) {
    TaskAccuracy acc;
    double hits_solve = 0, hits_disc = 0, hits_pref = 0;
    for (const Query& q : tasks) {
        const std::size_t n = samples == 0 ? 1 : samples;
        for (std::size_t j = 0; j < n; ++j) {
            TokenSequence seq;
            if (samples == 0) {
                seq = greedy_completion(policy, q.prompt, max_len);
            } else {
                Rng rng(derive_seed(seed, {fnv1a(q.id), j}));
                seq = sample_completion(policy, q.prompt, temperature, max_len, rng);
            }
            const RewardBreakdown r = total_reward(q.kind, policy.vocab().decode(seq.completion()), q.key, weights);
            const int hit = r.task_signal();
            switch (q.kind) {
                case TaskKind::solve: hits_solve += hit; ++acc.n_solve; break;
                case TaskKind::discrimination: hits_disc += hit; ++acc.n_discrimination; break;
                case TaskKind::preference: hits_pref += hit; ++acc.n_preference; break;
            }
        }
    }
    if (acc.n_solve) acc.solve = hits_solve / static_cast<double>(acc.n_solve);
    if (acc.n_discrimination) acc.discrimination = hits_disc / static_cast<double>(acc.n_discrimination);
    if (acc.n_preference) acc.preference = hits_pref / static_cast<double>(acc.n_preference);
    const std::size_t total = acc.n_solve + acc.n_discrimination + acc.n_preference;
    if (total) acc.overall = (hits_solve + hits_disc + hits_pref) / static_cast<double>(total);
    return acc;
}

}  // namespace dpgrpo
