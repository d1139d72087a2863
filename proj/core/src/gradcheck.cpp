#include "dpgrpo/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "dpgrpo/errors.hpp"
#include "dpgrpo/grpo.hpp"
#include "dpgrpo/policy.hpp"
#include "dpgrpo/rng.hpp"

namespace dpgrpo {

std::string to_string(GradObjective obj) {
    switch (obj) {
        case GradObjective::sft: return "sft_loss";
        case GradObjective::kl: return "kl_penalty";
        case GradObjective::grpo: return "grpo_loss";
    }
    return "?";
}

double relative_error(std::span<const double> analytic, std::span<const double> numeric) {
    if (analytic.size() != numeric.size()) throw ValidationError("gradient sizes differ");
    double diff = 0.0, scale = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff = std::max(diff, std::abs(analytic[i] - numeric[i]));
        scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
    }
    return scale == 0.0 ? 0.0 : diff / scale;
}

namespace {

constexpr std::size_t kGroupSize = 3;
constexpr std::size_t kGroups = 2;
constexpr double kClipMargin = 1e-4;

void randomize(Policy& p, Rng& rng, double scale) {
    for (double& w : p.params()) w = scale * (2.0 * rng.uniform() - 1.0);
}

TokenSequence random_sequence(const Vocab& vocab, Rng& rng) {
    TokenSequence seq;
    seq.prompt_len = 1 + rng.below(3);
    const std::size_t len = seq.prompt_len + 1 + rng.below(5);
    seq.tokens.push_back(vocab.bos());
    while (seq.tokens.size() < len) seq.tokens.push_back(static_cast<TokenId>(rng.below(vocab.size())));
    return seq;
}

struct Instance {
    Policy current;
    Policy old;
    Policy ref;
    std::vector<TokenSequence> seqs;
    std::vector<GroupRollout> groups;
    GrpoConfig cfg;
};

bool near_clip_edge(Instance& inst) {
    grpo_loss(inst.current, inst.old, inst.ref, inst.groups, inst.cfg, true);
    const double lo = 1.0 - inst.cfg.clip_eps, hi = 1.0 + inst.cfg.clip_eps;
    for (const GroupRollout& g : inst.groups) {
        for (const auto& per_seq : g.ratios) {
            for (double r : per_seq) {
                if (std::abs(r - lo) < kClipMargin || std::abs(r - hi) < kClipMargin) return true;
            }
        }
    }
    return false;
}

Instance make_instance(GradObjective obj, Rng& rng) {
    const Vocab vocab = Vocab::micro();
    Policy base = Policy::tabular(vocab, 1);
    Instance inst{base, base, base, {}, {}, {}};
    randomize(inst.current, rng, 2.0);
    switch (obj) {
        case GradObjective::sft:
            for (int i = 0; i < 3; ++i) inst.seqs.push_back(random_sequence(vocab, rng));
            break;
        case GradObjective::kl:
            randomize(inst.ref, rng, 2.0);
            inst.seqs.push_back(random_sequence(vocab, rng));
            break;
        case GradObjective::grpo: {
            // old sits near current so that most ratios fall inside the clip
            // range and some outside.
            auto cur = inst.current.params();
            auto old = inst.old.params();
            for (std::size_t i = 0; i < cur.size(); ++i) old[i] = cur[i] + 0.3 * (2.0 * rng.uniform() - 1.0);
            randomize(inst.ref, rng, 2.0);
            inst.cfg.kl_beta = 0.04 + rng.uniform();
            for (std::size_t g = 0; g < kGroups; ++g) {
                GroupRollout group;
                group.query.id = "g" + std::to_string(g);
                std::vector<double> rewards;
                for (std::size_t j = 0; j < kGroupSize; ++j) {
                    group.completions.push_back(random_sequence(vocab, rng));
                    rewards.push_back(rng.uniform());
                }
                group.advantages = compute_advantages(rewards, inst.cfg.adv_std_floor);
                inst.groups.push_back(std::move(group));
            }
            break;
        }
    }
    return inst;
}

LossAndGrad evaluate(GradObjective obj, Instance& inst, const Policy& current) {
    switch (obj) {
        case GradObjective::sft: return sft_loss(current, inst.seqs);
        case GradObjective::kl: return kl_penalty(current, inst.ref, inst.seqs.front());
        case GradObjective::grpo: {
            GrpoLoss l = grpo_loss(current, inst.old, inst.ref, inst.groups, inst.cfg);
            return {l.loss, std::move(l.grad)};
        }
    }
    return {};
}

// Rows any sequence of the instance reads; all other parameters have an
// exactly zero finite difference.
std::vector<std::size_t> touched_rows(const Instance& inst) {
    std::set<std::size_t> rows;
    std::vector<std::size_t> active;
    auto visit = [&](const TokenSequence& seq) {
        for (std::size_t pos = seq.prompt_len; pos < seq.tokens.size(); ++pos) {
            inst.current.active_rows(Context{std::span<const TokenId>(seq.tokens).first(pos), seq.prompt_len},
                                     active);
            rows.insert(active.begin(), active.end());
        }
    };
    for (const TokenSequence& s : inst.seqs) visit(s);
    for (const GroupRollout& g : inst.groups) {
        for (const TokenSequence& s : g.completions) visit(s);
    }
    return {rows.begin(), rows.end()};
}

}  // namespace

GradcheckResult gradcheck(GradObjective objective, std::size_t instances, std::uint64_t seed, double h,
                          const GradTamper& tamper) {
    if (!(h > 0.0)) throw ValidationError("finite-difference step must be > 0");
    GradcheckResult result;
    result.objective = objective;
    for (std::size_t n = 0; n < instances; ++n) {
        Instance inst = [&] {
            for (std::uint64_t attempt = 0;; ++attempt) {
                Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(objective), n, attempt}));
                Instance candidate = make_instance(objective, rng);
                if (objective != GradObjective::grpo || !near_clip_edge(candidate)) return candidate;
            }
        }();
        std::vector<double> analytic = evaluate(objective, inst, inst.current).grad;
        if (tamper) tamper(analytic);

        std::vector<double> numeric(analytic.size(), 0.0);
        Policy probe = inst.current;
        const std::size_t cols = probe.cols();
        for (std::size_t row : touched_rows(inst)) {
            for (std::size_t c = 0; c < cols; ++c) {
                const std::size_t i = row * cols + c;
                const double w = probe.params()[i];
                probe.params()[i] = w + h;
                const double up = evaluate(objective, inst, probe).loss;
                probe.params()[i] = w - h;
                const double down = evaluate(objective, inst, probe).loss;
                probe.params()[i] = w;
                numeric[i] = (up - down) / (2.0 * h);
            }
        }
        const double err = relative_error(analytic, numeric);
        result.errors.push_back(err);
        result.max_error = std::max(result.max_error, err);
    }
    return result;
}

}  // namespace dpgrpo
