#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dpgrpo/diversity.hpp"
#include "dpgrpo/grpo.hpp"
#include "dpgrpo/policy.hpp"
#include "dpgrpo/rewards.hpp"

namespace dpgrpo {

struct PolicyConfig {
    PolicyKind kind = PolicyKind::feature;
    std::size_t buckets = Policy::kDefaultBuckets;
    std::size_t order = 4;  // n-gram order (feature) or context window (tabular)
    std::size_t max_context = Policy::kDefaultMaxContext;
};

Policy make_policy(const PolicyConfig& cfg, const Vocab& vocab = Vocab::micro());

struct SynthSection {
    std::optional<std::filesystem::path> corpus;  // seed records; micro corpus when absent
    std::size_t micro_n = 100;
    std::filesystem::path out_dir = "data";
    std::size_t max_retries = 3;
    double max_skip_fraction = 0.1;
};

struct SftSection {
    std::filesystem::path data = "data/think.jsonl";
    std::optional<std::filesystem::path> init_checkpoint;
    std::filesystem::path checkpoint = "sft.ckpt";
    std::filesystem::path trace = "sft_trace.jsonl";
    std::size_t steps = 500;
    std::size_t batch_size = 16;
    double learning_rate = 0.2;
};

struct TrainSection {
    std::filesystem::path data_dir = "data";
    std::vector<TaskKind> tasks{TaskKind::solve, TaskKind::discrimination, TaskKind::preference};
    std::size_t max_queries_per_kind = 0;  // 0 = all
    std::optional<std::filesystem::path> init_checkpoint;
    std::filesystem::path checkpoint = "grpo.ckpt";
    std::filesystem::path trace = "grpo_trace.jsonl";
};

struct EvalSection {
    std::filesystem::path checkpoint = "grpo.ckpt";
    std::filesystem::path prompts = "data/think.jsonl";
    std::filesystem::path report = "eval_report.json";
    std::size_t samples = 0;  // 0 = greedy accuracy
    std::size_t max_len = 64;
};

struct GradcheckSection {
    std::size_t instances = 20;
    double tolerance = 1e-5;
};

struct DiversitySection {
    std::vector<std::size_t> k{kDefaultDiversityK};
    double temperature = 1.0;
    double threshold = 0.5;
};

// Everything a command needs. Loaded from a JSON file; every field has a
// default, unknown keys are rejected.
struct RunConfig {
    std::uint64_t seed = 0;
    bool overwrite = false;
    PolicyConfig policy;
    RewardWeights rewards;
    GrpoConfig grpo;
    SynthSection synth;
    SftSection sft;
    TrainSection train;
    EvalSection eval;
    DiversitySection diversity;
    GradcheckSection gradcheck;
};

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const RunConfig& cfg);
RunConfig load_config(const std::filesystem::path& path);

}  // namespace dpgrpo
