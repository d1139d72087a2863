#include "dpgrpo/config.hpp"

#include <fstream>
#include <set>

#include "dpgrpo/errors.hpp"

namespace dpgrpo {

using json = nlohmann::json;

Policy make_policy(const PolicyConfig& cfg, const Vocab& vocab) {
    Policy p = cfg.kind == PolicyKind::tabular ? Policy::tabular(vocab, cfg.order)
                                               : Policy::feature(vocab, cfg.buckets, cfg.order);
    p.set_max_context(cfg.max_context);
    return p;
}

namespace {

void only_keys(const json& j, const std::string& where, std::set<std::string> allowed) {
    if (!j.is_object()) throw ValidationError("config section '" + where + "' must be an object");
    for (const auto& [key, _] : j.items()) {
        if (!allowed.contains(key)) throw ValidationError("unknown config key '" + where + "." + key + "'");
    }
}

template <class T>
void read(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

void read_path(const json& j, const char* key, std::filesystem::path& out) {
    if (j.contains(key)) out = j.at(key).get<std::string>();
}

void read_opt_path(const json& j, const char* key, std::optional<std::filesystem::path>& out) {
    if (!j.contains(key)) return;
    if (j.at(key).is_null()) {
        out.reset();
    } else {
        out = j.at(key).get<std::string>();
    }
}

json opt_path(const std::optional<std::filesystem::path>& p) {
    return p ? json(p->string()) : json(nullptr);
}

}  // namespace

RunConfig config_from_json(const json& j) {
    RunConfig c;
    try {
        only_keys(j, "<root>", {"seed", "overwrite", "policy", "rewards", "grpo", "synth", "sft", "train",
                                "eval", "diversity", "gradcheck"});
        read(j, "seed", c.seed);
        read(j, "overwrite", c.overwrite);
        if (j.contains("policy")) {
            const json& p = j.at("policy");
            only_keys(p, "policy", {"kind", "buckets", "order", "max_context"});
            if (p.contains("kind")) c.policy.kind = policy_kind_from_string(p.at("kind").get<std::string>());
            read(p, "buckets", c.policy.buckets);
            read(p, "order", c.policy.order);
            read(p, "max_context", c.policy.max_context);
        }
        if (j.contains("rewards")) {
            const json& r = j.at("rewards");
            only_keys(r, "rewards", {"task", "format"});
            read(r, "task", c.rewards.task);
            read(r, "format", c.rewards.format);
        }
        if (j.contains("grpo")) {
            const json& g = j.at("grpo");
            only_keys(g, "grpo", {"group_size", "temperature", "clip_eps", "kl_beta", "adv_std_floor",
                                  "learning_rate", "steps", "queries_per_step", "max_len", "ratio_baseline"});
            read(g, "group_size", c.grpo.group_size);
            read(g, "temperature", c.grpo.temperature);
            read(g, "clip_eps", c.grpo.clip_eps);
            read(g, "kl_beta", c.grpo.kl_beta);
            read(g, "adv_std_floor", c.grpo.adv_std_floor);
            read(g, "learning_rate", c.grpo.learning_rate);
            read(g, "steps", c.grpo.steps);
            read(g, "queries_per_step", c.grpo.queries_per_step);
            read(g, "max_len", c.grpo.max_len);
            if (g.contains("ratio_baseline")) {
                const auto s = g.at("ratio_baseline").get<std::string>();
                if (s == "per_step") {
                    c.grpo.ratio_baseline = RatioBaseline::per_step;
                } else if (s == "reference") {
                    c.grpo.ratio_baseline = RatioBaseline::reference;
                } else {
                    throw ValidationError("grpo.ratio_baseline must be per_step or reference");
                }
            }
        }
        if (j.contains("synth")) {
            const json& s = j.at("synth");
            only_keys(s, "synth", {"corpus", "micro_n", "out_dir", "max_retries", "max_skip_fraction"});
            read_opt_path(s, "corpus", c.synth.corpus);
            read(s, "micro_n", c.synth.micro_n);
            read_path(s, "out_dir", c.synth.out_dir);
            read(s, "max_retries", c.synth.max_retries);
            read(s, "max_skip_fraction", c.synth.max_skip_fraction);
        }
        if (j.contains("sft")) {
            const json& s = j.at("sft");
            only_keys(s, "sft", {"data", "init_checkpoint", "checkpoint", "trace", "steps", "batch_size",
                                 "learning_rate"});
            read_path(s, "data", c.sft.data);
            read_opt_path(s, "init_checkpoint", c.sft.init_checkpoint);
            read_path(s, "checkpoint", c.sft.checkpoint);
            read_path(s, "trace", c.sft.trace);
            read(s, "steps", c.sft.steps);
            read(s, "batch_size", c.sft.batch_size);
            read(s, "learning_rate", c.sft.learning_rate);
        }
        if (j.contains("train")) {
            const json& t = j.at("train");
            only_keys(t, "train", {"data_dir", "tasks", "max_queries_per_kind", "init_checkpoint",
                                   "checkpoint", "trace"});
            read_path(t, "data_dir", c.train.data_dir);
            if (t.contains("tasks")) {
                c.train.tasks.clear();
                for (const auto& k : t.at("tasks")) c.train.tasks.push_back(task_kind_from_string(k.get<std::string>()));
            }
            read(t, "max_queries_per_kind", c.train.max_queries_per_kind);
            read_opt_path(t, "init_checkpoint", c.train.init_checkpoint);
            read_path(t, "checkpoint", c.train.checkpoint);
            read_path(t, "trace", c.train.trace);
        }
        if (j.contains("eval")) {
            const json& e = j.at("eval");
            only_keys(e, "eval", {"checkpoint", "prompts", "report", "samples", "max_len"});
            read_path(e, "checkpoint", c.eval.checkpoint);
            read_path(e, "prompts", c.eval.prompts);
            read_path(e, "report", c.eval.report);
            read(e, "samples", c.eval.samples);
            read(e, "max_len", c.eval.max_len);
        }
        if (j.contains("diversity")) {
            const json& d = j.at("diversity");
            only_keys(d, "diversity", {"k", "temperature", "threshold"});
            read(d, "k", c.diversity.k);
            read(d, "temperature", c.diversity.temperature);
            read(d, "threshold", c.diversity.threshold);
        }
        if (j.contains("gradcheck")) {
            const json& g = j.at("gradcheck");
            only_keys(g, "gradcheck", {"instances", "tolerance"});
            read(g, "instances", c.gradcheck.instances);
            read(g, "tolerance", c.gradcheck.tolerance);
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("bad config value: ") + e.what());
    }
    c.grpo.weights = c.rewards;
    c.grpo.seed = c.seed;
    validate(c.grpo);
    validate(DistanceConfig{DistanceKind::token_overlap, c.diversity.threshold, {}});
    return c;
}

nlohmann::ordered_json to_json(const RunConfig& c) {
    nlohmann::ordered_json j;
    j["seed"] = c.seed;
    j["overwrite"] = c.overwrite;
    j["policy"] = {{"kind", to_string(c.policy.kind)},
                   {"buckets", c.policy.buckets},
                   {"order", c.policy.order},
                   {"max_context", c.policy.max_context}};
    j["rewards"] = {{"task", c.rewards.task}, {"format", c.rewards.format}};
    j["grpo"] = {{"group_size", c.grpo.group_size},
                 {"temperature", c.grpo.temperature},
                 {"clip_eps", c.grpo.clip_eps},
                 {"kl_beta", c.grpo.kl_beta},
                 {"adv_std_floor", c.grpo.adv_std_floor},
                 {"learning_rate", c.grpo.learning_rate},
                 {"steps", c.grpo.steps},
                 {"queries_per_step", c.grpo.queries_per_step},
                 {"max_len", c.grpo.max_len},
                 {"ratio_baseline", c.grpo.ratio_baseline == RatioBaseline::per_step ? "per_step" : "reference"}};
    j["synth"] = {{"corpus", opt_path(c.synth.corpus)},
                  {"micro_n", c.synth.micro_n},
                  {"out_dir", c.synth.out_dir.string()},
                  {"max_retries", c.synth.max_retries},
                  {"max_skip_fraction", c.synth.max_skip_fraction}};
    j["sft"] = {{"data", c.sft.data.string()},
                {"init_checkpoint", opt_path(c.sft.init_checkpoint)},
                {"checkpoint", c.sft.checkpoint.string()},
                {"trace", c.sft.trace.string()},
                {"steps", c.sft.steps},
                {"batch_size", c.sft.batch_size},
                {"learning_rate", c.sft.learning_rate}};
    std::vector<std::string> tasks;
    for (TaskKind k : c.train.tasks) tasks.push_back(to_string(k));
    j["train"] = {{"data_dir", c.train.data_dir.string()},
                  {"tasks", tasks},
                  {"max_queries_per_kind", c.train.max_queries_per_kind},
                  {"init_checkpoint", opt_path(c.train.init_checkpoint)},
                  {"checkpoint", c.train.checkpoint.string()},
                  {"trace", c.train.trace.string()}};
    j["eval"] = {{"checkpoint", c.eval.checkpoint.string()},
                 {"prompts", c.eval.prompts.string()},
                 {"report", c.eval.report.string()},
                 {"samples", c.eval.samples},
                 {"max_len", c.eval.max_len}};
    j["diversity"] = {{"k", c.diversity.k}, {"temperature", c.diversity.temperature},
                      {"threshold", c.diversity.threshold}};
    j["gradcheck"] = {{"instances", c.gradcheck.instances}, {"tolerance", c.gradcheck.tolerance}};
    return j;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(is, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::exception& e) {
        throw ValidationError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

}  // namespace dpgrpo
