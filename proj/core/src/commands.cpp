#include "dpgrpo/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <unordered_set>

#include "dpgrpo/checkpoint.hpp"
#include "dpgrpo/errors.hpp"
#include "dpgrpo/records.hpp"
#include "dpgrpo/synthesis.hpp"

namespace dpgrpo {

namespace fs = std::filesystem;

int run_guarded(const std::function<int()>& body, std::ostream& err) {
    try {
        return body();
    } catch (const DivergenceError& e) {
        err << "error: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const nlohmann::json::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    }
}

namespace {

void require_input(const fs::path& p, const char* what) {
    if (!fs::exists(p)) throw IoError(std::string(what) + " not found: " + p.string());
}

void require_fresh(const fs::path& p, bool overwrite) {
    if (!overwrite && fs::exists(p)) {
        throw IoError("refusing to overwrite " + p.string() + " (set overwrite)");
    }
}

fs::path temp_sibling(const fs::path& p) {
    fs::path t = p;
    t += ".tmp";
    return t;
}

void write_atomic(const fs::path& p, const std::string& bytes, bool overwrite) {
    require_fresh(p, overwrite);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    const fs::path tmp = temp_sibling(p);
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("cannot write " + tmp.string());
        os << bytes;
        if (!os.flush()) throw IoError("write failed for " + tmp.string());
    }
    fs::rename(tmp, p);
}

std::string checkpoint_bytes(const Policy& policy, std::uint64_t seed) {
    std::ostringstream os;
    write_checkpoint(os, policy, CheckpointMeta{seed});
    return os.str();
}

template <class T>
std::string records_bytes(const std::vector<T>& items) {
    std::ostringstream os;
    write_records(os, as_records(items));
    return os.str();
}

std::string fmt(double x) {
    std::ostringstream os;
    os << std::setprecision(6) << x;
    return os.str();
}

Policy initial_policy(const RunConfig& cfg, const std::optional<fs::path>& init) {
    if (init) {
        require_input(*init, "checkpoint");
        return load_checkpoint(*init);
    }
    return make_policy(cfg.policy);
}

std::vector<Query> cap(std::vector<Query> qs, std::size_t n) {
    if (n != 0 && qs.size() > n) qs.resize(n);
    return qs;
}

}  // namespace

void cmd_synth(const RunConfig& cfg, std::ostream& out) {
    std::vector<SeedSample> seeds;
    std::string source = "micro";
    if (cfg.synth.corpus) {
        require_input(*cfg.synth.corpus, "seed corpus");
        seeds = read_records_as<SeedSample>(*cfg.synth.corpus);
        source = cfg.synth.corpus->filename().string();
    } else {
        Rng rng(derive_seed(cfg.seed, {fnv1a("micro-corpus")}));
        seeds = make_micro_corpus(cfg.synth.micro_n, rng);
    }
    if (seeds.empty()) throw ValidationError("seed corpus is empty");

    MockGenerator generator;
    SynthesisOptions opts;
    opts.rng_seed = cfg.seed;
    opts.max_retries = cfg.synth.max_retries;
    opts.max_skip_fraction = cfg.synth.max_skip_fraction;
    opts.source_corpus = source;
    const SynthesisResult res = synthesize_corpus(seeds, generator, opts);

    const fs::path dir = cfg.synth.out_dir;
    require_fresh(dir, cfg.overwrite);
    fs::path staging = dir;
    staging += ".partial";
    fs::remove_all(staging);
    fs::create_directories(staging);
    try {
        auto put = [&](const char* name, const std::string& bytes) {
            write_atomic(staging / name, bytes, false);
        };
        put("seeds.jsonl", records_bytes(seeds));
        put("solutions.jsonl", records_bytes(res.solution_sets));
        put("think.jsonl", records_bytes(res.think));
        put("discrimination.jsonl", records_bytes(res.discrimination));
        put("preference.jsonl", records_bytes(res.preference));
        put("manifest.json", to_json(res.manifest).dump(2) + "\n");
        if (fs::exists(dir)) fs::remove_all(dir);
        fs::rename(staging, dir);
    } catch (...) {
        std::error_code ec;
        fs::remove_all(staging, ec);
        throw;
    }
    out << "synth: seeds=" << res.manifest.n_seeds << " think=" << res.manifest.n_think
        << " discrimination=" << res.manifest.n_disc << " preference=" << res.manifest.n_pref
        << " skipped=" << res.manifest.skipped.size() << " -> " << dir.string() << '\n';
}

void cmd_sft(const RunConfig& cfg, std::ostream& out) {
    require_input(cfg.sft.data, "SFT data");
    require_fresh(cfg.sft.checkpoint, cfg.overwrite);
    require_fresh(cfg.sft.trace, cfg.overwrite);
    const std::vector<ThinkSample> samples = read_records_as<ThinkSample>(cfg.sft.data);
    if (samples.empty()) throw ValidationError("SFT data is empty: " + cfg.sft.data.string());
    Policy policy = initial_policy(cfg, cfg.sft.init_checkpoint);
    std::vector<TokenSequence> data;
    data.reserve(samples.size());
    for (const ThinkSample& s : samples) data.push_back(encode_think_sample(policy.vocab(), s));

    SftConfig sc;
    sc.steps = cfg.sft.steps;
    sc.batch_size = cfg.sft.batch_size;
    sc.learning_rate = cfg.sft.learning_rate;
    sc.seed = derive_seed(cfg.seed, {fnv1a("sft")});

    const double initial = mean_nll(policy, data);
    SftResult res = train_sft(std::move(policy), data, sc);
    const double final_nll = mean_nll(res.policy, data);

    std::ostringstream trace;
    for (const SftTraceRow& r : res.trace) {
        nlohmann::ordered_json j{{"step", r.step}, {"loss", r.loss}, {"checksum", r.checksum}};
        trace << j.dump() << '\n';
    }
    nlohmann::ordered_json summary{{"summary", true},
                                   {"initial_nll", initial},
                                   {"final_nll", final_nll},
                                   {"steps", sc.steps},
                                   {"seed", cfg.seed}};
    trace << summary.dump() << '\n';
    write_atomic(cfg.sft.trace, trace.str(), cfg.overwrite);
    write_atomic(cfg.sft.checkpoint, checkpoint_bytes(res.policy, cfg.seed), cfg.overwrite);
    out << "sft: samples=" << data.size() << " steps=" << sc.steps << " nll " << fmt(initial) << " -> "
        << fmt(final_nll) << " checksum=" << res.policy.checksum() << '\n';
}

void cmd_train(const RunConfig& cfg, std::ostream& out) {
    const fs::path& dir = cfg.train.data_dir;
    require_input(dir, "data directory");
    require_fresh(cfg.train.checkpoint, cfg.overwrite);
    require_fresh(cfg.train.trace, cfg.overwrite);
    Policy policy = initial_policy(cfg, cfg.train.init_checkpoint);
    const Vocab& vocab = policy.vocab();

    std::vector<Query> solve, disc, pref;
    for (TaskKind kind : cfg.train.tasks) {
        if (kind == TaskKind::solve) {
            require_input(dir / "think.jsonl", "think records");
            solve = solve_queries(vocab, read_records_as<ThinkSample>(dir / "think.jsonl"));
        } else {
            const char* name = kind == TaskKind::discrimination ? "discrimination.jsonl" : "preference.jsonl";
            require_input(dir / name, "pair records");
            std::vector<Query>& dst = kind == TaskKind::discrimination ? disc : pref;
            for (const PairSample& p : read_records_as<PairSample>(dir / name)) {
                dst.push_back(judgment_query(vocab, p));
            }
        }
    }
    const std::size_t n = cfg.train.max_queries_per_kind;
    const std::vector<Query> tasks = interleave_tasks(cap(solve, n), cap(disc, n), cap(pref, n));
    if (tasks.empty()) throw ValidationError("no training tasks selected");

    GrpoConfig gc = cfg.grpo;
    gc.seed = cfg.seed;
    gc.weights = cfg.rewards;
    GrpoResult res = train_grpo(std::move(policy), tasks, gc);

    std::ostringstream trace;
    for (const GrpoTraceRow& r : res.trace) {
        nlohmann::ordered_json j{{"step", r.step},
                                 {"mean_accuracy", r.mean_accuracy},
                                 {"mean_format", r.mean_format},
                                 {"mean_judgment", r.mean_judgment},
                                 {"mean_total", r.mean_total},
                                 {"n_solve", r.n_solve},
                                 {"n_judgment", r.n_judgment},
                                 {"loss", r.loss},
                                 {"kl", r.kl},
                                 {"checksum", r.checksum}};
        trace << j.dump() << '\n';
    }
    write_atomic(cfg.train.trace, trace.str(), cfg.overwrite);
    write_atomic(cfg.train.checkpoint, checkpoint_bytes(res.policy, cfg.seed), cfg.overwrite);
    out << "train: tasks=" << tasks.size() << " steps=" << res.trace.size();
    if (!res.trace.empty()) {
        // Completion-weighted means over the last 100 steps.
        const std::size_t window = std::min<std::size_t>(100, res.trace.size());
        double acc = 0.0, judge = 0.0, total = 0.0;
        std::size_t n_acc = 0, n_judge = 0;
        for (std::size_t i = res.trace.size() - window; i < res.trace.size(); ++i) {
            const GrpoTraceRow& r = res.trace[i];
            acc += r.mean_accuracy * static_cast<double>(r.n_solve);
            judge += r.mean_judgment * static_cast<double>(r.n_judgment);
            total += r.mean_total;
            n_acc += r.n_solve;
            n_judge += r.n_judgment;
        }
        out << " last" << window << ":";
        if (n_acc) out << " mean_accuracy=" << fmt(acc / static_cast<double>(n_acc));
        if (n_judge) out << " mean_judgment=" << fmt(judge / static_cast<double>(n_judge));
        out << " mean_total=" << fmt(total / static_cast<double>(window));
    }
    out << " checksum=" << res.policy.checksum() << '\n';
}

void cmd_eval(const RunConfig& cfg, std::ostream& out) {
    require_input(cfg.eval.checkpoint, "checkpoint");
    require_input(cfg.eval.prompts, "prompt set");
    require_fresh(cfg.eval.report, cfg.overwrite);
    const Policy policy = load_checkpoint(cfg.eval.checkpoint);
    const Vocab& vocab = policy.vocab();

    std::vector<Query> queries;
    std::unordered_set<std::string> seen;
    for (const Record& rec : read_records(cfg.eval.prompts)) {
        Query q;
        if (const auto* s = std::get_if<SeedSample>(&rec)) {
            q = solve_query(vocab, *s);
        } else if (const auto* t = std::get_if<ThinkSample>(&rec)) {
            q = solve_query(vocab, *t);
        } else if (const auto* p = std::get_if<PairSample>(&rec)) {
            q = judgment_query(vocab, *p);
        } else {
            continue;
        }
        if (seen.insert(q.id).second) queries.push_back(std::move(q));
    }
    if (queries.empty()) throw ValidationError("prompt set has no gradeable prompts: " + cfg.eval.prompts.string());

    const TaskAccuracy acc = evaluate_accuracy(policy, queries, cfg.eval.samples, cfg.diversity.temperature,
                                               cfg.eval.max_len, derive_seed(cfg.seed, {fnv1a("eval")}),
                                               cfg.rewards);
    std::vector<PromptTokens> prompts;
    prompts.reserve(queries.size());
    for (const Query& q : queries) prompts.push_back({q.id, q.prompt});
    const DistanceConfig dc{DistanceKind::token_overlap, cfg.diversity.threshold, {}};
    const DiversityReport div = generate_and_score(policy, prompts, cfg.diversity.k, cfg.diversity.temperature,
                                                   cfg.eval.max_len, dc, derive_seed(cfg.seed, {fnv1a("diversity")}));

    nlohmann::ordered_json report;
    report["seed"] = cfg.seed;
    report["checkpoint_checksum"] = policy.checksum();
    report["decoding"] = cfg.eval.samples == 0 ? "greedy" : "sampled";
    report["accuracy"] = {{"solve", acc.solve},
                          {"n_solve", acc.n_solve},
                          {"discrimination", acc.discrimination},
                          {"n_discrimination", acc.n_discrimination},
                          {"preference", acc.preference},
                          {"n_preference", acc.n_preference},
                          {"overall", acc.overall}};
    report["diversity"] = to_json(div, dc);
    write_atomic(cfg.eval.report, report.dump(2) + "\n", cfg.overwrite);

    out << "eval: prompts=" << queries.size() << " accuracy=" << fmt(acc.overall);
    for (const DiversityAtK& d : div.by_k) out << " div@" << d.k << "=" << fmt(d.mean);
    out << '\n';
}

int cmd_gradcheck(const RunConfig& cfg, std::ostream& out, const GradTamper& tamper) {
    bool ok = true;
    for (GradObjective obj : kAllGradObjectives) {
        const GradcheckResult r = gradcheck(obj, cfg.gradcheck.instances, cfg.seed, 1e-5, tamper);
        const bool pass = r.max_error < cfg.gradcheck.tolerance;
        ok = ok && pass;
        out << to_string(obj) << " instances=" << r.errors.size() << " max_rel_error=" << std::scientific
            << std::setprecision(3) << r.max_error << std::defaultfloat << (pass ? " PASS" : " FAIL") << '\n';
    }
    return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace dpgrpo
