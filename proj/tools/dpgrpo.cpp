// dpgrpo: synthesis, SFT, GRPO training, evaluation and gradient checks.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "dpgrpo/commands.hpp"
#include "dpgrpo/config.hpp"

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    bool overwrite = false;
};

void add_common(CLI::App* sub, Overrides& o) {
    sub->add_option("-c,--config", o.config, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("-s,--seed", o.seed, "global rng seed (overrides config)");
    sub->add_flag("--overwrite", o.overwrite, "replace existing outputs");
}

dpgrpo::RunConfig load(const Overrides& o) {
    dpgrpo::RunConfig cfg = o.config.empty() ? dpgrpo::config_from_json(nlohmann::json::object())
                                             : dpgrpo::load_config(o.config);
    if (o.seed) cfg.seed = *o.seed;
    if (o.overwrite) cfg.overwrite = true;
    cfg.grpo.seed = cfg.seed;
    return cfg;
}

template <class T>
void override_with(const std::optional<T>& v, T& dst) {
    if (v) dst = *v;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Diverse-perspective data synthesis and GRPO post-training on a micro vocabulary"};
    app.require_subcommand(1);
    Overrides o;

    auto* synth = app.add_subcommand("synth", "synthesize think / discrimination / preference records");
    add_common(synth, o);
    std::optional<std::string> corpus, out_dir;
    std::optional<std::size_t> micro_n;
    synth->add_option("--corpus", corpus, "seed record file (default: generated micro corpus)");
    synth->add_option("--micro-n", micro_n, "number of micro seeds");
    synth->add_option("-o,--out-dir", out_dir, "output directory");

    auto* sft = app.add_subcommand("sft", "supervised fine-tuning on think records");
    add_common(sft, o);
    std::optional<std::string> sft_data, sft_init, sft_ckpt, sft_trace;
    std::optional<std::size_t> sft_steps;
    sft->add_option("--data", sft_data, "think record file");
    sft->add_option("--init", sft_init, "initial checkpoint");
    sft->add_option("--checkpoint", sft_ckpt, "output checkpoint");
    sft->add_option("--trace", sft_trace, "output trace (JSONL)");
    sft->add_option("--steps", sft_steps, "gradient steps");

    auto* train = app.add_subcommand("train", "GRPO training");
    add_common(train, o);
    std::optional<std::string> tr_data, tr_init, tr_ckpt, tr_trace;
    std::optional<std::size_t> tr_steps;
    train->add_option("--data-dir", tr_data, "directory written by synth");
    train->add_option("--init", tr_init, "initial checkpoint (e.g. SFT output)");
    train->add_option("--checkpoint", tr_ckpt, "output checkpoint");
    train->add_option("--trace", tr_trace, "output trace (JSONL)");
    train->add_option("--steps", tr_steps, "GRPO steps");

    auto* eval = app.add_subcommand("eval", "accuracy and diversity report for a checkpoint");
    add_common(eval, o);
    std::optional<std::string> ev_ckpt, ev_prompts, ev_report;
    eval->add_option("--checkpoint", ev_ckpt, "checkpoint to evaluate");
    eval->add_option("--prompts", ev_prompts, "prompt record file");
    eval->add_option("--report", ev_report, "output report (JSON)");

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference checks of the training objectives");
    add_common(gradcheck, o);

    auto* show = app.add_subcommand("config", "print the effective config");
    add_common(show, o);

    CLI11_PARSE(app, argc, argv);

    return dpgrpo::run_guarded(
        [&]() -> int {
            dpgrpo::RunConfig cfg = load(o);
            if (corpus) cfg.synth.corpus = *corpus;
            override_with(micro_n, cfg.synth.micro_n);
            if (out_dir) cfg.synth.out_dir = *out_dir;
            if (sft_data) cfg.sft.data = *sft_data;
            if (sft_init) cfg.sft.init_checkpoint = *sft_init;
            if (sft_ckpt) cfg.sft.checkpoint = *sft_ckpt;
            if (sft_trace) cfg.sft.trace = *sft_trace;
            override_with(sft_steps, cfg.sft.steps);
            if (tr_data) cfg.train.data_dir = *tr_data;
            if (tr_init) cfg.train.init_checkpoint = *tr_init;
            if (tr_ckpt) cfg.train.checkpoint = *tr_ckpt;
            if (tr_trace) cfg.train.trace = *tr_trace;
            override_with(tr_steps, cfg.grpo.steps);
            if (ev_ckpt) cfg.eval.checkpoint = *ev_ckpt;
            if (ev_prompts) cfg.eval.prompts = *ev_prompts;
            if (ev_report) cfg.eval.report = *ev_report;

            if (synth->parsed()) dpgrpo::cmd_synth(cfg, std::cout);
            if (sft->parsed()) dpgrpo::cmd_sft(cfg, std::cout);
            if (train->parsed()) dpgrpo::cmd_train(cfg, std::cout);
            if (eval->parsed()) dpgrpo::cmd_eval(cfg, std::cout);
            if (gradcheck->parsed()) return dpgrpo::cmd_gradcheck(cfg, std::cout);
            if (show->parsed()) std::cout << dpgrpo::to_json(cfg).dump(2) << '\n';
            return dpgrpo::kExitOk;
        },
        std::cerr);
}
