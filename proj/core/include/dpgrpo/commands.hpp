#pragma once

#include <functional>
#include <iosfwd>

#include "dpgrpo/config.hpp"
#include "dpgrpo/gradcheck.hpp"

namespace dpgrpo {

enum ExitCode : int {
    kExitOk = 0,
    kExitCheckFailed = 1,
    kExitValidation = 2,
    kExitDivergence = 3,
    kExitIo = 4,
};

// Runs `body` and maps exceptions to exit codes, printing the message to
// `err`. The body's own return value is passed through.
int run_guarded(const std::function<int()>& body, std::ostream& err);

// Each command throws on failure (see errors.hpp) and prints a short summary
// to `out`. Outputs are written through a temporary file and renamed into
// place; an existing output is an IoError unless cfg.overwrite is set.

// Writes seeds, solution sets, think / discrimination / preference records
// and manifest.json into cfg.synth.out_dir.
void cmd_synth(const RunConfig& cfg, std::ostream& out);

// SFT on cfg.sft.data. Writes the checkpoint and a JSONL trace.
void cmd_sft(const RunConfig& cfg, std::ostream& out);

// GRPO over the datasets in cfg.train.data_dir.
void cmd_train(const RunConfig& cfg, std::ostream& out);

// Accuracy and per-K diversity of a checkpoint on a prompt record file.
void cmd_eval(const RunConfig& cfg, std::ostream& out);

// Finite-difference checks of all three objectives. Returns kExitOk when
// every objective is under cfg.gradcheck.tolerance, else kExitCheckFailed.
int cmd_gradcheck(const RunConfig& cfg, std::ostream& out, const GradTamper& tamper = {});

}  // namespace dpgrpo
