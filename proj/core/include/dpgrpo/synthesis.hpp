#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpgrpo/dataset.hpp"
#include "dpgrpo/rng.hpp"

namespace dpgrpo {

struct GeneratorRequest {
    std::string seed_id;
    std::string prompt;
    std::size_t decode_budget = 4096;
    std::size_t attempt = 0;  // 0 on the first call, incremented per retry
};

// Produces raw text holding four tagged blocks:
//   [SOLUTION_CORRECT_1] ... [/SOLUTION_CORRECT_1]
//   [SOLUTION_CORRECT_2] ... [/SOLUTION_CORRECT_2]
//   [SOLUTION_INCORRECT_1] ... [/SOLUTION_INCORRECT_1]
//   [SOLUTION_INCORRECT_2] ... [/SOLUTION_INCORRECT_2]
// An opening tag may carry a perspective label: [SOLUTION_CORRECT_1 perspective=split].
// Text outside the blocks is ignored.
class SolutionGenerator {
public:
    virtual ~SolutionGenerator() = default;
    virtual std::string id() const = 0;
    // May throw GeneratorUnavailable.
    virtual std::string generate(const GeneratorRequest& request) = 0;
};

// Parses the four tagged blocks. Throws ValidationError unless every tag
// occurs exactly once. Does not check answers.
SolutionSet parse_generator_output(std::string_view raw, std::string seed_id);

enum class MicroOp { add, sub, mul };

// Desk-scale arithmetic problem with two solving routes: "direct" evaluates
// in one step, "split" decomposes the right operand into two parts.
struct MicroTask {
    int lhs = 0;
    MicroOp op = MicroOp::add;
    int rhs = 0;

    int gold() const;
    std::string expression() const;  // "7 + 5"
    std::string route_a() const;     // "direct 7 + 5 = 12"
    std::string route_b() const;     // "split 5 = 3 + 2 ; 7 + 3 = 10 ; 10 + 2 = 12"
    // Same routes with the last step's result shifted by `delta`.
    std::string route_a_with(int delta) const;
    std::string route_b_with(int delta) const;

    SeedSample to_seed() const;

    bool operator==(const MicroTask&) const = default;
};

char op_symbol(MicroOp op);

// Finds "<int> <op> <int>" in `text`.
std::optional<MicroTask> parse_micro_task(std::string_view text);

// Solution text: rationale, newline, "Answer: <value>".
std::string solution_text(std::string_view rationale, int value);

// n distinct micro tasks (lhs 2..19, rhs 2..9, subtraction only when
// lhs > rhs) in rng order. Throws if n exceeds the task pool.
std::vector<SeedSample> make_micro_corpus(std::size_t n, Rng& rng);
std::size_t micro_task_pool_size();

// Deterministic stand-in for a reasoning model. Reads the question section of
// the prompt and answers with both routes correct, plus route a off by +1 and
// route b off by -1 as the incorrect pair.
class MockGenerator : public SolutionGenerator {
public:
    std::string id() const override { return "mock-micro-v1"; }
    std::string generate(const GeneratorRequest& request) override;
};

// Calls the generator until its output parses and validates against `seed`,
// at most 1 + max_retries times. Throws ValidationError naming the last
// broken invariant.
SolutionSet generate_solutions(SolutionGenerator& generator, const GeneratorRequest& request,
                               const SeedSample& seed, std::size_t max_retries = 3);

struct SynthesisOptions {
    std::uint64_t rng_seed = 0;
    std::size_t max_retries = 3;
    double max_skip_fraction = 0.1;
    std::string source_corpus = "micro";
    std::size_t decode_budget = 4096;
};

struct SynthesisResult {
    std::vector<SolutionSet> solution_sets;
    std::vector<ThinkSample> think;
    std::vector<PairSample> discrimination;
    std::vector<PairSample> preference;
    DatasetManifest manifest;
};

// Seeds whose generation fails are skipped from all outputs and listed in
// the manifest. Throws ValidationError when the skipped fraction exceeds
// max_skip_fraction, or on invalid or duplicate seeds. Pair ordering for a
// seed uses a stream derived from (rng_seed, seed id).
SynthesisResult synthesize_corpus(std::span<const SeedSample> seeds, SolutionGenerator& generator,
                                  const SynthesisOptions& options = {});

}  // namespace dpgrpo
