#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dpgrpo/rng.hpp"

namespace dpgrpo {

// One source problem. The image is represented by its formal caption.
struct SeedSample {
    std::string id;
    std::string image_caption;
    std::string question;
    std::string original_solution;
    std::string gold_answer;

    bool operator==(const SeedSample&) const = default;
};

void validate(const SeedSample& seed);

// A generated solution: free-form rationale ending in an "Answer: <value>"
// line, without think delimiters.
struct Solution {
    std::string text;
    bool correct = false;
    std::optional<std::string> perspective_tag;

    bool operator==(const Solution&) const = default;
};

struct SolutionSet {
    std::string seed_id;
    std::array<Solution, 2> correct;
    std::array<Solution, 2> incorrect;

    bool operator==(const SolutionSet&) const = default;
};

// Throws ValidationError naming the first broken invariant: flags, distinct
// correct texts, correct answers equal to gold, incorrect answers different
// from gold or absent.
void validate(const SolutionSet& sols, const SeedSample& seed);

// Splits a solution into rationale (text before its last "Answer:" line) and
// normalized answer.
struct SplitSolution {
    std::string rationale;
    std::optional<std::string> answer;
};
SplitSolution split_solution(std::string_view text);

struct ThinkSample {
    std::string seed_id;
    std::string image_caption;
    std::string question;
    std::string rationale_think;  // "<think>...</think>"
    std::string answer;

    // rationale_think followed by the answer line: the SFT target text.
    std::string completion_text() const;

    bool operator==(const ThinkSample&) const = default;
};

enum class PairKind { discrimination, preference };
enum class Position { former, later };

std::string to_string(PairKind kind);
std::string to_string(Position pos);

struct PairSample {
    std::string seed_id;
    std::string image_caption;
    std::string question;
    std::string first;
    std::string second;
    PairKind kind = PairKind::discrimination;
    std::string instruction;
    int label = 1;
    std::optional<Position> correct_position;  // preference only

    bool operator==(const PairSample&) const = default;
};

void validate(const PairSample& pair);

inline constexpr std::string_view kDiscriminationInstruction =
    "Are the solution perspectives of the two solutions dissimilar?";

// "Is the former solution the correct one?" / "Is the later solution ...".
std::string preference_instruction(Position correct_position);

struct DatasetManifest {
    std::size_t n_seeds = 0;
    std::size_t n_think = 0;
    std::size_t n_disc = 0;
    std::size_t n_pref = 0;
    std::string source_corpus;
    std::string generator_id;
    std::uint64_t rng_seed = 0;
    std::vector<std::string> skipped;

    bool operator==(const DatasetManifest&) const = default;
};

// "<think>" + rationale + "</think> Answer: " + answer. Throws on an empty
// rationale or one that already contains a think delimiter.
std::string wrap_think(std::string_view rationale, std::string_view answer);

// One ThinkSample per correct solution, in order.
std::vector<ThinkSample> build_think_set(const SeedSample& seed, const SolutionSet& sols);

// Both correct solutions in rng-chosen order, label 1.
PairSample build_discrimination_sample(const SeedSample& seed, const SolutionSet& sols, Rng& rng);

// One correct and one incorrect solution, each picked uniformly, the correct
// one placed former or later with probability 1/2. Draw order: correct
// index, incorrect index, position.
PairSample build_preference_sample(const SeedSample& seed, const SolutionSet& sols, Rng& rng);

// Generation prompt for one seed. Deterministic.
std::string render_prompt(const SeedSample& seed);

// Section headers used by render_prompt.
inline constexpr std::string_view kCaptionHeader = "### Image description";
inline constexpr std::string_view kQuestionHeader = "### Question";
inline constexpr std::string_view kOriginalSolutionHeader = "### Original solution";

}  // namespace dpgrpo
