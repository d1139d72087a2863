#include "dpgrpo/dataset.hpp"

#include <cctype>

#include "dpgrpo/errors.hpp"
#include "dpgrpo/rewards.hpp"
#include "dpgrpo/vocab.hpp"

namespace dpgrpo {

namespace {

bool blank(std::string_view s) {
    for (char c : s) {
        if (!std::isspace(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

std::string_view trim_right(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string_view trim(std::string_view s) {
    s = trim_right(s);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    return s;
}

bool has_delimiter(std::string_view s) {
    return s.find(kOpenThink) != std::string_view::npos ||
           s.find(kCloseThink) != std::string_view::npos;
}

}  // namespace

std::string to_string(PairKind kind) {
    return kind == PairKind::discrimination ? "discrimination" : "preference";
}

std::string to_string(Position pos) { return pos == Position::former ? "former" : "later"; }

std::string preference_instruction(Position correct_position) {
    return "Is the " + to_string(correct_position) + " solution the correct one?";
}

void validate(const SeedSample& seed) {
    if (seed.id.empty()) throw ValidationError("seed id is empty");
    if (blank(seed.question)) throw ValidationError("seed " + seed.id + ": question is empty");
    if (blank(seed.gold_answer)) throw ValidationError("seed " + seed.id + ": gold answer is empty");
    if (blank(seed.image_caption)) throw ValidationError("seed " + seed.id + ": image caption is empty");
}

SplitSolution split_solution(std::string_view text) {
    const std::size_t at = text.rfind(kAnswerMarker);
    if (at == std::string_view::npos) return {std::string(trim(text)), std::nullopt};
    return {std::string(trim(text.substr(0, at))), parse_answer_line(text.substr(at))};
}

void validate(const SolutionSet& sols, const SeedSample& seed) {
    const std::string where = "solution set for seed " + seed.id + ": ";
    if (sols.seed_id != seed.id) throw ValidationError(where + "seed id mismatch");
    const std::string gold = normalize_answer(seed.gold_answer);
    for (std::size_t i = 0; i < 2; ++i) {
        const Solution& s = sols.correct[i];
        if (!s.correct) throw ValidationError(where + "correct[" + std::to_string(i) + "] not flagged correct");
        if (blank(s.text)) throw ValidationError(where + "correct[" + std::to_string(i) + "] is empty");
        auto split = split_solution(s.text);
        if (!split.answer) {
            throw ValidationError(where + "correct[" + std::to_string(i) + "] has no answer line");
        }
        if (*split.answer != gold) {
            throw ValidationError(where + "correct[" + std::to_string(i) + "] answer '" + *split.answer +
                                  "' differs from gold '" + gold + "'");
        }
        if (split.rationale.empty() || has_delimiter(split.rationale)) {
            throw ValidationError(where + "correct[" + std::to_string(i) + "] has an unusable rationale");
        }
    }
    if (trim(sols.correct[0].text) == trim(sols.correct[1].text)) {
        throw ValidationError(where + "the two correct solutions are identical");
    }
    for (std::size_t i = 0; i < 2; ++i) {
        const Solution& s = sols.incorrect[i];
        if (s.correct) throw ValidationError(where + "incorrect[" + std::to_string(i) + "] flagged correct");
        if (blank(s.text)) throw ValidationError(where + "incorrect[" + std::to_string(i) + "] is empty");
        auto split = split_solution(s.text);
        if (split.answer && *split.answer == gold) {
            throw ValidationError(where + "incorrect[" + std::to_string(i) + "] reaches the gold answer");
        }
    }
}

std::string ThinkSample::completion_text() const {
    return rationale_think + " " + std::string(kAnswerMarker) + " " + answer;
}

void validate(const PairSample& pair) {
    if (pair.first.empty() || pair.second.empty()) throw ValidationError("pair member is empty");
    if (pair.label != 1) throw ValidationError("pair label must be 1");
    if (pair.kind == PairKind::discrimination) {
        if (pair.instruction != kDiscriminationInstruction) {
            throw ValidationError("discrimination pair carries the wrong instruction");
        }
        if (pair.correct_position) throw ValidationError("discrimination pair has a correct position");
    } else {
        if (!pair.correct_position) throw ValidationError("preference pair lacks a correct position");
        if (pair.instruction != preference_instruction(*pair.correct_position)) {
            throw ValidationError("preference instruction does not match its position");
        }
    }
}

std::string wrap_think(std::string_view rationale, std::string_view answer) {
    if (blank(rationale)) throw ValidationError("rationale is empty");
    if (has_delimiter(rationale)) throw ValidationError("rationale already contains think delimiters");
    if (blank(answer)) throw ValidationError("answer is empty");
    std::string out;
    out += kOpenThink;
    out += rationale;
    out += kCloseThink;
    out += ' ';
    out += kAnswerMarker;
    out += ' ';
    out += answer;
    return out;
}

std::vector<ThinkSample> build_think_set(const SeedSample& seed, const SolutionSet& sols) {
    validate(seed);
    validate(sols, seed);
    std::vector<ThinkSample> out;
    out.reserve(2);
    for (const Solution& s : sols.correct) {
        auto split = split_solution(s.text);
        std::string rationale_think;
        rationale_think += kOpenThink;
        rationale_think += split.rationale;
        rationale_think += kCloseThink;
        out.push_back({seed.id, seed.image_caption, seed.question, std::move(rationale_think),
                       seed.gold_answer});
    }
    return out;
}

PairSample build_discrimination_sample(const SeedSample& seed, const SolutionSet& sols, Rng& rng) {
    validate(seed);
    validate(sols, seed);
    const bool swap = rng.coin();
    PairSample p;
    p.seed_id = seed.id;
    p.image_caption = seed.image_caption;
    p.question = seed.question;
    p.first = sols.correct[swap ? 1 : 0].text;
    p.second = sols.correct[swap ? 0 : 1].text;
    p.kind = PairKind::discrimination;
    p.instruction = std::string(kDiscriminationInstruction);
    p.label = 1;
    return p;
}

PairSample build_preference_sample(const SeedSample& seed, const SolutionSet& sols, Rng& rng) {
    validate(seed);
    validate(sols, seed);
    const std::size_t ci = rng.coin() ? 1 : 0;
    const std::size_t ii = rng.coin() ? 1 : 0;
    const Position pos = rng.coin() ? Position::later : Position::former;
    PairSample p;
    p.seed_id = seed.id;
    p.image_caption = seed.image_caption;
    p.question = seed.question;
    const std::string& good = sols.correct[ci].text;
    const std::string& bad = sols.incorrect[ii].text;
    p.first = pos == Position::former ? good : bad;
    p.second = pos == Position::former ? bad : good;
    p.kind = PairKind::preference;
    p.instruction = preference_instruction(pos);
    p.label = 1;
    p.correct_position = pos;
    return p;
}

std::string render_prompt(const SeedSample& seed) {
    validate(seed);
    std::string p;
    p += "You are given a math problem about an image. The image is described in formal language.\n\n";
    p += kCaptionHeader;
    p += '\n';
    p += seed.image_caption;
    p += "\n\n";
    p += kQuestionHeader;
    p += '\n';
    p += seed.question;
    p += "\n\n";
    p += kOriginalSolutionHeader;
    p += '\n';
    p += seed.original_solution;
    p += "\n\n";
    p += "### Task\n"
         "Write two correct solutions that reach the final answer from different solving "
         "perspectives, so that the two routes differ from each other. Then write two incorrect "
         "solutions that look plausible but reach a wrong final answer. Reflect on each step "
         "before committing to it. End every solution with a line of the form "
         "\"Answer: <value>\".\n"
         "Put each solution between its tags: [SOLUTION_CORRECT_1] ... [/SOLUTION_CORRECT_1], "
         "[SOLUTION_CORRECT_2] ... [/SOLUTION_CORRECT_2], [SOLUTION_INCORRECT_1] ... "
         "[/SOLUTION_INCORRECT_1], [SOLUTION_INCORRECT_2] ... [/SOLUTION_INCORRECT_2].\n";
    return p;
}

}  // namespace dpgrpo
