#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace dpgrpo {

enum class TaskKind { solve, discrimination, preference };

std::string to_string(TaskKind kind);
TaskKind task_kind_from_string(std::string_view s);

// Canonical form of an answer value: trimmed, lowercased; integers and finite
// decimals rendered without sign noise or padding zeros ("+05.10" -> "5.1",
// "5.0" -> "5", "-0" -> "0"); comma-separated lists normalized item by item
// and re-joined with ",".
std::string normalize_answer(std::string_view value);

// Value of the last "Answer:" line in `segment`, normalized. No delimiter
// handling; this is the raw answer grammar shared with dataset rendering.
std::optional<std::string> parse_answer_line(std::string_view segment);

// Normalized value of the last "Answer:" line after the close-think
// delimiter, or nullopt when there is none.
std::optional<std::string> extract_answer(std::string_view completion);

int accuracy_reward(std::string_view completion, std::string_view gold_answer);

// 1 iff exactly one <think> and one </think>, in that order, with
// non-blank content between, and no "Answer:" before the close delimiter.
int format_reward(std::string_view completion);

// Verdict "yes" -> 1, "no" -> 0 (case-insensitive); 1 iff it matches
// expected_label. Anything else scores 0.
int judgment_reward(std::string_view completion, int expected_label);

struct RewardWeights {
    double task = 1.0;
    double format = 0.2;
};

struct RewardBreakdown {
    std::optional<int> accuracy;  // solve tasks
    int format = 0;
    std::optional<int> judgment;  // discrimination / preference tasks
    double total = 0.0;

    // The accuracy or judgment signal, whichever applies.
    int task_signal() const { return accuracy ? *accuracy : judgment.value_or(0); }
};

// `gold_or_label` is the gold answer for solve tasks and "0"/"1" for judgment
// tasks. total = w.task * task_signal + w.format * format.
RewardBreakdown total_reward(TaskKind kind, std::string_view completion,
                             std::string_view gold_or_label, const RewardWeights& weights = {});

}  // namespace dpgrpo
