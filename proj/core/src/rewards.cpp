#include "dpgrpo/rewards.hpp"

#include <algorithm>
#include <cctype>
#include <regex>

#include "dpgrpo/errors.hpp"
#include "dpgrpo/vocab.hpp"

namespace dpgrpo {

std::string to_string(TaskKind kind) {
    switch (kind) {
        case TaskKind::solve: return "solve";
        case TaskKind::discrimination: return "discrimination";
        case TaskKind::preference: return "preference";
    }
    return "solve";
}

TaskKind task_kind_from_string(std::string_view s) {
    if (s == "solve") return TaskKind::solve;
    if (s == "discrimination") return TaskKind::discrimination;
    if (s == "preference") return TaskKind::preference;
    throw ValidationError("unknown task kind '" + std::string(s) + "'");
}

namespace {

std::string_view trim(std::string_view s) {
    auto blank = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    while (!s.empty() && blank(s.front())) s.remove_prefix(1);
    while (!s.empty() && blank(s.back())) s.remove_suffix(1);
    return s;
}

const std::regex& number_re() {
    static const std::regex re(R"(^([+-]?)(\d*)(?:\.(\d*))?$)");
    return re;
}

std::string normalize_item(std::string_view raw) {
    std::string s(trim(raw));
    std::transform(s.begin(), s.end(), s.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    std::smatch m;
    if (!std::regex_match(s, m, number_re())) return s;
    std::string whole = m[2].str();
    std::string frac = m[3].str();
    if (whole.empty() && frac.empty()) return s;  // "+", ".", "-."
    whole.erase(0, std::min(whole.find_first_not_of('0'), whole.size()));
    frac.erase(frac.find_last_not_of('0') == std::string::npos ? 0 : frac.find_last_not_of('0') + 1);
    if (whole.empty()) whole = "0";
    std::string out = whole;
    if (!frac.empty()) out += "." + frac;
    if (m[1].str() == "-" && out != "0") out = "-" + out;
    return out;
}

}  // namespace

std::string normalize_answer(std::string_view value) {
    value = trim(value);
    if (value.find(',') == std::string_view::npos) return normalize_item(value);
    std::string out;
    std::size_t start = 0;
    for (;;) {
        std::size_t comma = value.find(',', start);
        if (!out.empty() || start > 0) out.push_back(',');
        out += normalize_item(value.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::optional<std::string> parse_answer_line(std::string_view segment) {
    static const std::regex re(R"(Answer:[ \t]*([^\r\n]*))");
    std::optional<std::string> last;
    for (std::cregex_iterator it(segment.data(), segment.data() + segment.size(), re), end;
         it != end; ++it) {
        last = (*it)[1].str();
    }
    if (!last) return std::nullopt;
    std::string value = normalize_answer(*last);
    if (value.empty()) return std::nullopt;
    return value;
}

std::optional<std::string> extract_answer(std::string_view completion) {
    const std::size_t close = completion.rfind(kCloseThink);
    if (close == std::string_view::npos) return std::nullopt;
    return parse_answer_line(completion.substr(close + kCloseThink.size()));
}

int accuracy_reward(std::string_view completion, std::string_view gold_answer) {
    const std::string gold = normalize_answer(gold_answer);
    if (gold.empty()) throw ValidationError("gold answer must be non-empty");
    auto predicted = extract_answer(completion);
    return predicted && *predicted == gold ? 1 : 0;
}

int format_reward(std::string_view completion) {
    static const std::regex open_re("<think>");
    static const std::regex close_re("</think>");
    auto count = [](std::string_view s, const std::regex& re) {
        return std::distance(std::cregex_iterator(s.data(), s.data() + s.size(), re),
                             std::cregex_iterator());
    };
    if (count(completion, open_re) != 1 || count(completion, close_re) != 1) return 0;
    const std::size_t open = completion.find(kOpenThink);
    const std::size_t close = completion.find(kCloseThink);
    if (open > close) return 0;
    std::string_view inner = completion.substr(open + kOpenThink.size(), close - open - kOpenThink.size());
    if (trim(inner).empty()) return 0;
    const std::size_t first_answer = completion.find(kAnswerMarker);
    if (first_answer != std::string_view::npos && first_answer < close) return 0;
    return 1;
}

int judgment_reward(std::string_view completion, int expected_label) {
    auto verdict = extract_answer(completion);
    if (!verdict) return 0;
    int label;
    if (*verdict == "yes") {
        label = 1;
    } else if (*verdict == "no") {
        label = 0;
    } else {
        return 0;
    }
    return label == expected_label ? 1 : 0;
}

RewardBreakdown total_reward(TaskKind kind, std::string_view completion,
                             std::string_view gold_or_label, const RewardWeights& weights) {
    if (weights.task < 0.0 || weights.format < 0.0) {
        throw ValidationError("reward weights must be non-negative");
    }
    RewardBreakdown r;
    r.format = format_reward(completion);
    if (kind == TaskKind::solve) {
        r.accuracy = accuracy_reward(completion, gold_or_label);
    } else {
        const std::string label(trim(gold_or_label));
        if (label != "0" && label != "1") throw ValidationError("judgment label must be 0 or 1");
        r.judgment = judgment_reward(completion, label == "1" ? 1 : 0);
    }
    r.total = weights.task * r.task_signal() + weights.format * r.format;
    return r;
}

}  // namespace dpgrpo
