#include <gtest/gtest.h>

#include "dpgrpo/dataset.hpp"
#include "dpgrpo/errors.hpp"
#include "dpgrpo/rewards.hpp"
#include "reward_oracle.hpp"

using namespace dpgrpo;

TEST(ExtractAnswer, Examples) {
    EXPECT_EQ(extract_answer("<think>2+3=5</think> Answer: 5"), "5");
    EXPECT_EQ(extract_answer("<think>x</think> Answer: 5.0"), "5");
    EXPECT_EQ(extract_answer("no answer line here"), std::nullopt);
}

TEST(ExtractAnswer, LastLineAfterCloseWins) {
    EXPECT_EQ(extract_answer("<think>Answer: 1</think> Answer: 2\nAnswer: 3"), "3");
    EXPECT_EQ(extract_answer("Answer: 4 with no delimiters"), std::nullopt);
    EXPECT_EQ(extract_answer("<think>a</think> nothing"), std::nullopt);
    EXPECT_EQ(extract_answer("<think>a</think> Answer:   "), std::nullopt);
    EXPECT_EQ(extract_answer("<think>a</think> Answer: 1 </think> Answer: 7"), "7");
}

TEST(NormalizeAnswer, Numbers) {
    // Oracle: parse as a number and re-render canonically.
    for (const char* raw : {"5.0", "05", "+5", "5.", "5.000", " 5 "}) EXPECT_EQ(normalize_answer(raw), "5") << raw;
    EXPECT_EQ(normalize_answer("-0"), "0");
    EXPECT_EQ(normalize_answer("-0.00"), "0");
    EXPECT_EQ(normalize_answer("+05.10"), "5.1");
    EXPECT_EQ(normalize_answer(".5"), "0.5");
    EXPECT_EQ(normalize_answer("-12.340"), "-12.34");
    EXPECT_EQ(normalize_answer("007"), "7");
    EXPECT_EQ(normalize_answer("000"), "0");
}

TEST(NormalizeAnswer, TextAndLists) {
    EXPECT_EQ(normalize_answer("  YES "), "yes");
    EXPECT_EQ(normalize_answer("1e3"), "1e3");
    EXPECT_EQ(normalize_answer("1, 02 ,3.0"), "1,2,3");
    EXPECT_EQ(normalize_answer("A,b"), "a,b");
    EXPECT_EQ(normalize_answer("+"), "+");
    EXPECT_EQ(normalize_answer(""), "");
}

TEST(AccuracyReward, Examples) {
    EXPECT_EQ(accuracy_reward("<think>x</think> Answer: 12", "12"), 1);
    EXPECT_EQ(accuracy_reward("<think>x</think> Answer: 13", "12"), 0);
    EXPECT_EQ(accuracy_reward("<think>x</think> Answer: 012", "12"), 1);
    EXPECT_EQ(accuracy_reward("no delimiters Answer: 12", "12"), 0);
    EXPECT_THROW(accuracy_reward("<think>x</think> Answer: 12", "  "), ValidationError);
}

TEST(AccuracyReward, WhitespacePaddingInvariant) {
    for (const char* pad : {"", " ", "\t", "   "}) {
        const std::string text = std::string("<think>x</think> Answer:") + pad + "12" + pad;
        EXPECT_EQ(accuracy_reward(text, "12"), 1) << '[' << pad << ']';
        EXPECT_EQ(accuracy_reward(text, std::string(pad) + "12"), 1);
    }
}

TEST(FormatReward, Examples) {
    EXPECT_EQ(format_reward("<think>a</think> Answer: 1"), 1);
    EXPECT_EQ(format_reward("</think>a<think>"), 0);
    EXPECT_EQ(format_reward("<think>a<think>b</think></think>"), 0);
}

TEST(FormatReward, Edges) {
    EXPECT_EQ(format_reward("<think>a</think>"), 1);
    EXPECT_EQ(format_reward("<think> \n\t</think> Answer: 1"), 0);
    EXPECT_EQ(format_reward("<think></think> Answer: 1"), 0);
    EXPECT_EQ(format_reward("Answer: 1 <think>a</think>"), 0);
    EXPECT_EQ(format_reward("<think>a Answer: 1</think>"), 0);
    EXPECT_EQ(format_reward("<think>a"), 0);
    EXPECT_EQ(format_reward(""), 0);
}

TEST(JudgmentReward, Examples) {
    EXPECT_EQ(judgment_reward("<think>x</think> Answer: yes", 1), 1);
    EXPECT_EQ(judgment_reward("<think>x</think> Answer: no", 1), 0);
    EXPECT_EQ(judgment_reward("<think>x</think> Answer: maybe", 1), 0);
    EXPECT_EQ(judgment_reward("<think>x</think> Answer: NO", 0), 1);
    EXPECT_EQ(judgment_reward("<think>x</think> Answer: Yes ", 1), 1);
    EXPECT_EQ(judgment_reward("no verdict", 0), 0);
}

TEST(TotalReward, Examples) {
    const RewardWeights w{1.0, 0.2};
    auto r = total_reward(TaskKind::solve, "<think>x</think> Answer: 12", "12", w);
    EXPECT_DOUBLE_EQ(r.total, 1.2);
    EXPECT_EQ(r.accuracy, 1);
    EXPECT_FALSE(r.judgment.has_value());

    r = total_reward(TaskKind::solve, "<think>x</think><think> Answer: 12", "12", w);
    EXPECT_EQ(r.format, 0);
    EXPECT_DOUBLE_EQ(r.total, 1.0);

    r = total_reward(TaskKind::discrimination, "<think>x</think> Answer: yes", "1", w);
    EXPECT_EQ(r.judgment, 1);
    EXPECT_FALSE(r.accuracy.has_value());
    EXPECT_DOUBLE_EQ(r.total, 1.2);
}

TEST(TotalReward, ValidatesInputs) {
    EXPECT_THROW(total_reward(TaskKind::solve, "x", "1", {-1.0, 0.2}), ValidationError);
    EXPECT_THROW(total_reward(TaskKind::preference, "x", "2"), ValidationError);
}

TEST(Rewards, BoundsAndPurityOverSynthesizedCompletions) {
    std::vector<std::string> golds;
    const auto texts = oracle::synthesize_completions(500, 5, &golds);
    const RewardWeights w{1.0, 0.2};
    for (std::size_t i = 0; i < texts.size(); ++i) {
        for (TaskKind k : {TaskKind::solve, TaskKind::discrimination, TaskKind::preference}) {
            const std::string key = k == TaskKind::solve ? golds[i] : "1";
            const auto a = total_reward(k, texts[i], key, w);
            const auto b = total_reward(k, texts[i], key, w);
            EXPECT_EQ(a.total, b.total);
            EXPECT_GE(a.total, 0.0);
            EXPECT_LE(a.total, w.task + w.format);
            EXPECT_TRUE(a.format == 0 || a.format == 1);
            EXPECT_NE(a.accuracy.has_value(), a.judgment.has_value());
        }
    }
}

TEST(Rewards, WrapThinkWithCorrectAnswerScoresFull) {
    for (const std::string answer : {"12", "-3", "0.5", "yes"}) {
        const std::string text = wrap_think("some route 1 + 2", answer);
        EXPECT_EQ(accuracy_reward(text, answer), 1);
        EXPECT_EQ(format_reward(text), 1);
    }
}

TEST(Rewards, AgreeWithNaiveScanner) {
    std::vector<std::string> golds;
    const auto texts = oracle::synthesize_completions(1000, 77, &golds);
    for (std::size_t i = 0; i < texts.size(); ++i) {
        EXPECT_EQ(extract_answer(texts[i]), oracle::answer(texts[i])) << texts[i];
        EXPECT_EQ(accuracy_reward(texts[i], golds[i]), oracle::accuracy(texts[i], golds[i])) << texts[i];
        EXPECT_EQ(format_reward(texts[i]), oracle::format(texts[i])) << texts[i];
        for (int label : {0, 1}) EXPECT_EQ(judgment_reward(texts[i], label), oracle::judgment(texts[i], label));
    }
}
