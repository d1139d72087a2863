#include <gtest/gtest.h>

#include <set>
#include <sstream>

#include "dpgrpo/errors.hpp"
#include "dpgrpo/rewards.hpp"
#include "dpgrpo/synthesis.hpp"

using namespace dpgrpo;

namespace {

// Evaluates "a op b = c" steps (after any "x = p + q" decomposition) and returns the value of the last step, or
// nullopt when any step is arithmetically wrong.
std::optional<long> evaluate_route(const std::string& route) {
    std::istringstream in(route);
    std::string word;
    in >> word;  // route tag
    std::optional<long> last;
    std::string chunk;
    std::string all((std::istreambuf_iterator<char>(in)), {});
    std::istringstream steps(all);
    while (std::getline(steps, chunk, ';')) {
        std::istringstream s(chunk);
        long a, b, c;
        char op, eq;
        if (chunk.find('=') < chunk.find_first_of("+-*")) {
            // Decomposition "x = p + q".
            if (!(s >> c >> eq >> a >> op >> b) || eq != '=' || op != '+' || a + b != c) return std::nullopt;
            continue;
        }
        if (!(s >> a >> op >> b >> eq >> c) || eq != '=') return std::nullopt;
        const long v = op == '+' ? a + b : op == '-' ? a - b : a * b;
        if (v != c) return std::nullopt;
        last = c;
    }
    return last;
}

class ScriptedGenerator : public SolutionGenerator {
public:
    std::vector<std::string> replies;
    std::size_t calls = 0;
    std::string id() const override { return "scripted"; }
    std::string generate(const GeneratorRequest&) override {
        const std::string& r = replies[std::min(calls, replies.size() - 1)];
        ++calls;
        return r;
    }
};

std::string blocks(const std::string& c1, const std::string& c2, const std::string& i1, const std::string& i2) {
    return "Here you go.\n[SOLUTION_CORRECT_1 perspective=direct]\n" + c1 + "\n[/SOLUTION_CORRECT_1]\n" +
           "[SOLUTION_CORRECT_2]" + c2 + "[/SOLUTION_CORRECT_2]\nsome prose\n" +
           "[SOLUTION_INCORRECT_1]" + i1 + "[/SOLUTION_INCORRECT_1]" +
           "[SOLUTION_INCORRECT_2]" + i2 + "[/SOLUTION_INCORRECT_2] bye";
}

// Mock that refuses a chosen seed.
class FailingFor : public MockGenerator {
public:
    explicit FailingFor(std::string id) : bad_(std::move(id)) {}
    std::string generate(const GeneratorRequest& r) override {
        if (r.seed_id == bad_) throw GeneratorUnavailable("down");
        return MockGenerator::generate(r);
    }

private:
    std::string bad_;
};

}  // namespace

TEST(MicroTask, RoutesAndSeed) {
    const MicroTask t{7, MicroOp::add, 5};
    EXPECT_EQ(t.gold(), 12);
    EXPECT_EQ(t.expression(), "7 + 5");
    EXPECT_EQ(t.route_a(), "direct 7 + 5 = 12");
    EXPECT_EQ(t.route_b(), "split 5 = 3 + 2 ; 7 + 3 = 10 ; 10 + 2 = 12");
    const SeedSample s = t.to_seed();
    EXPECT_EQ(s.id, "micro-7add5");
    EXPECT_EQ(s.image_caption, "image shows 7 + 5");
    EXPECT_EQ(s.question, "what is 7 + 5 ?");
    EXPECT_EQ(s.gold_answer, "12");
    EXPECT_EQ(parse_micro_task(s.question), t);
}

TEST(MicroTask, EveryPoolTaskHasTwoValidRoutes) {
    Rng rng(0);
    const auto corpus = make_micro_corpus(micro_task_pool_size(), rng);
    std::set<std::string> ids;
    for (const SeedSample& s : corpus) {
        ids.insert(s.id);
        const auto t = parse_micro_task(s.question);
        ASSERT_TRUE(t.has_value()) << s.question;
        EXPECT_NE(t->route_a(), t->route_b());
        EXPECT_EQ(evaluate_route(t->route_a()), std::stol(s.gold_answer)) << t->route_a();
        EXPECT_EQ(evaluate_route(t->route_b()), std::stol(s.gold_answer)) << t->route_b();
        EXPECT_GT(t->gold(), 0);
    }
    EXPECT_EQ(ids.size(), corpus.size());
    EXPECT_THROW(make_micro_corpus(micro_task_pool_size() + 1, rng), ValidationError);
}

TEST(MicroCorpus, DeterministicAndEmptyCase) {
    Rng a(1), b(1), c(2);
    const auto x = make_micro_corpus(50, a);
    EXPECT_EQ(x, make_micro_corpus(50, b));
    EXPECT_NE(x, make_micro_corpus(50, c));
    EXPECT_EQ(x.size(), 50u);
    Rng d(3);
    EXPECT_TRUE(make_micro_corpus(0, d).empty());
}

TEST(Mock, SolutionsForSevenPlusFive) {
    const MicroTask t{7, MicroOp::add, 5};
    const SeedSample seed = t.to_seed();
    MockGenerator gen;
    const SolutionSet s = generate_solutions(gen, {seed.id, render_prompt(seed)}, seed);
    EXPECT_EQ(s.correct[0].text, t.route_a() + "\nAnswer: 12");
    EXPECT_EQ(s.correct[1].text, t.route_b() + "\nAnswer: 12");
    EXPECT_EQ(split_solution(s.incorrect[0].text).answer, "13");
    EXPECT_EQ(split_solution(s.incorrect[1].text).answer, "11");
    EXPECT_EQ(s.correct[0].perspective_tag, "direct");
    EXPECT_EQ(s.correct[1].perspective_tag, "split");
    EXPECT_TRUE(s.correct[0].correct && s.correct[1].correct);
    EXPECT_FALSE(s.incorrect[0].correct || s.incorrect[1].correct);
}

TEST(Mock, IncorrectSolutionsNeverScore) {
    Rng rng(0);
    MockGenerator gen;
    for (const SeedSample& seed : make_micro_corpus(micro_task_pool_size(), rng)) {
        const SolutionSet s = generate_solutions(gen, {seed.id, render_prompt(seed)}, seed);
        for (const Solution& bad : s.incorrect) {
            const auto split = split_solution(bad.text);
            EXPECT_EQ(accuracy_reward(wrap_think(split.rationale, *split.answer), seed.gold_answer), 0);
        }
    }
}

TEST(ParseGeneratorOutput, ToleratesProseAndReadsTags) {
    const auto s = parse_generator_output(blocks("a\nAnswer: 1", "b\nAnswer: 1", "c", "d"), "x");
    EXPECT_EQ(s.seed_id, "x");
    EXPECT_EQ(s.correct[0].text, "a\nAnswer: 1");
    EXPECT_EQ(s.correct[0].perspective_tag, "direct");
    EXPECT_FALSE(s.correct[1].perspective_tag.has_value());
    EXPECT_EQ(s.incorrect[1].text, "d");
}

TEST(ParseGeneratorOutput, EachTagExactlyOnce) {
    const std::string ok = blocks("a", "b", "c", "d");
    EXPECT_THROW(parse_generator_output(ok + "[SOLUTION_CORRECT_2]e[/SOLUTION_CORRECT_2]", "x"), ValidationError);
    std::string missing = ok;
    missing.erase(missing.find("[SOLUTION_INCORRECT_2]"));
    EXPECT_THROW(parse_generator_output(missing, "x"), ValidationError);
    EXPECT_THROW(parse_generator_output("", "x"), ValidationError);
}

TEST(GenerateSolutions, RejectsIdenticalCorrectTexts) {
    const SeedSample seed = MicroTask{7, MicroOp::add, 5}.to_seed();
    ScriptedGenerator gen;
    gen.replies = {blocks("direct 7 + 5 = 12\nAnswer: 12", "direct 7 + 5 = 12\nAnswer: 12", "x\nAnswer: 13",
                          "y\nAnswer: 11")};
    try {
        generate_solutions(gen, {seed.id, render_prompt(seed)}, seed, 3);
        FAIL();
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("identical"), std::string::npos) << e.what();
    }
    EXPECT_EQ(gen.calls, 4u);
}

TEST(GenerateSolutions, RejectsWrongCorrectAnswer) {
    const SeedSample seed = MicroTask{7, MicroOp::add, 5}.to_seed();
    ScriptedGenerator gen;
    gen.replies = {blocks("a\nAnswer: 12", "b\nAnswer: 14", "x\nAnswer: 13", "y\nAnswer: 11")};
    EXPECT_THROW(generate_solutions(gen, {seed.id, render_prompt(seed)}, seed, 0), ValidationError);
    EXPECT_EQ(gen.calls, 1u);
}

TEST(GenerateSolutions, RetriesUntilValid) {
    const SeedSample seed = MicroTask{7, MicroOp::add, 5}.to_seed();
    ScriptedGenerator gen;
    gen.replies = {"garbage", blocks("a\nAnswer: 12", "b\nAnswer: 12", "x\nAnswer: 13", "y\nAnswer: 11")};
    const SolutionSet s = generate_solutions(gen, {seed.id, render_prompt(seed)}, seed, 3);
    EXPECT_EQ(gen.calls, 2u);
    EXPECT_EQ(s.correct[1].text, "b\nAnswer: 12");
}

TEST(SynthesizeCorpus, HundredSeedsGiveTwoToOneToOne) {
    Rng rng(8);
    const auto seeds = make_micro_corpus(100, rng);
    MockGenerator gen;
    SynthesisOptions opts;
    opts.rng_seed = 8;
    const auto res = synthesize_corpus(seeds, gen, opts);
    // Count oracle: each validated seed contributes 2 think, 1 discrimination, 1 preference.
    std::size_t think = 0, disc = 0, pref = 0;
    for (const auto& t : res.think) think += !t.seed_id.empty();
    for (const auto& p : res.discrimination) disc += p.kind == PairKind::discrimination;
    for (const auto& p : res.preference) pref += p.kind == PairKind::preference;
    EXPECT_EQ(think, 200u);
    EXPECT_EQ(disc, 100u);
    EXPECT_EQ(pref, 100u);
    EXPECT_TRUE(res.manifest.skipped.empty());
    EXPECT_EQ(res.manifest.n_think, 200u);
    EXPECT_EQ(res.manifest.generator_id, "mock-micro-v1");
    EXPECT_EQ(res.manifest.rng_seed, 8u);
    for (const ThinkSample& t : res.think) {
        EXPECT_EQ(accuracy_reward(t.completion_text(), t.answer), 1);
        EXPECT_EQ(format_reward(t.completion_text()), 1);
    }
}

TEST(SynthesizeCorpus, ForcedFailureIsSkippedConsistently) {
    Rng rng(9);
    const auto seeds = make_micro_corpus(10, rng);
    FailingFor gen(seeds[4].id);
    const auto res = synthesize_corpus(seeds, gen, {});
    EXPECT_EQ(res.think.size(), 18u);
    EXPECT_EQ(res.discrimination.size(), 9u);
    EXPECT_EQ(res.preference.size(), 9u);
    ASSERT_EQ(res.manifest.skipped, std::vector<std::string>{seeds[4].id});
    for (const auto& t : res.think) EXPECT_NE(t.seed_id, seeds[4].id);
    for (const auto& p : res.preference) EXPECT_NE(p.seed_id, seeds[4].id);
}

TEST(SynthesizeCorpus, SkipThresholdFailsTheRun) {
    Rng rng(9);
    const auto seeds = make_micro_corpus(5, rng);
    FailingFor gen(seeds[0].id);
    SynthesisOptions opts;
    opts.max_skip_fraction = 0.1;
    EXPECT_THROW(synthesize_corpus(seeds, gen, opts), ValidationError);
    opts.max_skip_fraction = 0.25;
    EXPECT_NO_THROW(synthesize_corpus(seeds, gen, opts));
}

TEST(SynthesizeCorpus, EmptySeedList) {
    MockGenerator gen;
    const auto res = synthesize_corpus({}, gen, {});
    EXPECT_TRUE(res.think.empty() && res.discrimination.empty() && res.preference.empty());
    EXPECT_EQ(res.manifest.n_seeds, 0u);
    EXPECT_EQ(res.manifest.generator_id, "mock-micro-v1");
}

TEST(SynthesizeCorpus, IdempotentAndSeedSensitive) {
    Rng rng(10);
    const auto seeds = make_micro_corpus(30, rng);
    MockGenerator gen;
    SynthesisOptions a;
    a.rng_seed = 1;
    SynthesisOptions b = a;
    b.rng_seed = 2;
    const auto r1 = synthesize_corpus(seeds, gen, a);
    const auto r2 = synthesize_corpus(seeds, gen, a);
    const auto r3 = synthesize_corpus(seeds, gen, b);
    EXPECT_EQ(r1.preference, r2.preference);
    EXPECT_EQ(r1.discrimination, r2.discrimination);
    EXPECT_NE(r1.preference, r3.preference);
    EXPECT_EQ(r1.think, r3.think);
}

TEST(SynthesizeCorpus, DuplicateSeedIdsRejected) {
    const SeedSample s = MicroTask{7, MicroOp::add, 5}.to_seed();
    std::vector<SeedSample> seeds{s, s};
    MockGenerator gen;
    EXPECT_THROW(synthesize_corpus(seeds, gen, {}), ValidationError);
}
