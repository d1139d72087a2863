#include <benchmark/benchmark.h>

#include "dpgrpo/diversity.hpp"
#include "dpgrpo/grpo.hpp"
#include "dpgrpo/rewards.hpp"
#include "dpgrpo/synthesis.hpp"

namespace {

using namespace dpgrpo;

Policy trained_like_policy(PolicyKind kind) {
    Policy p = kind == PolicyKind::tabular ? Policy::tabular(Vocab::micro(), 2) : Policy::feature(Vocab::micro());
    Rng rng(11);
    for (double& w : p.params()) w = 0.5 * (2.0 * rng.uniform() - 1.0);
    return p;
}

std::vector<TokenId> prompt_of(const Vocab& vocab) {
    return encode_solve_prompt(vocab, "image shows 7 + 5", "what is 7 + 5 ?");
}

void BM_TokenLogprobs(benchmark::State& state) {
    const Policy p = trained_like_policy(static_cast<PolicyKind>(state.range(0)));
    std::vector<TokenId> ctx = prompt_of(p.vocab());
    for (auto _ : state) {
        benchmark::DoNotOptimize(p.token_logprobs({ctx, ctx.size()}));
    }
}
BENCHMARK(BM_TokenLogprobs)->Arg(static_cast<int>(PolicyKind::tabular))->Arg(static_cast<int>(PolicyKind::feature));

void BM_SampleCompletion(benchmark::State& state) {
    const Policy p = trained_like_policy(PolicyKind::feature);
    std::vector<TokenId> prompt = prompt_of(p.vocab());
    Rng rng(3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(sample_completion(p, prompt, 1.0, 64, rng));
    }
}
BENCHMARK(BM_SampleCompletion);

void BM_GrpoLoss(benchmark::State& state) {
    const Policy p = trained_like_policy(PolicyKind::feature);
    Query q{"micro-7add5", TaskKind::solve, prompt_of(p.vocab()), "12"};
    GrpoConfig cfg;
    cfg.max_len = 32;
    std::vector<GroupRollout> groups;
    for (std::size_t i = 0; i < 4; ++i) groups.push_back(rollout_group(p, q, cfg, i));
    for (auto _ : state) {
        benchmark::DoNotOptimize(grpo_loss(p, p, p, groups, cfg));
    }
}
BENCHMARK(BM_GrpoLoss)->Unit(benchmark::kMillisecond);

void BM_TotalReward(benchmark::State& state) {
    const std::string text = "<think>split 5 = 3 + 2 ; 7 + 3 = 10 ; 10 + 2 = 12</think> Answer: 12";
    for (auto _ : state) {
        benchmark::DoNotOptimize(total_reward(TaskKind::solve, text, "12"));
    }
}
BENCHMARK(BM_TotalReward);

void BM_DivPair(benchmark::State& state) {
    const MicroTask task{7, MicroOp::add, 5};
    ResponseSet set{"p", {}};
    for (int i = 0; i < state.range(0); ++i) {
        set.responses.push_back(i % 2 ? task.route_a_with(i) : task.route_b_with(i));
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(div_pair(set));
    }
}
BENCHMARK(BM_DivPair)->Arg(3)->Arg(5)->Arg(10);

}  // namespace

BENCHMARK_MAIN();
