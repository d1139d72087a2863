#include "dpgrpo/synthesis.hpp"

#include <regex>
#include <unordered_set>

#include "dpgrpo/errors.hpp"

namespace dpgrpo {

namespace {

constexpr std::array<std::string_view, 4> kBlockTags{"SOLUTION_CORRECT_1", "SOLUTION_CORRECT_2",
                                                     "SOLUTION_INCORRECT_1", "SOLUTION_INCORRECT_2"};

std::string trim_copy(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::size_t count_of(std::string_view hay, std::string_view needle) {
    std::size_t n = 0;
    for (std::size_t at = hay.find(needle); at != std::string_view::npos;
         at = hay.find(needle, at + needle.size())) {
        ++n;
    }
    return n;
}

Solution parse_block(std::string_view raw, std::string_view tag) {
    const std::string open_prefix = "[" + std::string(tag);
    const std::string close = "[/" + std::string(tag) + "]";
    // "[SOLUTION_CORRECT_1" is a prefix of "[SOLUTION_CORRECT_1X"; only the
    // exact tag or tag followed by a space counts.
    std::size_t opens = 0;
    std::size_t open_at = std::string_view::npos;
    for (std::size_t at = raw.find(open_prefix); at != std::string_view::npos;
         at = raw.find(open_prefix, at + 1)) {
        const char next = at + open_prefix.size() < raw.size() ? raw[at + open_prefix.size()] : '\0';
        if (next == ']' || next == ' ') {
            ++opens;
            open_at = at;
        }
    }
    if (opens != 1 || count_of(raw, close) != 1) {
        throw ValidationError("generator output must contain tag " + std::string(tag) +
                              " exactly once (found " + std::to_string(opens) + ")");
    }
    const std::size_t header_end = raw.find(']', open_at);
    const std::size_t close_at = raw.find(close);
    if (header_end == std::string_view::npos || close_at < header_end) {
        throw ValidationError("tag " + std::string(tag) + " is not closed after it opens");
    }
    Solution s;
    std::string_view header = raw.substr(open_at + open_prefix.size(), header_end - open_at - open_prefix.size());
    static const std::regex perspective_re(R"(^\s*perspective=([A-Za-z0-9_-]+)\s*$)");
    std::match_results<std::string_view::const_iterator> m;
    if (!header.empty()) {
        if (!std::regex_match(header.begin(), header.end(), m, perspective_re)) {
            throw ValidationError("bad attributes on tag " + std::string(tag));
        }
        s.perspective_tag = m[1].str();
    }
    s.text = trim_copy(raw.substr(header_end + 1, close_at - header_end - 1));
    s.correct = tag.find("INCORRECT") == std::string_view::npos;
    return s;
}

std::string section(std::string_view prompt, std::string_view header) {
    const std::size_t at = prompt.find(header);
    if (at == std::string_view::npos) return {};
    const std::size_t body = at + header.size();
    const std::size_t next = prompt.find("\n###", body);
    return trim_copy(prompt.substr(body, next == std::string_view::npos ? std::string_view::npos : next - body));
}

}  // namespace

SolutionSet parse_generator_output(std::string_view raw, std::string seed_id) {
    SolutionSet set;
    set.seed_id = std::move(seed_id);
    set.correct[0] = parse_block(raw, kBlockTags[0]);
    set.correct[1] = parse_block(raw, kBlockTags[1]);
    set.incorrect[0] = parse_block(raw, kBlockTags[2]);
    set.incorrect[1] = parse_block(raw, kBlockTags[3]);
    return set;
}

char op_symbol(MicroOp op) {
    switch (op) {
        case MicroOp::add: return '+';
        case MicroOp::sub: return '-';
        case MicroOp::mul: return '*';
    }
    return '+';
}

namespace {

int apply(MicroOp op, int a, int b) {
    switch (op) {
        case MicroOp::add: return a + b;
        case MicroOp::sub: return a - b;
        case MicroOp::mul: return a * b;
    }
    return 0;
}

std::string step(int a, char op, int b, int result) {
    return std::to_string(a) + " " + op + " " + std::to_string(b) + " = " + std::to_string(result);
}

}  // namespace

int MicroTask::gold() const { return apply(op, lhs, rhs); }

std::string MicroTask::expression() const {
    return std::to_string(lhs) + " " + op_symbol(op) + " " + std::to_string(rhs);
}

std::string MicroTask::route_a_with(int delta) const {
    return "direct " + step(lhs, op_symbol(op), rhs, gold() + delta);
}

std::string MicroTask::route_b_with(int delta) const {
    const int hi = (rhs + 1) / 2;
    const int lo = rhs - hi;
    std::string out = "split " + std::to_string(rhs) + " = " + std::to_string(hi) + " + " + std::to_string(lo);
    const char sym = op_symbol(op);
    if (op == MicroOp::mul) {
        const int p1 = lhs * hi;
        const int p2 = lhs * lo;
        out += " ; " + step(lhs, sym, hi, p1);
        out += " ; " + step(lhs, sym, lo, p2);
        out += " ; " + step(p1, '+', p2, p1 + p2 + delta);
    } else {
        const int mid = apply(op, lhs, hi);
        out += " ; " + step(lhs, sym, hi, mid);
        out += " ; " + step(mid, sym, lo, apply(op, mid, lo) + delta);
    }
    return out;
}

std::string MicroTask::route_a() const { return route_a_with(0); }
std::string MicroTask::route_b() const { return route_b_with(0); }

SeedSample MicroTask::to_seed() const {
    static constexpr std::array<const char*, 3> names{"add", "sub", "mul"};
    SeedSample s;
    s.id = "micro-" + std::to_string(lhs) + names[static_cast<int>(op)] + std::to_string(rhs);
    s.image_caption = "image shows " + expression();
    s.question = "what is " + expression() + " ?";
    s.original_solution = solution_text(route_a(), gold());
    s.gold_answer = std::to_string(gold());
    return s;
}

std::optional<MicroTask> parse_micro_task(std::string_view text) {
    static const std::regex re(R"((\d+)\s*([-+*])\s*(\d+))");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(text.begin(), text.end(), m, re)) return std::nullopt;
    MicroTask t;
    t.lhs = std::stoi(m[1].str());
    t.rhs = std::stoi(m[3].str());
    const char sym = m[2].str()[0];
    t.op = sym == '+' ? MicroOp::add : sym == '-' ? MicroOp::sub : MicroOp::mul;
    return t;
}

std::string solution_text(std::string_view rationale, int value) {
    return std::string(rationale) + "\nAnswer: " + std::to_string(value);
}

namespace {

std::vector<MicroTask> micro_pool() {
    std::vector<MicroTask> pool;
    for (MicroOp op : {MicroOp::add, MicroOp::sub, MicroOp::mul}) {
        for (int a = 2; a <= 19; ++a) {
            for (int b = 2; b <= 9; ++b) {
                if (op == MicroOp::sub && a <= b) continue;
                pool.push_back({a, op, b});
            }
        }
    }
    return pool;
}

}  // namespace

std::size_t micro_task_pool_size() { return micro_pool().size(); }

std::vector<SeedSample> make_micro_corpus(std::size_t n, Rng& rng) {
    std::vector<MicroTask> pool = micro_pool();
    if (n > pool.size()) {
        throw ValidationError("micro corpus holds at most " + std::to_string(pool.size()) + " tasks");
    }
    rng.shuffle(std::span<MicroTask>(pool));
    std::vector<SeedSample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(pool[i].to_seed());
    return out;
}

std::string MockGenerator::generate(const GeneratorRequest& request) {
    auto task = parse_micro_task(section(request.prompt, kQuestionHeader));
    if (!task) throw GeneratorUnavailable("mock generator only understands micro arithmetic tasks");
    const int g = task->gold();
    std::string out = "Here are the requested solutions.\n\n";
    out += "[SOLUTION_CORRECT_1 perspective=direct]\n" + solution_text(task->route_a(), g) +
           "\n[/SOLUTION_CORRECT_1]\n\n";
    out += "[SOLUTION_CORRECT_2 perspective=split]\n" + solution_text(task->route_b(), g) +
           "\n[/SOLUTION_CORRECT_2]\n\n";
    out += "[SOLUTION_INCORRECT_1 perspective=direct]\n" + solution_text(task->route_a_with(+1), g + 1) +
           "\n[/SOLUTION_INCORRECT_1]\n\n";
    out += "[SOLUTION_INCORRECT_2 perspective=split]\n" + solution_text(task->route_b_with(-1), g - 1) +
           "\n[/SOLUTION_INCORRECT_2]\n";
    return out;
}

SolutionSet generate_solutions(SolutionGenerator& generator, const GeneratorRequest& request,
                               const SeedSample& seed, std::size_t max_retries) {
    if (request.prompt.empty()) throw ValidationError("generator request has an empty prompt");
    std::string last_error;
    GeneratorRequest req = request;
    for (std::size_t attempt = 0; attempt <= max_retries; ++attempt) {
        req.attempt = attempt;
        const std::string raw = generator.generate(req);
        try {
            SolutionSet set = parse_generator_output(raw, seed.id);
            validate(set, seed);
            return set;
        } catch (const ValidationError& e) {
            last_error = e.what();
        }
    }
    throw ValidationError("seed " + seed.id + ": validation failed after " +
                          std::to_string(max_retries + 1) + " attempts: " + last_error);
}

SynthesisResult synthesize_corpus(std::span<const SeedSample> seeds, SolutionGenerator& generator,
                                  const SynthesisOptions& options) {
    std::unordered_set<std::string> ids;
    for (const SeedSample& s : seeds) {
        validate(s);
        if (!ids.insert(s.id).second) throw ValidationError("duplicate seed id " + s.id);
    }
    SynthesisResult out;
    out.manifest.source_corpus = options.source_corpus;
    out.manifest.generator_id = generator.id();
    out.manifest.rng_seed = options.rng_seed;
    for (const SeedSample& seed : seeds) {
        GeneratorRequest req{seed.id, render_prompt(seed), options.decode_budget, 0};
        SolutionSet set;
        try {
            set = generate_solutions(generator, req, seed, options.max_retries);
        } catch (const ValidationError&) {
            out.manifest.skipped.push_back(seed.id);
            continue;
        } catch (const GeneratorUnavailable&) {
            out.manifest.skipped.push_back(seed.id);
            continue;
        }
        Rng rng(derive_seed(options.rng_seed, {fnv1a(seed.id)}));
        for (ThinkSample& t : build_think_set(seed, set)) out.think.push_back(std::move(t));
        out.discrimination.push_back(build_discrimination_sample(seed, set, rng));
        out.preference.push_back(build_preference_sample(seed, set, rng));
        out.solution_sets.push_back(std::move(set));
    }
    out.manifest.n_seeds = seeds.size();
    out.manifest.n_think = out.think.size();
    out.manifest.n_disc = out.discrimination.size();
    out.manifest.n_pref = out.preference.size();
    if (!seeds.empty()) {
        const double skip = static_cast<double>(out.manifest.skipped.size()) / static_cast<double>(seeds.size());
        if (skip > options.max_skip_fraction) {
            throw ValidationError(std::to_string(out.manifest.skipped.size()) + " of " +
                                  std::to_string(seeds.size()) + " seeds skipped, above the limit");
        }
    }
    return out;
}

}  // namespace dpgrpo
