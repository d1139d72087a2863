#include "dpgrpo/diversity.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "dpgrpo/errors.hpp"
#include "dpgrpo/rng.hpp"

namespace dpgrpo {

void validate(const DistanceConfig& cfg) {
    if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0)) {
        throw ValidationError("dissimilarity threshold must lie in (0, 1)");
    }
    if (cfg.kind == DistanceKind::external && !cfg.external) {
        throw ValidationError("external distance selected without a similarity function");
    }
}

std::vector<std::string> diversity_tokens(std::string_view text) {
    std::string s;
    s.reserve(text.size());
    for (char c : text) s.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    for (std::string_view marker : {std::string_view("</think>"), std::string_view("<think>"),
                                    std::string_view("answer:")}) {
        for (std::size_t at = s.find(marker); at != std::string::npos; at = s.find(marker, at)) {
            s.replace(at, marker.size(), " ");
        }
    }
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const unsigned char c = static_cast<unsigned char>(s[i]);
        if (std::isspace(c)) {
            ++i;
        } else if (std::isalnum(c)) {
            std::size_t j = i;
            while (j < s.size() && std::isalnum(static_cast<unsigned char>(s[j]))) ++j;
            out.emplace_back(s.substr(i, j - i));
            i = j;
        } else {
            out.emplace_back(1, s[i]);
            ++i;
        }
    }
    return out;
}

double token_overlap_similarity(std::string_view a, std::string_view b) {
    std::map<std::string, std::pair<int, int>> counts;
    for (auto& t : diversity_tokens(a)) ++counts[t].first;
    for (auto& t : diversity_tokens(b)) ++counts[t].second;
    long inter = 0;
    long uni = 0;
    for (const auto& [tok, c] : counts) {
        inter += std::min(c.first, c.second);
        uni += std::max(c.first, c.second);
    }
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

int d_sem(std::string_view a, std::string_view b, const DistanceConfig& cfg) {
    validate(cfg);
    if (a.empty() || b.empty()) throw ValidationError("d_sem needs two non-empty texts");
    const double sim = cfg.kind == DistanceKind::token_overlap ? token_overlap_similarity(a, b)
                                                               : cfg.external(a, b);
    return sim < cfg.threshold ? 1 : 0;
}

double div_pair(const ResponseSet& set, const DistanceConfig& cfg) {
    const std::size_t k = set.responses.size();
    if (k < 2) throw ValidationError("diversity needs at least 2 responses for prompt " + set.prompt_id);
    long dissimilar = 0;
    for (std::size_t j = 0; j < k; ++j) {
        for (std::size_t l = j + 1; l < k; ++l) dissimilar += d_sem(set.responses[j], set.responses[l], cfg);
    }
    const double pairs = static_cast<double>(k * (k - 1) / 2);
    return static_cast<double>(dissimilar) / pairs;
}

double benchmark_diversity(std::span<const ResponseSet> sets, const DistanceConfig& cfg) {
    if (sets.empty()) throw ValidationError("benchmark diversity over an empty prompt list");
    double total = 0.0;
    for (const ResponseSet& s : sets) total += div_pair(s, cfg);
    return total / static_cast<double>(sets.size());
}

DiversityReport generate_and_score(const Policy& policy, std::span<const PromptTokens> prompts,
                                   std::span<const std::size_t> k_values, double temperature,
                                   std::size_t max_len, const DistanceConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    if (prompts.empty()) throw ValidationError("no prompts to score");
    DiversityReport report;
    report.temperature = temperature;
    for (std::size_t k : k_values) {
        if (k < 2) throw ValidationError("diversity K must be >= 2");
        DiversityAtK row;
        row.k = k;
        std::vector<ResponseSet> sets;
        for (const PromptTokens& p : prompts) {
            ResponseSet set{p.id, {}};
            for (std::size_t j = 0; j < k; ++j) {
                Rng rng(derive_seed(seed, {k, fnv1a(p.id), j}));
                TokenSequence seq = sample_completion(policy, p.tokens, temperature, max_len, rng);
                std::string text = policy.vocab().decode(seq.completion());
                // An immediate EOS decodes to nothing; keep it distinguishable.
                set.responses.push_back(text.empty() ? std::string("<empty>") : std::move(text));
            }
            row.per_prompt.emplace_back(p.id, div_pair(set, cfg));
            sets.push_back(std::move(set));
        }
        row.mean = benchmark_diversity(sets, cfg);
        report.by_k.push_back(std::move(row));
    }
    return report;
}

nlohmann::ordered_json to_json(const DiversityReport& report, const DistanceConfig& cfg) {
    nlohmann::ordered_json j;
    j["distance"] = {{"kind", cfg.kind == DistanceKind::token_overlap ? "token-overlap" : "external"},
                     {"threshold", cfg.threshold}};
    j["temperature"] = report.temperature;
    auto& rows = j["by_k"] = nlohmann::ordered_json::array();
    for (const DiversityAtK& r : report.by_k) {
        nlohmann::ordered_json row;
        row["k"] = r.k;
        row["pairs"] = r.k * (r.k - 1) / 2;
        row["mean"] = r.mean;
        auto& per = row["per_prompt"] = nlohmann::ordered_json::array();
        for (const auto& [id, score] : r.per_prompt) per.push_back({{"prompt_id", id}, {"div_pair", score}});
        rows.push_back(std::move(row));
    }
    return j;
}

}  // namespace dpgrpo
