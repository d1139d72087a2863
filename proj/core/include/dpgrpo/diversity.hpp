#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dpgrpo/policy.hpp"

namespace dpgrpo {

struct ResponseSet {
    std::string prompt_id;
    std::vector<std::string> responses;
};

enum class DistanceKind { token_overlap, external };

// Similarity in [0, 1] supplied by an embedding client or similar.
using SimilarityFn = std::function<double(std::string_view, std::string_view)>;

struct DistanceConfig {
    DistanceKind kind = DistanceKind::token_overlap;
    double threshold = 0.5;  // dissimilar iff similarity < threshold
    SimilarityFn external;   // required when kind == external
};

void validate(const DistanceConfig& cfg);

// Lowercased tokens with think delimiters and the answer marker removed.
// Tokens are runs of letters and digits; any other non-space character is a
// token of its own.
std::vector<std::string> diversity_tokens(std::string_view text);

// Multiset Jaccard: sum of min counts over sum of max counts. Two empty
// token lists are identical (1.0).
double token_overlap_similarity(std::string_view a, std::string_view b);

// Binary semantic distance: 1 when dissimilar. Both texts must be non-empty.
int d_sem(std::string_view a, std::string_view b, const DistanceConfig& cfg = {});

// Mean of d_sem over all C(K,2) unordered pairs. Needs K >= 2.
double div_pair(const ResponseSet& set, const DistanceConfig& cfg = {});

// Unweighted mean of div_pair over prompts. Needs at least one set.
double benchmark_diversity(std::span<const ResponseSet> sets, const DistanceConfig& cfg = {});

struct DiversityAtK {
    std::size_t k = 0;
    std::vector<std::pair<std::string, double>> per_prompt;
    double mean = 0.0;
};

struct DiversityReport {
    double temperature = 1.0;
    std::vector<DiversityAtK> by_k;
};

inline const std::vector<std::size_t> kDefaultDiversityK{3, 5, 10};

// Samples K completions per prompt for every K in k_values and scores them.
// The stream for sample j of prompt p at a given K is derived from
// (seed, K, prompt id, j).
DiversityReport generate_and_score(const Policy& policy, std::span<const PromptTokens> prompts,
                                   std::span<const std::size_t> k_values, double temperature,
                                   std::size_t max_len, const DistanceConfig& cfg, std::uint64_t seed);

nlohmann::ordered_json to_json(const DiversityReport& report, const DistanceConfig& cfg);

}  // namespace dpgrpo
