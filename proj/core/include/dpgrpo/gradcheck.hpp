#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace dpgrpo {

enum class GradObjective { sft, kl, grpo };

std::string to_string(GradObjective obj);

inline constexpr GradObjective kAllGradObjectives[] = {GradObjective::sft, GradObjective::kl,
                                                       GradObjective::grpo};

// max_i |a_i - b_i| / max(max_i |a_i|, max_i |b_i|); 0 when both are zero.
double relative_error(std::span<const double> analytic, std::span<const double> numeric);

// Applied to the analytic gradient before comparison. Test fixtures use it
// to plant a bug.
using GradTamper = std::function<void(std::vector<double>& grad)>;

struct GradcheckResult {
    GradObjective objective = GradObjective::sft;
    std::vector<double> errors;  // one per instance
    double max_error = 0.0;
};

// Central differences (step h) against the analytic gradient on randomized
// order-1 tabular instances over the micro vocabulary. GRPO instances whose
// ratios land within 1e-4 of a clip edge are redrawn.
GradcheckResult gradcheck(GradObjective objective, std::size_t instances, std::uint64_t seed,
                          double h = 1e-5, const GradTamper& tamper = {});

}  // namespace dpgrpo
