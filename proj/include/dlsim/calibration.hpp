#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dlsim/dataset.hpp"
#include "dlsim/predictor.hpp"

namespace dlsim {

// Calibrated safety margin added to every length prediction.
struct SafetyMargin {
    int64_t delta = 0;
    double p_safe = 0.95;
    size_t residual_count = 0;
    std::string source_split = "calibration";
};

// Under-prediction gaps {k - L_hat | k > L_hat}; over-predictions and
// exact hits are excluded.
std::vector<int64_t> positive_residuals(const GbdtModel& model,
                                        const std::vector<PromptRecord>& records);

// Nearest-rank-upper quantile: sorted ascending, 1-based index
// ceil(p_safe * n). Empty residual set yields 0. No interpolation, so the
// coverage bound #(residual > delta) <= (1 - p_safe) * n is exact.
int64_t compute_delta(std::vector<int64_t> residuals, double p_safe);

// Effective canvas length min(predicted + delta, l_max).
int64_t effective_length(int64_t predicted, int64_t delta, int64_t l_max);

void save_margin(const SafetyMargin& margin, const std::string& path);
SafetyMargin load_margin(const std::string& path);

} // namespace dlsim
