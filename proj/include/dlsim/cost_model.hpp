#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dlsim/int128.hpp"

namespace dlsim {

// Shape parameters of the diffusion LLM whose inference cost is modeled.
struct ModelConfig {
    int64_t num_blocks = 32;         // N
    int64_t hidden_dim = 4096;       // D
    int64_t mlp_width = 12288;       // F
    int64_t diffusion_steps = 128;   // T
    int64_t max_response_len = 4096; // L_max

    void validate() const;

    // Reference 8B-scale shape used as the CLI default.
    static ModelConfig llada_8b() { return {}; }
};

// Per-block forward-pass cost, split into the three accounted components.
struct CostBreakdown {
    int128 mlp_flop = 0;
    int128 proj_flop = 0;
    int128 attn_flop = 0;
    int128 total_flop = 0;
};

// Floor of alpha/beta with the division remainder kept so boundary
// comparisons can be exact.
struct Crossover {
    int64_t length = 0;
    int64_t remainder = 0;
};

struct QuadraticFit {
    double linear_coeff = 0;
    double quadratic_coeff = 0;
    double intercept = 0;
    double r_squared = 0;
};

struct CurvePoint {
    double seq_len = 0;
    double flop = 0;
};

// Per-block cost at a given sequence length: mlp 6*L*D*F, projections
// 8*L*D^2, attention 4*D*L^2. The sum equals D*(alpha*L + beta*L^2) with
// alpha = 6F + 8D, beta = 4.
CostBreakdown per_block_flop(const ModelConfig& config, int64_t seq_len);

// Whole-inference cost: diffusion_steps * num_blocks * per-block total.
int128 total_inference_flop(const ModelConfig& config, int64_t seq_len);

// Sequence length beyond which the quadratic attention term exceeds the
// linear terms: floor((6F + 8D) / 4), remainder reported.
Crossover crossover_length(const ModelConfig& config);

// Ordinary least squares of flop = a*L + b*L^2 + c on the monomial basis,
// solved via normal equations after centering L. Requires >= 3 distinct
// sequence lengths.
QuadraticFit fit_quadratic(const std::vector<CurvePoint>& points);

// Two-column CSV with header "seq_len,flop"; big integers accepted.
std::vector<CurvePoint> load_curve_csv(const std::string& path);

// Emits an exact cost curve for the given config, one row per length.
void write_curve_csv(const std::string& path, const ModelConfig& config,
                     const std::vector<int64_t>& seq_lens);

} // namespace dlsim
