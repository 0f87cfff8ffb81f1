#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dlsim/calibration.hpp"
#include "dlsim/cost_model.hpp"
#include "dlsim/dataset.hpp"
#include "dlsim/predictor.hpp"

namespace dlsim {

enum class StrategyKind { MaxLength, StaticDoubling, MeanDoubling, PredictThenDiffuse, Oracle };

// Canvas-sizing strategy under simulation. `initial` carries the static
// start length; mean-doubling reads its start from the context.
struct Strategy {
    StrategyKind kind = StrategyKind::MaxLength;
    int64_t initial = 0;

    static Strategy max_length() { return {StrategyKind::MaxLength, 0}; }
    static Strategy static_doubling(int64_t initial) { return {StrategyKind::StaticDoubling, initial}; }
    static Strategy mean_doubling() { return {StrategyKind::MeanDoubling, 0}; }
    static Strategy predict_then_diffuse() { return {StrategyKind::PredictThenDiffuse, 0}; }
    static Strategy oracle() { return {StrategyKind::Oracle, 0}; }
};

std::string strategy_name(const Strategy& strategy);
Strategy parse_strategy(const std::string& token, int64_t static_initial);

// Shared inputs for a simulation run. `train_mean` feeds mean-doubling;
// model + delta feed predict-then-diffuse. `include_prompt` adds the
// prompt token count to every attempt's costed sequence length.
struct SimContext {
    const GbdtModel* model = nullptr;
    int64_t delta = 0;
    int64_t train_mean = 0;
    bool include_prompt = false;
};

// Ordered attempt log for one record. attempted_lengths is strictly
// increasing; truncated means even L_max could not contain the response.
struct AttemptTrace {
    std::string record_id;
    std::vector<int64_t> attempted_lengths;
    std::vector<int128> attempt_flops;
    int fallback_count = 0;
    bool truncated = false;
    int64_t final_length = 0;
    int64_t true_length = 0;
    std::optional<int> component;
};

// First canvas per strategy: L_max, the static initial, the rounded train
// mean, effective_length(prediction, delta, L_max), or k itself.
int64_t plan_initial(const Strategy& strategy, const PromptRecord& record,
                     const SimContext& context, const ModelConfig& config);

// Deterministic attempt loop: an attempt at L succeeds iff L >= k.
// Doubling strategies retry at min(2L, L_max); predict-then-diffuse
// retries exactly once at L_max; a failure at L_max truncates.
AttemptTrace simulate_sample(const Strategy& strategy, const PromptRecord& record,
                             const ModelConfig& config, const SimContext& context);

int128 sample_cost(const AttemptTrace& trace);

void write_traces_jsonl(const std::string& path, const std::vector<AttemptTrace>& traces);
std::vector<AttemptTrace> load_traces_jsonl(const std::string& path);

} // namespace dlsim
