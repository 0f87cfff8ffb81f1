#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dlsim/strategies.hpp"

namespace dlsim {

struct StrategyResult {
    std::string name;
    int128 total_flop = 0;
    double savings_pct = 0;       // vs the max-length run on the same data
    double fallback_rate_pct = 0; // samples with >= 1 retry
    double truncation_rate_pct = 0;
    double mean_attempts = 0;
    int attempts_p99 = 0;
};

struct BenchFlags {
    bool include_prompt = false;
    int jobs = 1;
    uint64_t seed = 0;
};

struct BenchmarkReport {
    std::vector<StrategyResult> strategies;
    DatasetStats dataset_stats;
    ModelConfig model_config;
    BenchFlags flags;
    std::string timestamp; // excluded from byte-stability comparisons
    size_t samples = 0;
};

// Simulates every (strategy, record) pair with exact integer FLOP sums.
// Requires records non-empty and the max-length strategy present as the
// savings denominator. Aggregation is order-independent.
BenchmarkReport run_benchmark(const std::vector<Strategy>& strategies,
                              const std::vector<PromptRecord>& records,
                              const ModelConfig& config, const SimContext& context,
                              const BenchFlags& flags);

// Per-record simulation on a deterministic worker pool; trace i always
// belongs to record i regardless of scheduling.
std::vector<AttemptTrace> simulate_all(const Strategy& strategy,
                                       const std::vector<PromptRecord>& records,
                                       const ModelConfig& config, const SimContext& context,
                                       int jobs = 1);

StrategyResult aggregate_traces(const std::string& name, const std::vector<AttemptTrace>& traces);

struct LatencyReport {
    size_t count = 0;
    double single_shot_pct = 0;
    int attempts_p99 = 0;
    int attempts_max = 0;
    std::vector<size_t> attempt_histogram; // index = attempts - 1
};

LatencyReport latency_profile(const std::vector<AttemptTrace>& traces);

// Generates the bimodal preset, trains the text-only predictor on its
// train split, calibrates delta, then compares mean-doubling against
// predict-then-diffuse on the test split.
struct BimodalReport {
    size_t dataset_size = 0;
    size_t test_size = 0;
    int64_t delta = 0;
    int64_t train_mean = 0;
    RegressionMetrics predictor_metrics;
    int128 flop_mean_doubling = 0;
    int128 flop_ptd = 0;
    double ptd_advantage_pct = 0; // 100 * (1 - ptd / mean_doubling)
    size_t long_records = 0;
    double long_ge3_attempts_pct = 0; // long-component records needing >= 3 attempts
};

BimodalReport bimodal_experiment(const ModelConfig& config, uint64_t seed, size_t size,
                                 const TrainConfig& train_config, int jobs = 1);

std::string report_to_json(const BenchmarkReport& report);
std::string report_to_csv(const BenchmarkReport& report);
enum class ReportFormat { Json, Csv };
ReportFormat parse_report_format(const std::string& name);
void export_report(const BenchmarkReport& report, ReportFormat format, const std::string& path);
BenchmarkReport report_from_json(const std::string& text);

std::string bimodal_report_to_json(const BimodalReport& report);

} // namespace dlsim
