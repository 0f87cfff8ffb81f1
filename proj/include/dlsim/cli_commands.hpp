#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dlsim/harness.hpp"

namespace dlsim {

inline constexpr const char* kToolVersion = "0.1.0";
inline constexpr uint64_t kDefaultSeed = 12345;

struct IngestOpts {
    std::string input;
    std::string output;
    std::string tokenizer = "default"; // default | precomputed
};

struct TrainOpts {
    std::string data;
    std::string model_out;
    std::string variant = "text-only";
    TrainConfig config;
    double train_ratio = 0.8;
    double calib_fraction = 0.1;
};

struct CalibrateOpts {
    std::string model;
    std::string data;
    double p_safe = 0.95;
    std::string margin_out; // defaults to <model>.margin.json
};

struct BenchOpts {
    std::string data;
    std::string report_out;
    std::optional<std::string> model;
    std::optional<std::string> margin;
    ModelConfig model_config = ModelConfig::llada_8b();
    std::vector<std::string> strategies = {"max", "static", "mean", "predict", "oracle"};
    int64_t static_initial = 200;
    bool include_prompt = false;
    bool eval_all = false; // simulate the whole file instead of the test split
    int jobs = 1;
    uint64_t seed = kDefaultSeed;
    std::optional<int64_t> mean_override;
    std::optional<std::string> csv_out;
    std::optional<std::string> traces_dir;
    std::optional<std::string> cost_curve_out;
};

struct GenOpts {
    std::string output;
    size_t size = 0;
    uint64_t seed = kDefaultSeed;
    bool skewed_preset = false;
    bool bimodal_preset = false;
    std::vector<std::string> components; // weight:family:mean:spread
};

struct FitOpts {
    std::string csv;
};

struct PredictOpts {
    std::string model;
    std::string input;           // jsonl path or "-" for stdin
    std::string output = "-";    // csv path or "-" for stdout
};

// Commands throw std::exception subclasses on failure; the binary maps
// that to exit code 1. Every file-producing command writes a manifest
// sidecar (<output>.manifest.json) capturing resolved flags, input
// digests, seed and tool version.
void cmd_ingest(const IngestOpts& opts);
void cmd_train(const TrainOpts& opts);
void cmd_calibrate(const CalibrateOpts& opts);
void cmd_bench(const BenchOpts& opts);
void cmd_gen(const GenOpts& opts);
void cmd_fit(const FitOpts& opts);
void cmd_predict(const PredictOpts& opts);

std::string file_digest(const std::string& path); // fnv1a64 over bytes, hex
std::string default_margin_path(const std::string& model_path);

// Default model-config file pointed at by the DLSIM_CONFIG env var: a JSON
// object with any of blocks/hidden/mlp/steps/lmax. CLI flags still win.
ModelConfig load_model_config_file(const std::string& path, const ModelConfig& base);

} // namespace dlsim
