#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dlsim/dataset.hpp"

namespace dlsim {

enum class Variant { TextOnly, Engineered };

Variant parse_variant(const std::string& name);
std::string variant_name(Variant variant);

std::vector<std::string> default_keywords();

struct FeatureConfig {
    int hash_buckets = 4096;
    std::vector<std::string> keywords = default_keywords();
    std::string hash_algo = "fnv1a64";
};

struct FeatureVector {
    std::vector<double> values;
};

// Hashed lowercased unigram/bigram counts plus prompt char and token
// counts; the engineered variant appends keyword indicators, punctuation
// counts and character-level Shannon entropy.
FeatureVector featurize(std::string_view prompt, Variant variant, const FeatureConfig& config);
std::vector<std::string> feature_names(Variant variant, const FeatureConfig& config);
size_t feature_count(Variant variant, const FeatureConfig& config);

// Binary regression tree, root at index 0. Internal nodes route
// value <= threshold to the left child.
struct TreeNode {
    int feature = -1;
    double threshold = 0;
    int left = -1;
    int right = -1;
    double value = 0;
    bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
    std::vector<TreeNode> nodes;
    double predict(const std::vector<double>& features) const;
};

// Bookkeeping for how the training file was split, written into the model
// so calibration can reproduce the held-out slice.
struct SplitProvenance {
    uint64_t seed = 0;
    double train_ratio = 0.8;
    double calib_fraction = 0.1;
};

struct GbdtModel {
    Variant variant = Variant::TextOnly;
    FeatureConfig feature_config;
    double base_score = 0;
    double learning_rate = 0.1;
    std::vector<RegressionTree> trees;
    SplitProvenance split;
};

struct TrainConfig {
    int rounds = 200;
    int max_depth = 6;
    double learning_rate = 0.1;
    int min_samples_leaf = 20;
    int hash_buckets = 4096;
    uint64_t seed = 0;
    std::vector<std::string> keywords = default_keywords();

    void validate() const;
};

struct TrainDiagnostics {
    std::vector<double> rmse_per_round; // training RMSE after each round
};

struct RegressionMetrics {
    double rmse = 0;
    double mae = 0;
    double pct_within_10 = 0;
};

// Column-major feature matrix for the tree trainer.
struct FeatureMatrix {
    size_t rows = 0;
    std::vector<std::vector<double>> columns;
};

// Least-squares gradient boosting: base score is the target mean, then
// each round fits one tree to the residuals with exact greedy splits
// (candidate thresholds at midpoints of consecutive distinct values,
// ties broken toward the lowest feature index, then lowest threshold).
GbdtModel train_on_matrix(const FeatureMatrix& features, const std::vector<double>& targets,
                          const TrainConfig& config, TrainDiagnostics* diagnostics = nullptr);

GbdtModel train(const std::vector<PromptRecord>& records, Variant variant,
                const TrainConfig& config, TrainDiagnostics* diagnostics = nullptr);

double predict_raw(const GbdtModel& model, const FeatureVector& features);

// max(1, round-half-away-from-zero) of the raw ensemble output.
int64_t predict_length(const GbdtModel& model, std::string_view prompt);

RegressionMetrics evaluate(const GbdtModel& model, const std::vector<PromptRecord>& records);

void save_model(const GbdtModel& model, const std::string& path);
GbdtModel load_model(const std::string& path);
std::string model_to_json(const GbdtModel& model);
GbdtModel model_from_json(const std::string& text);

} // namespace dlsim
