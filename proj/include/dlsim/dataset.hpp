#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dlsim {

// One prompt with its ground-truth response length in tokens.
struct PromptRecord {
    std::string id;
    std::string prompt_text;
    std::optional<std::string> response_text;
    int64_t response_length = 0;
    std::optional<int> component; // mixture component for synthetic data
};

struct DatasetStats {
    size_t count = 0;
    double mean = 0;
    double std_dev = 0;
    int64_t median = 0;
    double excess_kurtosis = 0;
    bool kurtosis_defined = false;
    int64_t min = 0;
    int64_t max = 0;
};

enum class Family { Constant, Normal, LogNormal };

struct MixtureComponent {
    double weight = 1.0;
    double mean = 0;   // target mean length in tokens
    double spread = 0; // stddev for normal, target stddev for lognormal
    Family family = Family::Constant;
};

struct MixtureSpec {
    std::vector<MixtureComponent> components;
    uint64_t seed = 0;
    size_t size = 0;

    void validate() const;

    // Heavy-tail single lognormal targeting mean 96 / std 120.
    static MixtureSpec skewed_preset(size_t size, uint64_t seed);
    // 60% short (mean 50) / 40% long (mean 3000) normals.
    static MixtureSpec bimodal_preset(size_t size, uint64_t seed);
};

Family parse_family(const std::string& name);
std::string family_name(Family family);

// Deterministic token count: split on Unicode whitespace, then split runs
// of letters/digits from runs of punctuation; count resulting units.
int64_t default_tokenize(std::string_view text);

enum class TokenizerMode { Default, Precomputed };

// One JSON object per line with fields `prompt` (required) and at least
// one of `response` / `response_length`. Errors carry line numbers.
std::vector<PromptRecord> load_jsonl(const std::string& path,
                                     TokenizerMode mode = TokenizerMode::Default);

// Prediction inputs: `prompt` required, response fields ignored.
std::vector<PromptRecord> load_prompts_jsonl(const std::string& path);

void write_jsonl(const std::string& path, const std::vector<PromptRecord>& records);

// Seeded shuffle then split; |train| = round(ratio * n) clamped so both
// sides stay non-empty.
std::pair<std::vector<PromptRecord>, std::vector<PromptRecord>>
split_train_test(const std::vector<PromptRecord>& records, double ratio, uint64_t seed);

// Sample mean/std (n-1 denominator), lower median, Fisher excess kurtosis
// from central moments. Requires n >= 2.
DatasetStats compute_stats(const std::vector<PromptRecord>& records);
DatasetStats compute_stats(const std::vector<int64_t>& lengths);

// Synthesizes `size` records. Lengths are sampled per component and
// clamped to >= 1. Prompts deterministically encode length cues: a
// component keyword, a noisy "write about N items" header, and exactly k
// filler words so token count carries the signal the predictor learns.
std::vector<PromptRecord> gen_synthetic(const MixtureSpec& spec);

double mean_length(const std::vector<PromptRecord>& records);

} // namespace dlsim
