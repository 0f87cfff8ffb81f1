#include "dlsim/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "dlsim/rng.hpp"
#include "dlsim/text.hpp"

using nlohmann::json;

namespace dlsim {

void MixtureSpec::validate() const {
    if (components.empty()) throw std::invalid_argument("mixture spec: no components");
    if (size < 1) throw std::invalid_argument("mixture spec: size must be >= 1");
    double total = 0;
    for (const auto& c : components) {
        if (c.weight <= 0) throw std::invalid_argument("mixture spec: weights must be positive");
        if (c.mean < 1) throw std::invalid_argument("mixture spec: component mean must be >= 1");
        if (c.spread < 0) throw std::invalid_argument("mixture spec: spread must be >= 0");
        total += c.weight;
    }
    if (std::fabs(total - 1.0) > 1e-9)
        throw std::invalid_argument("mixture spec: weights must sum to 1");
}

MixtureSpec MixtureSpec::skewed_preset(size_t size, uint64_t seed) {
    MixtureSpec spec;
    spec.components = {{1.0, 96.0, 120.0, Family::LogNormal}};
    spec.seed = seed;
    spec.size = size;
    return spec;
}

MixtureSpec MixtureSpec::bimodal_preset(size_t size, uint64_t seed) {
    MixtureSpec spec;
    spec.components = {{0.6, 50.0, 15.0, Family::Normal}, {0.4, 3000.0, 600.0, Family::Normal}};
    spec.seed = seed;
    spec.size = size;
    return spec;
}

Family parse_family(const std::string& name) {
    if (name == "constant") return Family::Constant;
    if (name == "normal") return Family::Normal;
    if (name == "lognormal") return Family::LogNormal;
    throw std::invalid_argument("unknown distribution family: " + name);
}

std::string family_name(Family family) {
    switch (family) {
        case Family::Constant: return "constant";
        case Family::Normal: return "normal";
        case Family::LogNormal: return "lognormal";
    }
    return "?";
}

int64_t default_tokenize(std::string_view text) {
    int64_t count = 0;
    for_each_unit(text, [&](size_t, size_t) { ++count; });
    return count;
}

namespace {

PromptRecord record_from_json(const json& obj, size_t record_no, TokenizerMode mode) {
    const std::string where = "record " + std::to_string(record_no);
    if (!obj.is_object()) throw std::runtime_error(where + ": not a JSON object");
    if (!obj.contains("prompt") || !obj["prompt"].is_string())
        throw std::runtime_error(where + ": missing string field 'prompt'");

    PromptRecord rec;
    rec.prompt_text = obj["prompt"].get<std::string>();
    rec.id = obj.contains("id") && obj["id"].is_string() ? obj["id"].get<std::string>()
                                                         : "rec-" + std::to_string(record_no);
    if (obj.contains("response")) {
        if (!obj["response"].is_string())
            throw std::runtime_error(where + ": 'response' must be a string");
        rec.response_text = obj["response"].get<std::string>();
    }
    if (obj.contains("component") && obj["component"].is_number_integer())
        rec.component = obj["component"].get<int>();

    const bool has_len = obj.contains("response_length");
    if (has_len) {
        if (!obj["response_length"].is_number_integer())
            throw std::runtime_error(where + ": 'response_length' must be an integer");
        rec.response_length = obj["response_length"].get<int64_t>();
        if (rec.response_length < 1)
            throw std::runtime_error(where + ": 'response_length' must be >= 1");
        return rec;
    }
    if (mode == TokenizerMode::Precomputed)
        throw std::runtime_error(where + ": 'response_length' required with precomputed tokenizer");
    if (!rec.response_text)
        throw std::runtime_error(where + ": no response or response_length");
    rec.response_length = default_tokenize(*rec.response_text);
    if (rec.response_length < 1)
        throw std::runtime_error(where + ": response tokenizes to 0 tokens");
    return rec;
}

std::vector<PromptRecord> load_jsonl_impl(const std::string& path, TokenizerMode mode,
                                          bool prompts_only) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open");
    std::vector<PromptRecord> records;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) +
                                     ": malformed JSON: " + e.what());
        }
        try {
            const size_t record_no = records.size() + 1;
            if (prompts_only) {
                const std::string where = "record " + std::to_string(record_no);
                if (!obj.is_object() || !obj.contains("prompt") || !obj["prompt"].is_string())
                    throw std::runtime_error(where + ": missing string field 'prompt'");
                PromptRecord rec;
                rec.prompt_text = obj["prompt"].get<std::string>();
                rec.id = obj.contains("id") && obj["id"].is_string()
                             ? obj["id"].get<std::string>()
                             : "rec-" + std::to_string(record_no);
                records.push_back(std::move(rec));
            } else {
                records.push_back(record_from_json(obj, record_no, mode));
            }
        } catch (const std::runtime_error& e) {
            throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return records;
}

} // namespace

std::vector<PromptRecord> load_jsonl(const std::string& path, TokenizerMode mode) {
    return load_jsonl_impl(path, mode, false);
}

std::vector<PromptRecord> load_prompts_jsonl(const std::string& path) {
    return load_jsonl_impl(path, TokenizerMode::Default, true);
}

void write_jsonl(const std::string& path, const std::vector<PromptRecord>& records) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    for (const auto& rec : records) {
        json obj;
        obj["id"] = rec.id;
        obj["prompt"] = rec.prompt_text;
        if (rec.response_text) obj["response"] = *rec.response_text;
        obj["response_length"] = rec.response_length;
        if (rec.component) obj["component"] = *rec.component;
        out << obj.dump() << "\n";
    }
    if (!out) throw std::runtime_error(path + ": write failed");
}

std::pair<std::vector<PromptRecord>, std::vector<PromptRecord>>
split_train_test(const std::vector<PromptRecord>& records, double ratio, uint64_t seed) {
    if (records.size() < 2) throw std::invalid_argument("split: need at least 2 records");
    if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("split: ratio must be in (0,1)");
    std::vector<size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    rng.shuffle(order);
    const auto n = static_cast<double>(records.size());
    size_t train_count = static_cast<size_t>(std::llround(ratio * n));
    train_count = std::clamp<size_t>(train_count, 1, records.size() - 1);
    std::vector<PromptRecord> train, test;
    train.reserve(train_count);
    test.reserve(records.size() - train_count);
    for (size_t i = 0; i < order.size(); ++i)
        (i < train_count ? train : test).push_back(records[order[i]]);
    return {std::move(train), std::move(test)};
}

DatasetStats compute_stats(const std::vector<int64_t>& lengths) {
    if (lengths.size() < 2) throw std::invalid_argument("stats: need at least 2 records");
    const size_t n = lengths.size();
    DatasetStats stats;
    stats.count = n;

    long double sum = 0;
    for (int64_t v : lengths) sum += v;
    const long double mean = sum / static_cast<long double>(n);
    stats.mean = static_cast<double>(mean);

    long double m2 = 0, m4 = 0, ss = 0;
    for (int64_t v : lengths) {
        const long double d = v - mean;
        const long double d2 = d * d;
        ss += d2;
        m2 += d2;
        m4 += d2 * d2;
    }
    stats.std_dev = static_cast<double>(std::sqrt(static_cast<double>(ss / (n - 1))));
    m2 /= static_cast<long double>(n);
    m4 /= static_cast<long double>(n);
    if (m2 > 0) {
        stats.excess_kurtosis = static_cast<double>(m4 / (m2 * m2) - 3.0L);
        stats.kurtosis_defined = true;
    }

    std::vector<int64_t> sorted(lengths);
    std::sort(sorted.begin(), sorted.end());
    stats.median = sorted[(n - 1) / 2]; // lower median for even n
    stats.min = sorted.front();
    stats.max = sorted.back();
    return stats;
}

DatasetStats compute_stats(const std::vector<PromptRecord>& records) {
    std::vector<int64_t> lengths;
    lengths.reserve(records.size());
    for (const auto& r : records) lengths.push_back(r.response_length);
    return compute_stats(lengths);
}

namespace {

int64_t sample_length(const MixtureComponent& comp, Rng& rng) {
    double value = comp.mean;
    switch (comp.family) {
        case Family::Constant:
            break;
        case Family::Normal:
            value = comp.mean + comp.spread * rng.normal();
            break;
        case Family::LogNormal: {
            // Moment matching: choose (mu, sigma) so the lognormal hits the
            // requested mean and stddev.
            const double ratio = comp.spread / comp.mean;
            const double sigma2 = std::log(1.0 + ratio * ratio);
            const double mu = std::log(comp.mean) - 0.5 * sigma2;
            value = std::exp(mu + std::sqrt(sigma2) * rng.normal());
            break;
        }
    }
    return std::max<int64_t>(1, std::llround(value));
}

constexpr const char* kCues[] = {"briefly", "in detail", "tersely", "thoroughly"};
constexpr const char* kFiller[] = {"alpha", "beta",    "gamma", "delta",
                                   "epsilon", "zeta", "eta",   "theta"};

} // namespace

std::vector<PromptRecord> gen_synthetic(const MixtureSpec& spec) {
    spec.validate();
    Rng rng(spec.seed);
    std::vector<double> cumulative;
    double acc = 0;
    for (const auto& c : spec.components) cumulative.push_back(acc += c.weight);
    cumulative.back() = 1.0;

    std::vector<PromptRecord> records;
    records.reserve(spec.size);
    for (size_t i = 0; i < spec.size; ++i) {
        const double u = rng.uniform01();
        size_t comp_idx = 0;
        while (comp_idx + 1 < cumulative.size() && u >= cumulative[comp_idx]) ++comp_idx;
        const int64_t k = sample_length(spec.components[comp_idx], rng);

        // Noisy magnitude cue; the exact signal is the filler word count.
        const auto noisy =
            std::max<int64_t>(1, std::llround(static_cast<double>(k) * (1.0 + 0.05 * rng.normal())));

        PromptRecord rec;
        rec.id = "syn-" + std::to_string(i + 1);
        rec.component = static_cast<int>(comp_idx);
        rec.response_length = k;
        std::string& prompt = rec.prompt_text;
        prompt.reserve(32 + static_cast<size_t>(k) * 8);
        prompt += kCues[comp_idx % 4];
        prompt += ", write about ";
        prompt += std::to_string(noisy);
        prompt += " items:";
        for (int64_t j = 0; j < k; ++j) {
            prompt += ' ';
            prompt += kFiller[(i + static_cast<size_t>(j)) % 8];
        }
        records.push_back(std::move(rec));
    }
    return records;
}

double mean_length(const std::vector<PromptRecord>& records) {
    if (records.empty()) throw std::invalid_argument("mean_length: empty dataset");
    long double sum = 0;
    for (const auto& r : records) sum += r.response_length;
    return static_cast<double>(sum / static_cast<long double>(records.size()));
}

} // namespace dlsim
