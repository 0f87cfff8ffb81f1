#include "dlsim/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

using nlohmann::json;

namespace dlsim {

std::vector<int64_t> positive_residuals(const GbdtModel& model,
                                        const std::vector<PromptRecord>& records) {
    std::vector<int64_t> residuals;
    for (const auto& rec : records) {
        const int64_t predicted = predict_length(model, rec.prompt_text);
        if (rec.response_length > predicted) residuals.push_back(rec.response_length - predicted);
    }
    return residuals;
}

int64_t compute_delta(std::vector<int64_t> residuals, double p_safe) {
    if (!(p_safe > 0.0 && p_safe <= 1.0))
        throw std::invalid_argument("p_safe must be in (0, 1]");
    if (residuals.empty()) return 0;
    std::sort(residuals.begin(), residuals.end());
    const auto n = static_cast<double>(residuals.size());
    auto rank = static_cast<size_t>(std::ceil(p_safe * n));
    rank = std::clamp<size_t>(rank, 1, residuals.size());
    return residuals[rank - 1];
}

int64_t effective_length(int64_t predicted, int64_t delta, int64_t l_max) {
    if (predicted < 1) throw std::invalid_argument("effective_length: predicted must be >= 1");
    if (delta < 0) throw std::invalid_argument("effective_length: delta must be >= 0");
    if (l_max < 1) throw std::invalid_argument("effective_length: l_max must be >= 1");
    return std::min(predicted + delta, l_max);
}

namespace {
constexpr const char* kMarginFormat = "dlsim.margin";
}

void save_margin(const SafetyMargin& margin, const std::string& path) {
    json doc;
    doc["format"] = kMarginFormat;
    doc["delta"] = margin.delta;
    doc["p_safe"] = margin.p_safe;
    doc["residual_count"] = margin.residual_count;
    doc["source_split"] = margin.source_split;
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << doc.dump() << "\n";
    if (!out) throw std::runtime_error(path + ": write failed");
}

SafetyMargin load_margin(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open");
    std::stringstream buffer;
    buffer << in.rdbuf();
    json doc;
    try {
        doc = json::parse(buffer.str());
    } catch (const json::parse_error& e) {
        throw std::runtime_error(path + ": corrupt JSON: " + e.what());
    }
    if (!doc.is_object() || doc.value("format", "") != kMarginFormat)
        throw std::runtime_error(path + ": not a dlsim margin file");
    SafetyMargin margin;
    margin.delta = doc["delta"].get<int64_t>();
    margin.p_safe = doc["p_safe"].get<double>();
    margin.residual_count = doc["residual_count"].get<size_t>();
    margin.source_split = doc.value("source_split", "calibration");
    if (margin.delta < 0) throw std::runtime_error(path + ": negative delta");
    return margin;
}

} // namespace dlsim
