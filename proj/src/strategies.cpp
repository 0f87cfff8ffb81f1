#include "dlsim/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

using nlohmann::json;

namespace dlsim {

std::string strategy_name(const Strategy& strategy) {
    switch (strategy.kind) {
        case StrategyKind::MaxLength: return "max_length";
        case StrategyKind::StaticDoubling:
            return "static_doubling(" + std::to_string(strategy.initial) + ")";
        case StrategyKind::MeanDoubling: return "mean_doubling";
        case StrategyKind::PredictThenDiffuse: return "predict_then_diffuse";
        case StrategyKind::Oracle: return "oracle";
    }
    return "?";
}

Strategy parse_strategy(const std::string& token, int64_t static_initial) {
    if (token == "max") return Strategy::max_length();
    if (token == "static") return Strategy::static_doubling(static_initial);
    if (token == "mean") return Strategy::mean_doubling();
    if (token == "predict") return Strategy::predict_then_diffuse();
    if (token == "oracle") return Strategy::oracle();
    throw std::invalid_argument("unknown strategy '" + token +
                                "' (expected max|static|mean|predict|oracle)");
}

int64_t plan_initial(const Strategy& strategy, const PromptRecord& record,
                     const SimContext& context, const ModelConfig& config) {
    config.validate();
    const int64_t l_max = config.max_response_len;
    switch (strategy.kind) {
        case StrategyKind::MaxLength:
            return l_max;
        case StrategyKind::StaticDoubling:
            if (strategy.initial < 1)
                throw std::invalid_argument("static doubling: initial length must be >= 1");
            return std::min(strategy.initial, l_max);
        case StrategyKind::MeanDoubling:
            if (context.train_mean < 1)
                throw std::invalid_argument("mean doubling: missing train mean in context");
            return std::min(context.train_mean, l_max);
        case StrategyKind::PredictThenDiffuse: {
            if (context.model == nullptr)
                throw std::invalid_argument("predict_then_diffuse: missing model in context");
            const int64_t predicted = predict_length(*context.model, record.prompt_text);
            return effective_length(predicted, context.delta, l_max);
        }
        case StrategyKind::Oracle:
            if (record.response_length < 1)
                throw std::invalid_argument("oracle: record true length must be >= 1");
            return std::min(record.response_length, l_max);
    }
    throw std::logic_error("unreachable strategy kind");
}

AttemptTrace simulate_sample(const Strategy& strategy, const PromptRecord& record,
                             const ModelConfig& config, const SimContext& context) {
    if (record.response_length < 1)
        throw std::invalid_argument("simulate_sample: record true length must be >= 1");
    const int64_t k = record.response_length;
    const int64_t l_max = config.max_response_len;
    const int64_t prompt_tokens =
        context.include_prompt ? default_tokenize(record.prompt_text) : 0;

    AttemptTrace trace;
    trace.record_id = record.id;
    trace.true_length = k;
    trace.component = record.component;

    int64_t canvas = plan_initial(strategy, record, context, config);
    while (true) {
        trace.attempted_lengths.push_back(canvas);
        trace.attempt_flops.push_back(total_inference_flop(config, canvas + prompt_tokens));
        if (canvas >= k) break; // response fits
        if (canvas == l_max) {
            trace.truncated = true;
            break;
        }
        switch (strategy.kind) {
            case StrategyKind::StaticDoubling:
            case StrategyKind::MeanDoubling:
                canvas = std::min(canvas * 2, l_max);
                break;
            case StrategyKind::PredictThenDiffuse:
                canvas = l_max;
                break;
            case StrategyKind::MaxLength:
            case StrategyKind::Oracle:
                // First attempt was already L_max or k.
                throw std::logic_error("single-shot strategy failed below L_max");
        }
    }
    trace.fallback_count = static_cast<int>(trace.attempted_lengths.size()) - 1;
    trace.final_length = trace.attempted_lengths.back();
    return trace;
}

int128 sample_cost(const AttemptTrace& trace) {
    int128 total = 0;
    for (const int128& flop : trace.attempt_flops) total = checked_add(total, flop);
    return total;
}

void write_traces_jsonl(const std::string& path, const std::vector<AttemptTrace>& traces) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    for (const auto& trace : traces) {
        json obj;
        obj["id"] = trace.record_id;
        obj["attempted_lengths"] = trace.attempted_lengths;
        json flops = json::array();
        for (const int128& f : trace.attempt_flops) flops.push_back(to_string(f));
        obj["attempt_flops"] = std::move(flops);
        obj["fallback_count"] = trace.fallback_count;
        obj["truncated"] = trace.truncated;
        obj["final_length"] = trace.final_length;
        obj["true_length"] = trace.true_length;
        if (trace.component) obj["component"] = *trace.component;
        out << obj.dump() << "\n";
    }
    if (!out) throw std::runtime_error(path + ": write failed");
}

std::vector<AttemptTrace> load_traces_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open");
    std::vector<AttemptTrace> traces;
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
        AttemptTrace trace;
        trace.record_id = obj["id"].get<std::string>();
        trace.attempted_lengths = obj["attempted_lengths"].get<std::vector<int64_t>>();
        for (const auto& f : obj["attempt_flops"])
            trace.attempt_flops.push_back(parse_int128(f.get<std::string>()));
        trace.fallback_count = obj["fallback_count"].get<int>();
        trace.truncated = obj["truncated"].get<bool>();
        trace.final_length = obj["final_length"].get<int64_t>();
        trace.true_length = obj["true_length"].get<int64_t>();
        if (obj.contains("component")) trace.component = obj["component"].get<int>();
        traces.push_back(std::move(trace));
    }
    return traces;
}

} // namespace dlsim
