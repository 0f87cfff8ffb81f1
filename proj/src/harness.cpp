#include "dlsim/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <mutex>
#include <stdexcept>
#include <thread>

#include <json.hpp>

using nlohmann::json;

namespace dlsim {

std::vector<AttemptTrace> simulate_all(const Strategy& strategy,
                                       const std::vector<PromptRecord>& records,
                                       const ModelConfig& config, const SimContext& context,
                                       int jobs) {
    std::vector<AttemptTrace> traces(records.size());
    const int workers = std::max(1, std::min<int>(jobs, static_cast<int>(records.size())));
    if (workers == 1) {
        for (size_t i = 0; i < records.size(); ++i)
            traces[i] = simulate_sample(strategy, records[i], config, context);
        return traces;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    const size_t chunk = (records.size() + static_cast<size_t>(workers) - 1) /
                         static_cast<size_t>(workers);
    std::exception_ptr first_error = nullptr;
    std::mutex error_mutex;
    for (int w = 0; w < workers; ++w) {
        const size_t begin = static_cast<size_t>(w) * chunk;
        const size_t end = std::min(records.size(), begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&, begin, end] {
            try {
                for (size_t i = begin; i < end; ++i)
                    traces[i] = simulate_sample(strategy, records[i], config, context);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
    return traces;
}

StrategyResult aggregate_traces(const std::string& name, const std::vector<AttemptTrace>& traces) {
    if (traces.empty()) throw std::invalid_argument("aggregate: no traces");
    StrategyResult out;
    out.name = name;
    size_t fallbacks = 0, truncations = 0, total_attempts = 0;
    std::vector<int> attempts;
    attempts.reserve(traces.size());
    for (const auto& trace : traces) {
        out.total_flop = checked_add(out.total_flop, sample_cost(trace));
        if (trace.fallback_count >= 1) ++fallbacks;
        if (trace.truncated) ++truncations;
        const int n_attempts = static_cast<int>(trace.attempted_lengths.size());
        total_attempts += static_cast<size_t>(n_attempts);
        attempts.push_back(n_attempts);
    }
    const auto n = static_cast<double>(traces.size());
    out.fallback_rate_pct = 100.0 * static_cast<double>(fallbacks) / n;
    out.truncation_rate_pct = 100.0 * static_cast<double>(truncations) / n;
    out.mean_attempts = static_cast<double>(total_attempts) / n;
    std::sort(attempts.begin(), attempts.end());
    auto rank = static_cast<size_t>(std::ceil(0.99 * n));
    rank = std::clamp<size_t>(rank, 1, attempts.size());
    out.attempts_p99 = attempts[rank - 1];
    return out;
}

BenchmarkReport run_benchmark(const std::vector<Strategy>& strategies,
                              const std::vector<PromptRecord>& records,
                              const ModelConfig& config, const SimContext& context,
                              const BenchFlags& flags) {
    if (records.empty()) throw std::invalid_argument("benchmark: empty dataset");
    const bool has_max = std::any_of(strategies.begin(), strategies.end(), [](const Strategy& s) {
        return s.kind == StrategyKind::MaxLength;
    });
    if (!has_max)
        throw std::invalid_argument("benchmark: max-length strategy required as savings denominator");

    SimContext ctx = context;
    ctx.include_prompt = flags.include_prompt;

    BenchmarkReport report;
    report.model_config = config;
    report.flags = flags;
    report.samples = records.size();
    if (records.size() >= 2) report.dataset_stats = compute_stats(records);

    int128 max_total = 0;
    for (const auto& strategy : strategies) {
        const auto traces = simulate_all(strategy, records, config, ctx, flags.jobs);
        report.strategies.push_back(aggregate_traces(strategy_name(strategy), traces));
        if (strategy.kind == StrategyKind::MaxLength)
            max_total = report.strategies.back().total_flop;
    }
    for (auto& result : report.strategies) {
        result.savings_pct =
            max_total > 0
                ? 100.0 * (1.0 - static_cast<double>(static_cast<long double>(result.total_flop) /
                                                     static_cast<long double>(max_total)))
                : 0.0;
    }

    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::tm tm_utc{};
    gmtime_r(&now, &tm_utc);
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
    report.timestamp = stamp;
    return report;
}

LatencyReport latency_profile(const std::vector<AttemptTrace>& traces) {
    if (traces.empty()) throw std::invalid_argument("latency profile: no traces");
    LatencyReport out;
    out.count = traces.size();
    size_t single_shot = 0;
    std::vector<int> attempts;
    attempts.reserve(traces.size());
    for (const auto& trace : traces) {
        const int n_attempts = static_cast<int>(trace.attempted_lengths.size());
        attempts.push_back(n_attempts);
        if (n_attempts == 1) ++single_shot;
        if (static_cast<size_t>(n_attempts) > out.attempt_histogram.size())
            out.attempt_histogram.resize(static_cast<size_t>(n_attempts), 0);
        ++out.attempt_histogram[static_cast<size_t>(n_attempts) - 1];
    }
    out.single_shot_pct = 100.0 * static_cast<double>(single_shot) / static_cast<double>(traces.size());
    std::sort(attempts.begin(), attempts.end());
    auto rank = static_cast<size_t>(std::ceil(0.99 * static_cast<double>(attempts.size())));
    rank = std::clamp<size_t>(rank, 1, attempts.size());
    out.attempts_p99 = attempts[rank - 1];
    out.attempts_max = attempts.back();
    return out;
}

BimodalReport bimodal_experiment(const ModelConfig& config, uint64_t seed, size_t size,
                                 const TrainConfig& train_config, int jobs) {
    const auto records = gen_synthetic(MixtureSpec::bimodal_preset(size, seed));
    auto [train_split, test_split] = split_train_test(records, 0.8, seed);
    auto [fit_split, calib_split] = split_train_test(train_split, 0.9, seed + 1);

    const GbdtModel model = train(fit_split, Variant::TextOnly, train_config);
    const int64_t delta = compute_delta(positive_residuals(model, calib_split), 0.95);

    BimodalReport report;
    report.dataset_size = records.size();
    report.test_size = test_split.size();
    report.delta = delta;
    report.train_mean = std::max<int64_t>(1, std::llround(mean_length(train_split)));
    report.predictor_metrics = evaluate(model, test_split);

    SimContext ctx;
    ctx.model = &model;
    ctx.delta = delta;
    ctx.train_mean = report.train_mean;

    const auto md_traces = simulate_all(Strategy::mean_doubling(), test_split, config, ctx, jobs);
    const auto ptd_traces =
        simulate_all(Strategy::predict_then_diffuse(), test_split, config, ctx, jobs);
    for (const auto& trace : md_traces)
        report.flop_mean_doubling = checked_add(report.flop_mean_doubling, sample_cost(trace));
    for (const auto& trace : ptd_traces)
        report.flop_ptd = checked_add(report.flop_ptd, sample_cost(trace));
    report.ptd_advantage_pct =
        100.0 * (1.0 - static_cast<double>(static_cast<long double>(report.flop_ptd) /
                                           static_cast<long double>(report.flop_mean_doubling)));

    size_t long_records = 0, long_ge3 = 0;
    for (const auto& trace : md_traces) {
        if (!trace.component || *trace.component != 1) continue;
        ++long_records;
        if (trace.attempted_lengths.size() >= 3) ++long_ge3;
    }
    report.long_records = long_records;
    report.long_ge3_attempts_pct =
        long_records > 0 ? 100.0 * static_cast<double>(long_ge3) / static_cast<double>(long_records)
                         : 0.0;
    return report;
}

namespace {

double tflop(int128 flop) { return static_cast<double>(flop) / 1e12; }

json stats_to_json(const DatasetStats& stats) {
    json out;
    out["count"] = stats.count;
    out["mean"] = stats.mean;
    out["std"] = stats.std_dev;
    out["median"] = stats.median;
    out["min"] = stats.min;
    out["max"] = stats.max;
    if (stats.kurtosis_defined)
        out["excess_kurtosis"] = stats.excess_kurtosis;
    else
        out["excess_kurtosis"] = nullptr;
    return out;
}

json config_to_json(const ModelConfig& config) {
    return {{"num_blocks", config.num_blocks},
            {"hidden_dim", config.hidden_dim},
            {"mlp_width", config.mlp_width},
            {"diffusion_steps", config.diffusion_steps},
            {"max_response_len", config.max_response_len}};
}

} // namespace

std::string report_to_json(const BenchmarkReport& report) {
    json doc;
    doc["format"] = "dlsim.report";
    doc["samples"] = report.samples;
    doc["model_config"] = config_to_json(report.model_config);
    doc["flags"] = {{"include_prompt", report.flags.include_prompt},
                    {"jobs", report.flags.jobs},
                    {"seed", report.flags.seed}};
    doc["dataset_stats"] = stats_to_json(report.dataset_stats);
    doc["timestamp"] = report.timestamp;
    json strategies = json::array();
    for (const auto& s : report.strategies) {
        strategies.push_back({{"strategy", s.name},
                              {"total_flop", to_string(s.total_flop)},
                              {"tflop", tflop(s.total_flop)},
                              {"savings_pct", s.savings_pct},
                              {"fallback_rate_pct", s.fallback_rate_pct},
                              {"truncation_rate_pct", s.truncation_rate_pct},
                              {"mean_attempts", s.mean_attempts},
                              {"attempts_p99", s.attempts_p99}});
    }
    doc["strategies"] = std::move(strategies);
    return doc.dump(2);
}

BenchmarkReport report_from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("report: corrupt JSON: ") + e.what());
    }
    if (doc.value("format", "") != "dlsim.report")
        throw std::runtime_error("report: not a dlsim report");
    BenchmarkReport report;
    report.samples = doc["samples"].get<size_t>();
    report.timestamp = doc["timestamp"].get<std::string>();
    const auto& cfg = doc["model_config"];
    report.model_config = {cfg["num_blocks"].get<int64_t>(), cfg["hidden_dim"].get<int64_t>(),
                           cfg["mlp_width"].get<int64_t>(), cfg["diffusion_steps"].get<int64_t>(),
                           cfg["max_response_len"].get<int64_t>()};
    report.flags.include_prompt = doc["flags"]["include_prompt"].get<bool>();
    report.flags.jobs = doc["flags"]["jobs"].get<int>();
    report.flags.seed = doc["flags"]["seed"].get<uint64_t>();
    for (const auto& s : doc["strategies"]) {
        StrategyResult result;
        result.name = s["strategy"].get<std::string>();
        result.total_flop = parse_int128(s["total_flop"].get<std::string>());
        result.savings_pct = s["savings_pct"].get<double>();
        result.fallback_rate_pct = s["fallback_rate_pct"].get<double>();
        result.truncation_rate_pct = s["truncation_rate_pct"].get<double>();
        result.mean_attempts = s["mean_attempts"].get<double>();
        result.attempts_p99 = s["attempts_p99"].get<int>();
        report.strategies.push_back(std::move(result));
    }
    return report;
}

std::string report_to_csv(const BenchmarkReport& report) {
    std::string out =
        "strategy,total_flop,savings_pct,fallback_rate_pct,truncation_rate_pct,mean_attempts,"
        "attempts_p99\n";
    char buf[256];
    for (const auto& s : report.strategies) {
        std::snprintf(buf, sizeof buf, ",%.6f,%.6f,%.6f,%.6f,%d\n", s.savings_pct,
                      s.fallback_rate_pct, s.truncation_rate_pct, s.mean_attempts, s.attempts_p99);
        out += s.name;
        out += ",";
        out += to_string(s.total_flop);
        out += buf;
    }
    return out;
}

ReportFormat parse_report_format(const std::string& name) {
    if (name == "json") return ReportFormat::Json;
    if (name == "csv") return ReportFormat::Csv;
    throw std::invalid_argument("unknown report format '" + name + "' (expected json|csv)");
}

void export_report(const BenchmarkReport& report, ReportFormat format, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << (format == ReportFormat::Json ? report_to_json(report) : report_to_csv(report));
    if (format == ReportFormat::Json) out << "\n";
    if (!out) throw std::runtime_error(path + ": write failed");
}

std::string bimodal_report_to_json(const BimodalReport& report) {
    json doc;
    doc["format"] = "dlsim.bimodal";
    doc["dataset_size"] = report.dataset_size;
    doc["test_size"] = report.test_size;
    doc["delta"] = report.delta;
    doc["train_mean"] = report.train_mean;
    doc["predictor"] = {{"rmse", report.predictor_metrics.rmse},
                        {"mae", report.predictor_metrics.mae},
                        {"pct_within_10", report.predictor_metrics.pct_within_10}};
    doc["mean_doubling_flop"] = to_string(report.flop_mean_doubling);
    doc["ptd_flop"] = to_string(report.flop_ptd);
    doc["ptd_advantage_pct"] = report.ptd_advantage_pct;
    doc["long_records"] = report.long_records;
    doc["long_ge3_attempts_pct"] = report.long_ge3_attempts_pct;
    return doc.dump(2);
}

} // namespace dlsim
