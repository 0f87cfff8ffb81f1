#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dlsim/harness.hpp"
#include "dlsim/rng.hpp"

using namespace dlsim;

namespace {

ModelConfig small_config() {
    ModelConfig c;
    c.num_blocks = 2;
    c.hidden_dim = 8;
    c.mlp_width = 24;
    c.diffusion_steps = 4;
    c.max_response_len = 4096;
    return c;
}

std::vector<PromptRecord> random_records(size_t n, uint64_t seed, int64_t max_len) {
    Rng rng(seed);
    std::vector<PromptRecord> out;
    for (size_t i = 0; i < n; ++i)
        out.push_back({"r" + std::to_string(i), "prompt text", std::nullopt,
                       1 + static_cast<int64_t>(rng.uniform_below(static_cast<uint64_t>(max_len))),
                       std::nullopt});
    return out;
}

GbdtModel constant_model(double value) {
    GbdtModel model;
    model.base_score = value;
    return model;
}

std::vector<Strategy> all_strategies() {
    return {Strategy::max_length(), Strategy::static_doubling(200), Strategy::mean_doubling(),
            Strategy::predict_then_diffuse(), Strategy::oracle()};
}

const StrategyResult& find_result(const BenchmarkReport& report, const std::string& name) {
    for (const auto& s : report.strategies)
        if (s.name == name) return s;
    REQUIRE(false);
    return report.strategies.front();
}

} // namespace

TEST_SUITE("harness") {

TEST_CASE("single record at L_max ties the single-shot strategies at zero savings") {
    const auto cfg = small_config();
    std::vector<PromptRecord> records = {{"r", "p", std::nullopt, 4096, std::nullopt}};
    SimContext ctx;
    ctx.train_mean = 4096;
    BenchFlags flags;
    const auto report = run_benchmark(
        {Strategy::max_length(), Strategy::oracle(), Strategy::mean_doubling()}, records, cfg, ctx,
        flags);
    for (const auto& s : report.strategies) {
        CHECK(s.total_flop == total_inference_flop(cfg, 4096));
        CHECK(s.savings_pct == doctest::Approx(0.0));
        CHECK(s.fallback_rate_pct == doctest::Approx(0.0));
    }
}

TEST_CASE("oracle savings dominate every strategy on random datasets") {
    const auto cfg = small_config();
    const GbdtModel model = constant_model(80.0);
    Rng rng(21);
    for (int trial = 0; trial < 5; ++trial) {
        const auto records = random_records(300, 100 + static_cast<uint64_t>(trial), 5000);
        SimContext ctx;
        ctx.model = &model;
        ctx.delta = 4;
        ctx.train_mean = 90;
        const auto report = run_benchmark(all_strategies(), records, cfg, ctx, {});
        const double oracle = find_result(report, "oracle").savings_pct;
        for (const auto& s : report.strategies) CHECK(oracle >= s.savings_pct - 1e-12);
        CHECK(find_result(report, "max_length").savings_pct == doctest::Approx(0.0));
    }
}

TEST_CASE("benchmark requires records and the max-length denominator") {
    const auto cfg = small_config();
    CHECK_THROWS((void)run_benchmark(all_strategies(), {}, cfg, {}, {}));
    const auto records = random_records(5, 1, 100);
    CHECK_THROWS((void)run_benchmark({Strategy::oracle()}, records, cfg, {}, {}));
}

TEST_CASE("aggregation is order-independent") {
    const auto cfg = small_config();
    auto records = random_records(400, 33, 6000);
    SimContext ctx;
    ctx.train_mean = 75;
    const auto strategies = std::vector<Strategy>{Strategy::max_length(), Strategy::mean_doubling(),
                                                  Strategy::oracle()};
    const auto before = run_benchmark(strategies, records, cfg, ctx, {});
    Rng rng(2);
    rng.shuffle(records);
    const auto after = run_benchmark(strategies, records, cfg, ctx, {});
    for (size_t i = 0; i < before.strategies.size(); ++i) {
        CHECK(before.strategies[i].total_flop == after.strategies[i].total_flop);
        CHECK(before.strategies[i].savings_pct == after.strategies[i].savings_pct);
        CHECK(before.strategies[i].fallback_rate_pct == after.strategies[i].fallback_rate_pct);
        CHECK(before.strategies[i].mean_attempts == after.strategies[i].mean_attempts);
        CHECK(before.strategies[i].attempts_p99 == after.strategies[i].attempts_p99);
    }
}

TEST_CASE("parallel simulation matches sequential exactly") {
    const auto cfg = small_config();
    const auto records = random_records(501, 44, 6000);
    SimContext ctx;
    ctx.train_mean = 75;
    const auto seq = simulate_all(Strategy::mean_doubling(), records, cfg, ctx, 1);
    const auto par = simulate_all(Strategy::mean_doubling(), records, cfg, ctx, 8);
    REQUIRE(seq.size() == par.size());
    for (size_t i = 0; i < seq.size(); ++i) {
        CHECK(seq[i].record_id == par[i].record_id);
        CHECK(seq[i].attempted_lengths == par[i].attempted_lengths);
        CHECK(sample_cost(seq[i]) == sample_cost(par[i]));
    }
}

TEST_CASE("report numbers agree with an independent pass over exported traces") {
    const auto cfg = small_config();
    const auto records = random_records(250, 55, 5000);
    SimContext ctx;
    ctx.train_mean = 60;
    const auto strategies = std::vector<Strategy>{Strategy::max_length(), Strategy::mean_doubling()};
    const auto report = run_benchmark(strategies, records, cfg, ctx, {});

    const auto dir = std::filesystem::temp_directory_path() / "dlsim_trace_audit";
    std::filesystem::create_directories(dir);
    for (const auto& strategy : strategies) {
        // audit path: export to JSONL, reload, recompute from the file
        const std::string path = (dir / "audit.jsonl").string();
        write_traces_jsonl(path, simulate_all(strategy, records, cfg, ctx, 1));
        const auto traces = load_traces_jsonl(path);
        REQUIRE(traces.size() == records.size());
        int128 total = 0;
        size_t retries = 0, truncated = 0;
        for (const auto& t : traces) {
            total = checked_add(total, sample_cost(t));
            if (t.fallback_count >= 1) ++retries;
            if (t.truncated) ++truncated;
        }
        const auto& result = find_result(report, strategy_name(strategy));
        CHECK(result.total_flop == total);
        CHECK(result.fallback_rate_pct ==
              doctest::Approx(100.0 * static_cast<double>(retries) / 250.0).epsilon(1e-12));
        CHECK(result.truncation_rate_pct ==
              doctest::Approx(100.0 * static_cast<double>(truncated) / 250.0).epsilon(1e-12));
    }
    // savings consistent with stored totals
    const auto& max_result = find_result(report, "max_length");
    for (const auto& s : report.strategies) {
        const double recomputed =
            100.0 * (1.0 - static_cast<double>(static_cast<long double>(s.total_flop) /
                                               static_cast<long double>(max_result.total_flop)));
        CHECK(s.savings_pct == doctest::Approx(recomputed).epsilon(1e-12));
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("larger delta never raises the fallback rate") {
    const auto cfg = small_config();
    const GbdtModel model = constant_model(70.0);
    const auto records = random_records(800, 66, 300);
    BenchFlags flags;
    double prev_rate = 101.0;
    for (int64_t delta : {0, 5, 20, 80}) {
        SimContext ctx;
        ctx.model = &model;
        ctx.delta = delta;
        const auto traces = simulate_all(Strategy::predict_then_diffuse(), records, cfg, ctx, 1);
        size_t retries = 0;
        for (const auto& t : traces)
            if (t.fallback_count >= 1) ++retries;
        const double rate = 100.0 * static_cast<double>(retries) / 800.0;
        CHECK(rate <= prev_rate);
        prev_rate = rate;
    }
}

TEST_CASE("latency profile arithmetic") {
    const auto cfg = small_config();
    SimContext ctx;
    ctx.train_mean = 10;
    std::vector<AttemptTrace> traces;
    for (int i = 0; i < 999; ++i)
        traces.push_back(simulate_sample(Strategy::oracle(),
                                         {"r", "p", std::nullopt, 5, std::nullopt}, cfg, ctx));
    const auto all_single = latency_profile(traces);
    CHECK(all_single.single_shot_pct == doctest::Approx(100.0));
    CHECK(all_single.attempts_p99 == 1);

    traces.push_back(simulate_sample(Strategy::mean_doubling(),
                                     {"r", "p", std::nullopt, 15, std::nullopt}, cfg, ctx));
    const auto one_retry = latency_profile(traces);
    CHECK(one_retry.count == 1000);
    CHECK(one_retry.single_shot_pct == doctest::Approx(99.9));
    CHECK(one_retry.attempts_max == 2);
    REQUIRE(one_retry.attempt_histogram.size() == 2);
    CHECK(one_retry.attempt_histogram[0] == 999);
    CHECK(one_retry.attempt_histogram[1] == 1);
}

TEST_CASE("report export and re-parse round trip byte-stably") {
    const auto cfg = small_config();
    const auto records = random_records(50, 77, 2000);
    SimContext ctx;
    ctx.train_mean = 40;
    const auto report = run_benchmark({Strategy::max_length(), Strategy::oracle()}, records, cfg,
                                      ctx, {});
    const auto dir = std::filesystem::temp_directory_path() / "dlsim_harness_test";
    std::filesystem::create_directories(dir);

    const std::string json_path = (dir / "report.json").string();
    export_report(report, ReportFormat::Json, json_path);
    std::ifstream in(json_path);
    std::stringstream buf;
    buf << in.rdbuf();
    const auto parsed = report_from_json(buf.str());
    REQUIRE(parsed.strategies.size() == report.strategies.size());
    for (size_t i = 0; i < report.strategies.size(); ++i) {
        CHECK(parsed.strategies[i].name == report.strategies[i].name);
        CHECK(parsed.strategies[i].total_flop == report.strategies[i].total_flop);
        CHECK(parsed.strategies[i].savings_pct == report.strategies[i].savings_pct);
        CHECK(parsed.strategies[i].attempts_p99 == report.strategies[i].attempts_p99);
    }

    // identical reports serialize identically aside from the timestamp
    BenchmarkReport copy = report;
    copy.timestamp = "T";
    BenchmarkReport copy2 = report;
    copy2.timestamp = "T";
    CHECK(report_to_json(copy) == report_to_json(copy2));
    CHECK(report_to_csv(report) == report_to_csv(copy));

    const std::string csv = report_to_csv(report);
    CHECK(csv.rfind("strategy,total_flop,savings_pct,fallback_rate_pct,truncation_rate_pct,"
                    "mean_attempts,attempts_p99\n",
                    0) == 0);
    CHECK_THROWS((void)parse_report_format("xml"));
    std::filesystem::remove_all(dir);
}

TEST_CASE("an oracle-quality predictor strictly beats mean doubling on bimodal data") {
    // predict-then-diffuse with a perfect predictor and delta 0 degenerates
    // to the oracle strategy, so compare oracle cost against mean doubling.
    const auto cfg = small_config();
    const auto records = gen_synthetic(MixtureSpec::bimodal_preset(2000, 13));
    SimContext ctx;
    ctx.train_mean = std::max<int64_t>(1, std::llround(mean_length(records)));
    int128 oracle_total = 0, md_total = 0;
    for (const auto& rec : records) {
        oracle_total =
            checked_add(oracle_total, sample_cost(simulate_sample(Strategy::oracle(), rec, cfg, ctx)));
        md_total = checked_add(md_total,
                               sample_cost(simulate_sample(Strategy::mean_doubling(), rec, cfg, ctx)));
    }
    CHECK(oracle_total < md_total);
}

TEST_CASE("bimodal experiment mechanism") {
    // Small but representative run; the acceptance suite runs the full-size one.
    ModelConfig cfg = small_config();
    TrainConfig tc;
    tc.rounds = 60;
    tc.max_depth = 6;
    tc.min_samples_leaf = 5;
    tc.hash_buckets = 64;
    tc.learning_rate = 0.2;
    const auto report = bimodal_experiment(cfg, 4, 1500, tc, 2);
    CHECK(report.dataset_size == 1500);
    CHECK(report.flop_ptd < report.flop_mean_doubling);
    CHECK(report.ptd_advantage_pct > 10.0);
    CHECK(report.long_records > 0);
    CHECK(report.long_ge3_attempts_pct >= 30.0);
    // mean-doubling start: 0.6*50 + 0.4*3000 = about 1230
    CHECK(report.train_mean > 1000);
    CHECK(report.train_mean < 1500);
}

} // TEST_SUITE
