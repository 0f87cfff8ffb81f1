#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "dlsim/rng.hpp"
#include "dlsim/strategies.hpp"

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

PromptRecord record_with_k(int64_t k, std::string prompt = "p") {
    return {"rec", std::move(prompt), std::nullopt, k, std::nullopt};
}

// Constant predictor: no trees, so round(base_score) everywhere.
GbdtModel constant_model(double value) {
    GbdtModel model;
    model.base_score = value;
    return model;
}

} // namespace

TEST_SUITE("strategies") {

TEST_CASE("plan_initial per strategy") {
    const auto cfg = small_config();
    SimContext ctx;
    ctx.train_mean = 95;

    CHECK(plan_initial(Strategy::max_length(), record_with_k(63), ctx, cfg) == 4096);
    CHECK(plan_initial(Strategy::oracle(), record_with_k(63), ctx, cfg) == 63);
    CHECK(plan_initial(Strategy::mean_doubling(), record_with_k(63), ctx, cfg) == 95);
    CHECK(plan_initial(Strategy::static_doubling(200), record_with_k(63), ctx, cfg) == 200);

    const GbdtModel model = constant_model(100.0);
    ctx.model = &model;
    ctx.delta = 5;
    CHECK(plan_initial(Strategy::predict_then_diffuse(), record_with_k(63), ctx, cfg) == 105);

    SimContext missing;
    CHECK_THROWS((void)plan_initial(Strategy::mean_doubling(), record_with_k(1), missing, cfg));
    CHECK_THROWS((void)plan_initial(Strategy::predict_then_diffuse(), record_with_k(1), missing, cfg));
    CHECK_THROWS((void)plan_initial(Strategy::static_doubling(0), record_with_k(1), missing, cfg));
}

TEST_CASE("static doubling retries until the canvas fits") {
    const auto cfg = small_config();
    const auto trace = simulate_sample(Strategy::static_doubling(200), record_with_k(300), cfg, {});
    CHECK(trace.attempted_lengths == std::vector<int64_t>{200, 400});
    CHECK(trace.fallback_count == 1);
    CHECK_FALSE(trace.truncated);
    CHECK(trace.final_length == 400);
}

TEST_CASE("predict-then-diffuse falls back once to L_max") {
    const auto cfg = small_config();
    const GbdtModel model = constant_model(100.0);
    SimContext ctx;
    ctx.model = &model;
    ctx.delta = 5;
    const auto trace =
        simulate_sample(Strategy::predict_then_diffuse(), record_with_k(110), cfg, ctx);
    CHECK(trace.attempted_lengths == std::vector<int64_t>{105, 4096});
    CHECK(trace.fallback_count == 1);
    CHECK_FALSE(trace.truncated);
}

TEST_CASE("max length truncates when even L_max cannot fit") {
    const auto cfg = small_config();
    const auto trace = simulate_sample(Strategy::max_length(), record_with_k(5000), cfg, {});
    CHECK(trace.attempted_lengths == std::vector<int64_t>{4096});
    CHECK(trace.truncated);
    CHECK(trace.fallback_count == 0);

    const auto oracle = simulate_sample(Strategy::oracle(), record_with_k(5000), cfg, {});
    CHECK(oracle.attempted_lengths == std::vector<int64_t>{4096});
    CHECK(oracle.truncated);
}

TEST_CASE("doubling clamps at L_max instead of overshooting") {
    const auto cfg = small_config();
    SimContext ctx;
    ctx.train_mean = 95;
    const auto trace = simulate_sample(Strategy::mean_doubling(), record_with_k(4000), cfg, ctx);
    CHECK(trace.attempted_lengths ==
          std::vector<int64_t>{95, 190, 380, 760, 1520, 3040, 4096});
    CHECK(trace.final_length == 4096);
    CHECK_FALSE(trace.truncated);

    // attempt-count bound: ceil(log2(L_max / L0)) + 1
    const double bound = std::ceil(std::log2(4096.0 / 95.0)) + 1;
    CHECK(static_cast<double>(trace.attempted_lengths.size()) <= bound);
}

TEST_CASE("long report under mean doubling walks the bimodal sequence") {
    // bimodal mixture mean is about 1230; a 3000-token response needs
    // two retries before the clamp at L_max.
    const auto cfg = small_config();
    SimContext ctx;
    ctx.train_mean = 1230;
    const auto trace = simulate_sample(Strategy::mean_doubling(), record_with_k(3000), cfg, ctx);
    CHECK(trace.attempted_lengths == std::vector<int64_t>{1230, 2460, 4096});
    CHECK(trace.fallback_count == 2);
    CHECK_FALSE(trace.truncated);
}

TEST_CASE("sample cost sums every attempt with no discounting") {
    const auto cfg = small_config();
    const auto single = simulate_sample(Strategy::oracle(), record_with_k(17), cfg, {});
    CHECK(sample_cost(single) == total_inference_flop(cfg, 17));

    const auto twice = simulate_sample(Strategy::static_doubling(10), record_with_k(15), cfg, {});
    REQUIRE(twice.attempted_lengths == std::vector<int64_t>{10, 20});
    CHECK(sample_cost(twice) ==
          checked_add(total_inference_flop(cfg, 10), total_inference_flop(cfg, 20)));
}

TEST_CASE("include_prompt charges prompt tokens on every attempt") {
    const auto cfg = small_config();
    SimContext ctx;
    ctx.include_prompt = true;
    const auto rec = record_with_k(10, "five words in this prompt");
    const auto trace = simulate_sample(Strategy::oracle(), rec, cfg, ctx);
    CHECK(trace.attempted_lengths == std::vector<int64_t>{10});
    CHECK(sample_cost(trace) == total_inference_flop(cfg, 10 + 5));
}

TEST_CASE("traces satisfy the structural invariants on random data") {
    const auto cfg = small_config();
    Rng rng(606);
    const GbdtModel model = constant_model(64.0);
    for (int trial = 0; trial < 2000; ++trial) {
        const int64_t k = 1 + static_cast<int64_t>(rng.uniform_below(6000));
        const auto rec = record_with_k(k);
        SimContext ctx;
        ctx.model = &model;
        ctx.delta = static_cast<int64_t>(rng.uniform_below(20));
        ctx.train_mean = 1 + static_cast<int64_t>(rng.uniform_below(300));
        const Strategy strategies[] = {Strategy::max_length(), Strategy::static_doubling(200),
                                       Strategy::mean_doubling(), Strategy::predict_then_diffuse(),
                                       Strategy::oracle()};
        const int128 oracle_cost = sample_cost(simulate_sample(Strategy::oracle(), rec, cfg, ctx));
        for (const auto& strategy : strategies) {
            const auto trace = simulate_sample(strategy, rec, cfg, ctx);
            for (size_t i = 1; i < trace.attempted_lengths.size(); ++i)
                CHECK(trace.attempted_lengths[i] > trace.attempted_lengths[i - 1]);
            CHECK(trace.fallback_count ==
                  static_cast<int>(trace.attempted_lengths.size()) - 1);
            // success/truncation dichotomy
            if (trace.truncated) {
                CHECK(trace.attempted_lengths.back() == cfg.max_response_len);
                CHECK(k > cfg.max_response_len);
            } else {
                CHECK(trace.final_length >= k);
            }
            // oracle dominance (oracle clamps at L_max, so <= always holds)
            CHECK(oracle_cost <= sample_cost(trace));
            // termination bounds
            if (strategy.kind == StrategyKind::MaxLength || strategy.kind == StrategyKind::Oracle)
                CHECK(trace.attempted_lengths.size() == 1);
            if (strategy.kind == StrategyKind::PredictThenDiffuse)
                CHECK(trace.attempted_lengths.size() <= 2);
        }
    }
}

TEST_CASE("trace JSONL round trip") {
    const auto cfg = small_config();
    std::vector<AttemptTrace> traces;
    SimContext ctx;
    ctx.train_mean = 50;
    auto rec = record_with_k(120);
    rec.component = 1;
    traces.push_back(simulate_sample(Strategy::mean_doubling(), rec, cfg, ctx));
    traces.push_back(simulate_sample(Strategy::oracle(), record_with_k(7), cfg, ctx));

    const auto dir = std::filesystem::temp_directory_path() / "dlsim_strategy_test";
    std::filesystem::create_directories(dir);
    const std::string path = (dir / "traces.jsonl").string();
    write_traces_jsonl(path, traces);
    const auto loaded = load_traces_jsonl(path);
    REQUIRE(loaded.size() == traces.size());
    for (size_t i = 0; i < traces.size(); ++i) {
        CHECK(loaded[i].record_id == traces[i].record_id);
        CHECK(loaded[i].attempted_lengths == traces[i].attempted_lengths);
        CHECK(loaded[i].fallback_count == traces[i].fallback_count);
        CHECK(loaded[i].truncated == traces[i].truncated);
        CHECK(loaded[i].component == traces[i].component);
        REQUIRE(loaded[i].attempt_flops.size() == traces[i].attempt_flops.size());
        for (size_t j = 0; j < traces[i].attempt_flops.size(); ++j)
            CHECK(loaded[i].attempt_flops[j] == traces[i].attempt_flops[j]);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("strategy token parsing") {
    CHECK(parse_strategy("max", 200).kind == StrategyKind::MaxLength);
    CHECK(parse_strategy("static", 200).initial == 200);
    CHECK(parse_strategy("mean", 200).kind == StrategyKind::MeanDoubling);
    CHECK(parse_strategy("predict", 200).kind == StrategyKind::PredictThenDiffuse);
    CHECK(parse_strategy("oracle", 200).kind == StrategyKind::Oracle);
    CHECK_THROWS((void)parse_strategy("bogus", 200));
    CHECK(strategy_name(Strategy::static_doubling(200)) == "static_doubling(200)");
}

} // TEST_SUITE
