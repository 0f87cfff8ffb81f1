"""End-to-end smoke tests for the python bindings."""

import math

import pytest

import dlsim


@pytest.fixture(scope="module")
def config():
    return dlsim.ModelConfig(num_blocks=2, hidden_dim=8, mlp_width=24,
                             diffusion_steps=4, max_response_len=4096)


def test_cost_model_values():
    tiny = dlsim.ModelConfig(num_blocks=1, hidden_dim=2, mlp_width=4,
                             diffusion_steps=1, max_response_len=16)
    parts = dlsim.per_block_flop(tiny, 3)
    assert parts["mlp_flop"] == 144
    assert parts["proj_flop"] == 96
    assert parts["attn_flop"] == 72
    assert parts["total_flop"] == 312
    assert dlsim.total_inference_flop(tiny, 3) == 312
    assert dlsim.total_inference_flop(tiny, 0) == 0

    llada = dlsim.ModelConfig()
    assert dlsim.crossover_length(llada) == (26624, 0)
    # exact big-int result survives the python boundary
    assert dlsim.total_inference_flop(llada, 4096) == (
        128 * 32 * 4096 * ((6 * 12288 + 8 * 4096) * 4096 + 4 * 4096**2)
    )


def test_quadratic_fit_self_consistency():
    llada = dlsim.ModelConfig()
    pts = [(float(L), float(dlsim.total_inference_flop(llada, L)))
           for L in range(64, 4097, 64)]
    fit = dlsim.fit_quadratic(pts)
    assert fit["r_squared"] >= 1 - 1e-9


def test_tokenizer():
    assert dlsim.default_tokenize("") == 0
    assert dlsim.default_tokenize("Hello, world!") == 4
    assert dlsim.default_tokenize("a  b") == 2


def test_synthetic_stats_and_split():
    records = dlsim.gen_skewed(4000, seed=7)
    stats = dlsim.compute_stats(records)
    assert abs(stats["mean"] - 96) / 96 < 0.15
    train, test = dlsim.split_train_test(records, 0.8, seed=7)
    assert len(train) == 3200 and len(test) == 800


def test_train_predict_calibrate(config):
    records = dlsim.gen_skewed(1500, seed=11)
    train, test = dlsim.split_train_test(records, 0.8, seed=11)
    fit, calib = dlsim.split_train_test(train, 0.9, seed=12)
    model = dlsim.train(fit, rounds=60, max_depth=6, learning_rate=0.2,
                        min_samples_leaf=5, hash_buckets=64)
    assert model.n_trees == 60
    assert dlsim.predict_length(model, "briefly, write about 3 items: alpha beta gamma") >= 1

    metrics = dlsim.evaluate(model, test)
    assert metrics.rmse >= 0

    residuals = dlsim.positive_residuals(model, calib)
    delta = dlsim.compute_delta(residuals, 0.95)
    assert delta >= 0
    assert dlsim.effective_length(100, 5, 4096) == 105
    assert dlsim.effective_length(4094, 5, 4096) == 4096

    trace = dlsim.simulate_sample("predict", test[0], config, model=model, delta=delta)
    assert trace["attempted_lengths"][0] >= 1
    assert trace["final_length"] >= trace["true_length"] or trace["truncated"]


def test_quantile_examples():
    assert dlsim.compute_delta([1, 2, 4, 10], 0.95) == 10
    assert dlsim.compute_delta([], 0.95) == 0
    assert dlsim.compute_delta([3], 0.5) == 3


def test_benchmark_report(config):
    records = dlsim.gen_bimodal(600, seed=3)
    report = dlsim.run_benchmark(records, config,
                                 strategies=["max", "mean", "oracle"],
                                 train_mean=1200, jobs=2)
    by_name = {s["strategy"]: s for s in report["strategies"]}
    assert by_name["max_length"]["savings_pct"] == pytest.approx(0.0)
    assert by_name["oracle"]["savings_pct"] >= by_name["mean_doubling"]["savings_pct"]
    assert int(by_name["oracle"]["total_flop"]) > 0


def test_model_roundtrip(tmp_path):
    records = dlsim.gen_skewed(800, seed=5)
    model = dlsim.train(records, rounds=20, max_depth=4, learning_rate=0.3,
                        min_samples_leaf=5, hash_buckets=64)
    path = str(tmp_path / "model.json")
    dlsim.save_model(model, path)
    loaded = dlsim.load_model(path)
    for rec in records[:50]:
        assert dlsim.predict_length(model, rec.prompt) == dlsim.predict_length(loaded, rec.prompt)
