#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dlsim/calibration.hpp"
#include "dlsim/cli_commands.hpp"
#include "dlsim/cost_model.hpp"
#include "dlsim/dataset.hpp"
#include "dlsim/harness.hpp"
#include "dlsim/predictor.hpp"
#include "dlsim/strategies.hpp"

namespace py = pybind11;
using namespace dlsim;

namespace {

// FLOP counts exceed 64 bits; hand them to Python as exact ints.
py::object to_py_int(int128 value) {
    const std::string text = to_string(value);
    PyObject* obj = PyLong_FromString(text.c_str(), nullptr, 10);
    if (!obj) throw py::error_already_set();
    return py::reinterpret_steal<py::object>(obj);
}

py::dict breakdown_to_dict(const CostBreakdown& b) {
    py::dict out;
    out["mlp_flop"] = to_py_int(b.mlp_flop);
    out["proj_flop"] = to_py_int(b.proj_flop);
    out["attn_flop"] = to_py_int(b.attn_flop);
    out["total_flop"] = to_py_int(b.total_flop);
    return out;
}

py::dict stats_to_dict(const DatasetStats& s) {
    py::dict out;
    out["count"] = s.count;
    out["mean"] = s.mean;
    out["std"] = s.std_dev;
    out["median"] = s.median;
    out["min"] = s.min;
    out["max"] = s.max;
    if (s.kurtosis_defined)
        out["excess_kurtosis"] = s.excess_kurtosis;
    else
        out["excess_kurtosis"] = py::none();
    return out;
}

py::dict trace_to_dict(const AttemptTrace& t) {
    py::dict out;
    out["id"] = t.record_id;
    out["attempted_lengths"] = t.attempted_lengths;
    py::list flops;
    for (const auto& f : t.attempt_flops) flops.append(to_py_int(f));
    out["attempt_flops"] = std::move(flops);
    out["fallback_count"] = t.fallback_count;
    out["truncated"] = t.truncated;
    out["final_length"] = t.final_length;
    out["true_length"] = t.true_length;
    if (t.component)
        out["component"] = *t.component;
    else
        out["component"] = py::none();
    return out;
}

std::vector<Strategy> parse_strategies(const std::vector<std::string>& tokens,
                                       int64_t static_initial) {
    std::vector<Strategy> out;
    out.reserve(tokens.size());
    for (const auto& token : tokens) out.push_back(parse_strategy(token, static_initial));
    return out;
}

MixtureSpec spec_from_components(const std::vector<py::tuple>& components, uint64_t seed,
                                 size_t size) {
    MixtureSpec spec;
    for (const auto& item : components) {
        if (item.size() != 4)
            throw py::value_error("component must be (weight, family, mean, spread)");
        MixtureComponent comp;
        comp.weight = item[0].cast<double>();
        comp.family = parse_family(item[1].cast<std::string>());
        comp.mean = item[2].cast<double>();
        comp.spread = item[3].cast<double>();
        spec.components.push_back(comp);
    }
    spec.seed = seed;
    spec.size = size;
    return spec;
}

} // namespace

PYBIND11_MODULE(_dlsim, m) {
    m.doc() = "Compute-budgeted inference planning and simulation for diffusion LLMs";
    m.attr("__version__") = kToolVersion;

    py::class_<ModelConfig>(m, "ModelConfig")
        .def(py::init([](int64_t num_blocks, int64_t hidden_dim, int64_t mlp_width,
                         int64_t diffusion_steps, int64_t max_response_len) {
                 ModelConfig c{num_blocks, hidden_dim, mlp_width, diffusion_steps,
                               max_response_len};
                 c.validate();
                 return c;
             }),
             py::arg("num_blocks") = 32, py::arg("hidden_dim") = 4096,
             py::arg("mlp_width") = 12288, py::arg("diffusion_steps") = 128,
             py::arg("max_response_len") = 4096)
        .def_readonly("num_blocks", &ModelConfig::num_blocks)
        .def_readonly("hidden_dim", &ModelConfig::hidden_dim)
        .def_readonly("mlp_width", &ModelConfig::mlp_width)
        .def_readonly("diffusion_steps", &ModelConfig::diffusion_steps)
        .def_readonly("max_response_len", &ModelConfig::max_response_len)
        .def("__repr__", [](const ModelConfig& c) {
            return "ModelConfig(num_blocks=" + std::to_string(c.num_blocks) +
                   ", hidden_dim=" + std::to_string(c.hidden_dim) +
                   ", mlp_width=" + std::to_string(c.mlp_width) +
                   ", diffusion_steps=" + std::to_string(c.diffusion_steps) +
                   ", max_response_len=" + std::to_string(c.max_response_len) + ")";
        });

    py::class_<PromptRecord>(m, "PromptRecord")
        .def(py::init([](std::string id, std::string prompt, int64_t response_length,
                         std::optional<int> component) {
                 PromptRecord r;
                 r.id = std::move(id);
                 r.prompt_text = std::move(prompt);
                 r.response_length = response_length;
                 r.component = component;
                 return r;
             }),
             py::arg("id"), py::arg("prompt"), py::arg("response_length"),
             py::arg("component") = py::none())
        .def_readwrite("id", &PromptRecord::id)
        .def_readwrite("prompt", &PromptRecord::prompt_text)
        .def_readwrite("response_length", &PromptRecord::response_length)
        .def_readwrite("component", &PromptRecord::component);

    py::class_<GbdtModel>(m, "Model")
        .def_property_readonly("n_trees", [](const GbdtModel& g) { return g.trees.size(); })
        .def_property_readonly("base_score", [](const GbdtModel& g) { return g.base_score; })
        .def_property_readonly("variant",
                               [](const GbdtModel& g) { return variant_name(g.variant); });

    py::class_<RegressionMetrics>(m, "RegressionMetrics")
        .def_readonly("rmse", &RegressionMetrics::rmse)
        .def_readonly("mae", &RegressionMetrics::mae)
        .def_readonly("pct_within_10", &RegressionMetrics::pct_within_10)
        .def("__repr__", [](const RegressionMetrics& r) {
            return "RegressionMetrics(rmse=" + std::to_string(r.rmse) +
                   ", mae=" + std::to_string(r.mae) +
                   ", pct_within_10=" + std::to_string(r.pct_within_10) + ")";
        });

    // cost model
    m.def(
        "per_block_flop",
        [](const ModelConfig& c, int64_t L) { return breakdown_to_dict(per_block_flop(c, L)); },
        py::arg("config"), py::arg("seq_len"),
        "Per-block FLOP components (mlp, projections, attention) at a sequence length.");
    m.def(
        "total_inference_flop",
        [](const ModelConfig& c, int64_t L) { return to_py_int(total_inference_flop(c, L)); },
        py::arg("config"), py::arg("seq_len"),
        "Exact whole-inference FLOP count at a sequence length.");
    m.def(
        "crossover_length",
        [](const ModelConfig& c) {
            const Crossover x = crossover_length(c);
            return py::make_tuple(x.length, x.remainder);
        },
        py::arg("config"),
        "Length where the quadratic attention term overtakes the linear terms.");
    m.def(
        "fit_quadratic",
        [](const std::vector<std::pair<double, double>>& pts) {
            std::vector<CurvePoint> points;
            points.reserve(pts.size());
            for (const auto& [x, y] : pts) points.push_back({x, y});
            const QuadraticFit fit = fit_quadratic(points);
            py::dict out;
            out["linear_coeff"] = fit.linear_coeff;
            out["quadratic_coeff"] = fit.quadratic_coeff;
            out["intercept"] = fit.intercept;
            out["r_squared"] = fit.r_squared;
            return out;
        },
        py::arg("points"), "Least-squares fit of flop = a*L + b*L^2 + c.");

    // dataset
    m.def("default_tokenize", [](const std::string& s) { return default_tokenize(s); },
          py::arg("text"));
    m.def("load_jsonl", [](const std::string& path) { return load_jsonl(path); }, py::arg("path"));
    m.def("write_jsonl", &write_jsonl, py::arg("path"), py::arg("records"));
    m.def(
        "compute_stats",
        [](const std::vector<PromptRecord>& records) { return stats_to_dict(compute_stats(records)); },
        py::arg("records"));
    m.def(
        "split_train_test",
        [](const std::vector<PromptRecord>& records, double ratio, uint64_t seed) {
            auto [train, test] = split_train_test(records, ratio, seed);
            return py::make_tuple(std::move(train), std::move(test));
        },
        py::arg("records"), py::arg("ratio"), py::arg("seed"));
    m.def(
        "gen_synthetic",
        [](const std::vector<py::tuple>& components, size_t size, uint64_t seed) {
            return gen_synthetic(spec_from_components(components, seed, size));
        },
        py::arg("components"), py::arg("size"), py::arg("seed"),
        "components: list of (weight, family, mean, spread) tuples.");
    m.def(
        "gen_skewed",
        [](size_t size, uint64_t seed) {
            return gen_synthetic(MixtureSpec::skewed_preset(size, seed));
        },
        py::arg("size"), py::arg("seed"), "Heavy-tail preset (lognormal mean 96 / std 120).");
    m.def(
        "gen_bimodal",
        [](size_t size, uint64_t seed) {
            return gen_synthetic(MixtureSpec::bimodal_preset(size, seed));
        },
        py::arg("size"), py::arg("seed"), "Bimodal preset (60% mean 50, 40% mean 3000).");

    // predictor
    m.def(
        "train",
        [](const std::vector<PromptRecord>& records, const std::string& variant, int rounds,
           int max_depth, double learning_rate, int min_samples_leaf, int hash_buckets,
           uint64_t seed) {
            TrainConfig cfg;
            cfg.rounds = rounds;
            cfg.max_depth = max_depth;
            cfg.learning_rate = learning_rate;
            cfg.min_samples_leaf = min_samples_leaf;
            cfg.hash_buckets = hash_buckets;
            cfg.seed = seed;
            return train(records, parse_variant(variant), cfg);
        },
        py::arg("records"), py::arg("variant") = "text-only", py::arg("rounds") = 200,
        py::arg("max_depth") = 6, py::arg("learning_rate") = 0.1,
        py::arg("min_samples_leaf") = 20, py::arg("hash_buckets") = 4096,
        py::arg("seed") = kDefaultSeed);
    m.def(
        "predict_length",
        [](const GbdtModel& model, const std::string& prompt) {
            return predict_length(model, prompt);
        },
        py::arg("model"), py::arg("prompt"));
    m.def("evaluate", &evaluate, py::arg("model"), py::arg("records"));
    m.def("save_model", &save_model, py::arg("model"), py::arg("path"));
    m.def("load_model", &load_model, py::arg("path"));

    // calibration
    m.def("positive_residuals", &positive_residuals, py::arg("model"), py::arg("records"));
    m.def(
        "compute_delta",
        [](std::vector<int64_t> residuals, double p_safe) {
            return compute_delta(std::move(residuals), p_safe);
        },
        py::arg("residuals"), py::arg("p_safe") = 0.95);
    m.def("effective_length", &effective_length, py::arg("predicted"), py::arg("delta"),
          py::arg("l_max"));

    // simulation
    m.def(
        "simulate_sample",
        [](const std::string& strategy, const PromptRecord& record, const ModelConfig& config,
           const GbdtModel* model, int64_t delta, int64_t train_mean, int64_t static_initial,
           bool include_prompt) {
            SimContext ctx;
            ctx.model = model;
            ctx.delta = delta;
            ctx.train_mean = train_mean;
            ctx.include_prompt = include_prompt;
            return trace_to_dict(
                simulate_sample(parse_strategy(strategy, static_initial), record, config, ctx));
        },
        py::arg("strategy"), py::arg("record"), py::arg("config"), py::arg("model") = nullptr,
        py::arg("delta") = 0, py::arg("train_mean") = 0, py::arg("static_initial") = 200,
        py::arg("include_prompt") = false);
    m.def(
        "run_benchmark",
        [](const std::vector<PromptRecord>& records, const ModelConfig& config,
           const std::vector<std::string>& strategies, const GbdtModel* model, int64_t delta,
           int64_t train_mean, int64_t static_initial, bool include_prompt, int jobs,
           uint64_t seed) {
            SimContext ctx;
            ctx.model = model;
            ctx.delta = delta;
            ctx.train_mean = train_mean;
            BenchFlags flags;
            flags.include_prompt = include_prompt;
            flags.jobs = jobs;
            flags.seed = seed;
            const BenchmarkReport report = run_benchmark(
                parse_strategies(strategies, static_initial), records, config, ctx, flags);
            auto json_mod = py::module_::import("json");
            return json_mod.attr("loads")(report_to_json(report));
        },
        py::arg("records"), py::arg("config"),
        py::arg("strategies") = std::vector<std::string>{"max", "static", "mean", "oracle"},
        py::arg("model") = nullptr, py::arg("delta") = 0, py::arg("train_mean") = 0,
        py::arg("static_initial") = 200, py::arg("include_prompt") = false, py::arg("jobs") = 1,
        py::arg("seed") = kDefaultSeed,
        "Simulate every (strategy, record) pair; returns the report as a dict.");
    m.def(
        "bimodal_experiment",
        [](const ModelConfig& config, uint64_t seed, size_t size, int rounds, int max_depth,
           double learning_rate, int min_samples_leaf, int hash_buckets, int jobs) {
            TrainConfig cfg;
            cfg.rounds = rounds;
            cfg.max_depth = max_depth;
            cfg.learning_rate = learning_rate;
            cfg.min_samples_leaf = min_samples_leaf;
            cfg.hash_buckets = hash_buckets;
            cfg.seed = seed;
            auto json_mod = py::module_::import("json");
            return json_mod.attr("loads")(
                bimodal_report_to_json(bimodal_experiment(config, seed, size, cfg, jobs)));
        },
        py::arg("config"), py::arg("seed"), py::arg("size") = 8000, py::arg("rounds") = 120,
        py::arg("max_depth") = 6, py::arg("learning_rate") = 0.2,
        py::arg("min_samples_leaf") = 8, py::arg("hash_buckets") = 128, py::arg("jobs") = 1);
}
