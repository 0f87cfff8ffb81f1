#include "dlsim/cli_commands.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "dlsim/text.hpp"

using nlohmann::json;

namespace dlsim {

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error(path + ": cannot open for digest");
    uint64_t h = 1469598103934665603ull;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        const auto got = static_cast<size_t>(in.gcount());
        for (size_t i = 0; i < got; ++i) {
            h ^= static_cast<unsigned char>(buf[i]);
            h *= 1099511628211ull;
        }
        if (!in) break;
    }
    char hex[20];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return std::string("fnv1a64:") + hex;
}

std::string default_margin_path(const std::string& model_path) {
    return model_path + ".margin.json";
}

ModelConfig load_model_config_file(const std::string& path, const ModelConfig& base) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error(path + ": cannot open config file");
    json doc;
    try {
        std::stringstream buf;
        buf << in.rdbuf();
        doc = json::parse(buf.str());
    } catch (const json::parse_error& e) {
        throw std::runtime_error(path + ": corrupt JSON: " + e.what());
    }
    if (!doc.is_object()) throw std::runtime_error(path + ": config file must be a JSON object");
    ModelConfig out = base;
    out.num_blocks = doc.value("blocks", out.num_blocks);
    out.hidden_dim = doc.value("hidden", out.hidden_dim);
    out.mlp_width = doc.value("mlp", out.mlp_width);
    out.diffusion_steps = doc.value("steps", out.diffusion_steps);
    out.max_response_len = doc.value("lmax", out.max_response_len);
    out.validate();
    return out;
}

namespace {

void write_manifest(const std::string& output_path, const std::string& command, json flags,
                    const std::vector<std::string>& inputs, uint64_t seed) {
    json doc;
    doc["command"] = command;
    doc["tool_version"] = kToolVersion;
    doc["seed"] = seed;
    doc["flags"] = std::move(flags);
    json digests = json::object();
    for (const auto& path : inputs) digests[path] = file_digest(path);
    doc["inputs"] = std::move(digests);
    const std::string path = output_path + ".manifest.json";
    std::ofstream out(path);
    if (!out) throw std::runtime_error(path + ": cannot open for writing");
    out << doc.dump(2) << "\n";
    if (!out) throw std::runtime_error(path + ": write failed");
}

void print_stats(const std::vector<PromptRecord>& records) {
    if (records.size() < 2) {
        std::cout << "records: " << records.size() << " (too few for distribution stats)\n";
        return;
    }
    const DatasetStats s = compute_stats(records);
    std::cout << "records: " << s.count << "\n"
              << "mean:    " << s.mean << "\n"
              << "std:     " << s.std_dev << "\n"
              << "median:  " << s.median << "\n"
              << "min/max: " << s.min << "/" << s.max << "\n";
    if (s.kurtosis_defined)
        std::cout << "excess kurtosis: " << s.excess_kurtosis << "\n";
    else
        std::cout << "excess kurtosis: undefined (zero variance)\n";
}

struct SplitSets {
    std::vector<PromptRecord> fit;
    std::vector<PromptRecord> calib;
    std::vector<PromptRecord> test;
    int64_t train_mean = 0; // rounded mean of the full train portion
};

SplitSets make_splits(const std::vector<PromptRecord>& records, uint64_t seed, double train_ratio,
                      double calib_fraction) {
    auto [train_split, test_split] = split_train_test(records, train_ratio, seed);
    SplitSets out;
    out.train_mean = std::max<int64_t>(1, std::llround(mean_length(train_split)));
    out.test = std::move(test_split);
    if (calib_fraction > 0) {
        auto [fit_split, calib_split] = split_train_test(train_split, 1.0 - calib_fraction, seed + 1);
        out.fit = std::move(fit_split);
        out.calib = std::move(calib_split);
    } else {
        out.fit = std::move(train_split);
    }
    return out;
}

} // namespace

void cmd_ingest(const IngestOpts& opts) {
    TokenizerMode mode;
    if (opts.tokenizer == "default")
        mode = TokenizerMode::Default;
    else if (opts.tokenizer == "precomputed")
        mode = TokenizerMode::Precomputed;
    else
        throw std::invalid_argument("unknown tokenizer '" + opts.tokenizer +
                                    "' (expected default|precomputed)");
    const auto records = load_jsonl(opts.input, mode);
    write_jsonl(opts.output, records);
    write_manifest(opts.output, "ingest",
                   {{"input", opts.input}, {"output", opts.output}, {"tokenizer", opts.tokenizer}},
                   {opts.input}, 0);
    print_stats(records);
}

void cmd_train(const TrainOpts& opts) {
    const Variant variant = parse_variant(opts.variant);
    const auto records = load_jsonl(opts.data);
    const SplitSets sets = make_splits(records, opts.config.seed, opts.train_ratio,
                                       opts.calib_fraction);

    TrainDiagnostics diagnostics;
    GbdtModel model = train(sets.fit, variant, opts.config, &diagnostics);
    model.split.seed = opts.config.seed;
    model.split.train_ratio = opts.train_ratio;
    model.split.calib_fraction = opts.calib_fraction;
    save_model(model, opts.model_out);

    json flags = {{"data", opts.data},
                  {"variant", opts.variant},
                  {"rounds", opts.config.rounds},
                  {"max_depth", opts.config.max_depth},
                  {"learning_rate", opts.config.learning_rate},
                  {"min_samples_leaf", opts.config.min_samples_leaf},
                  {"hash_buckets", opts.config.hash_buckets},
                  {"train_ratio", opts.train_ratio},
                  {"calib_fraction", opts.calib_fraction}};
    write_manifest(opts.model_out, "train", std::move(flags), {opts.data}, opts.config.seed);

    const RegressionMetrics metrics = evaluate(model, sets.test);
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& rec : sets.test) predict_length(model, rec.prompt_text);
    const auto t1 = std::chrono::steady_clock::now();
    const double us_per_predict =
        std::chrono::duration<double, std::micro>(t1 - t0).count() /
        static_cast<double>(sets.test.size());

    std::cout << "trained " << variant_name(variant) << " model: " << model.trees.size()
              << " trees, base " << model.base_score << "\n"
              << "fit/calib/test sizes: " << sets.fit.size() << "/" << sets.calib.size() << "/"
              << sets.test.size() << "\n"
              << "test rmse: " << metrics.rmse << "  mae: " << metrics.mae
              << "  within-10%: " << metrics.pct_within_10 << "%\n"
              << "final train rmse: "
              << (diagnostics.rmse_per_round.empty() ? 0.0 : diagnostics.rmse_per_round.back())
              << "\n"
              << "prediction latency: " << us_per_predict << " us/prompt\n";
}

void cmd_calibrate(const CalibrateOpts& opts) {
    const GbdtModel model = load_model(opts.model);
    const auto records = load_jsonl(opts.data);
    const SplitSets sets = make_splits(records, model.split.seed, model.split.train_ratio,
                                       model.split.calib_fraction);
    const auto& calib = sets.calib.empty() ? sets.fit : sets.calib;

    const auto residuals = positive_residuals(model, calib);
    SafetyMargin margin;
    margin.delta = compute_delta(residuals, opts.p_safe);
    margin.p_safe = opts.p_safe;
    margin.residual_count = residuals.size();
    margin.source_split = "calibration";

    const std::string out_path =
        opts.margin_out.empty() ? default_margin_path(opts.model) : opts.margin_out;
    save_margin(margin, out_path);
    write_manifest(out_path, "calibrate",
                   {{"model", opts.model}, {"data", opts.data}, {"p_safe", opts.p_safe}},
                   {opts.model, opts.data}, model.split.seed);

    size_t covered = 0;
    for (int64_t r : residuals)
        if (r <= margin.delta) ++covered;
    std::cout << "delta: " << margin.delta << " tokens (p_safe " << opts.p_safe << ", "
              << residuals.size() << " positive residuals)\n";
    if (!residuals.empty())
        std::cout << "calibration coverage: " << covered << "/" << residuals.size() << " ("
                  << 100.0 * static_cast<double>(covered) / static_cast<double>(residuals.size())
                  << "% of under-predictions within delta)\n";
}

void cmd_bench(const BenchOpts& opts) {
    const auto records = load_jsonl(opts.data);
    opts.model_config.validate();

    std::optional<GbdtModel> model;
    int64_t delta = 0;
    if (opts.model) {
        model = load_model(*opts.model);
        if (opts.margin) delta = load_margin(*opts.margin).delta;
    }

    std::vector<Strategy> strategies;
    strategies.reserve(opts.strategies.size());
    bool wants_predict = false;
    for (const auto& token : opts.strategies) {
        strategies.push_back(parse_strategy(token, opts.static_initial));
        wants_predict |= strategies.back().kind == StrategyKind::PredictThenDiffuse;
    }
    if (wants_predict && !model)
        throw std::invalid_argument("bench: predict strategy requires --model");

    uint64_t split_seed = opts.seed;
    double train_ratio = 0.8;
    if (model) {
        split_seed = model->split.seed;
        train_ratio = model->split.train_ratio;
    }

    std::vector<PromptRecord> eval_set;
    int64_t train_mean;
    if (opts.eval_all) {
        eval_set = records;
        train_mean = std::max<int64_t>(1, std::llround(mean_length(records)));
    } else {
        auto [train_split, test_split] = split_train_test(records, train_ratio, split_seed);
        train_mean = std::max<int64_t>(1, std::llround(mean_length(train_split)));
        eval_set = std::move(test_split);
    }
    if (opts.mean_override) train_mean = *opts.mean_override;

    SimContext ctx;
    ctx.model = model ? &*model : nullptr;
    ctx.delta = delta;
    ctx.train_mean = train_mean;

    BenchFlags flags;
    flags.include_prompt = opts.include_prompt;
    flags.jobs = opts.jobs;
    flags.seed = split_seed;

    const BenchmarkReport report = run_benchmark(strategies, eval_set, opts.model_config, ctx, flags);
    export_report(report, ReportFormat::Json, opts.report_out);
    if (opts.csv_out) export_report(report, ReportFormat::Csv, *opts.csv_out);

    if (opts.traces_dir) {
        SimContext trace_ctx = ctx;
        trace_ctx.include_prompt = opts.include_prompt;
        for (const auto& strategy : strategies) {
            const auto traces =
                simulate_all(strategy, eval_set, opts.model_config, trace_ctx, opts.jobs);
            std::string name = strategy_name(strategy);
            for (char& c : name)
                if (c == '(' || c == ')') c = '_';
            write_traces_jsonl(*opts.traces_dir + "/" + name + ".jsonl", traces);
        }
    }

    if (opts.cost_curve_out) {
        std::vector<int64_t> lengths;
        const int64_t l_max = opts.model_config.max_response_len;
        const int64_t step = std::max<int64_t>(1, l_max / 64);
        for (int64_t len = step; len <= l_max; len += step) lengths.push_back(len);
        if (lengths.back() != l_max) lengths.push_back(l_max);
        write_curve_csv(*opts.cost_curve_out, opts.model_config, lengths);
    }

    json flag_json = {{"data", opts.data},
                      {"strategies", opts.strategies},
                      {"static_initial", opts.static_initial},
                      {"include_prompt", opts.include_prompt},
                      {"eval_all", opts.eval_all},
                      {"jobs", opts.jobs},
                      {"blocks", opts.model_config.num_blocks},
                      {"hidden", opts.model_config.hidden_dim},
                      {"mlp", opts.model_config.mlp_width},
                      {"steps", opts.model_config.diffusion_steps},
                      {"lmax", opts.model_config.max_response_len}};
    std::vector<std::string> inputs = {opts.data};
    if (opts.model) inputs.push_back(*opts.model);
    if (opts.margin) inputs.push_back(*opts.margin);
    write_manifest(opts.report_out, "bench", std::move(flag_json), inputs, split_seed);

    std::cout << report_to_csv(report);
}

void cmd_gen(const GenOpts& opts) {
    if (opts.size < 1) throw std::invalid_argument("gen: size must be >= 1");
    MixtureSpec spec;
    if (opts.skewed_preset) {
        spec = MixtureSpec::skewed_preset(opts.size, opts.seed);
    } else if (opts.bimodal_preset) {
        spec = MixtureSpec::bimodal_preset(opts.size, opts.seed);
    } else {
        if (opts.components.empty())
            throw std::invalid_argument("gen: need --component specs or a preset flag");
        for (const auto& text : opts.components) {
            MixtureComponent comp;
            std::istringstream in(text);
            std::string weight, family, mean, spread;
            if (!std::getline(in, weight, ':') || !std::getline(in, family, ':') ||
                !std::getline(in, mean, ':') || !std::getline(in, spread))
                throw std::invalid_argument("gen: component must be weight:family:mean:spread, got '" +
                                            text + "'");
            comp.weight = std::stod(weight);
            comp.family = parse_family(family);
            comp.mean = std::stod(mean);
            comp.spread = std::stod(spread);
            spec.components.push_back(comp);
        }
        spec.seed = opts.seed;
        spec.size = opts.size;
    }
    const auto records = gen_synthetic(spec);
    write_jsonl(opts.output, records);

    json comp_json = json::array();
    for (const auto& c : spec.components)
        comp_json.push_back({{"weight", c.weight},
                             {"family", family_name(c.family)},
                             {"mean", c.mean},
                             {"spread", c.spread}});
    write_manifest(opts.output, "gen",
                   {{"size", opts.size}, {"components", std::move(comp_json)}}, {}, opts.seed);
    print_stats(records);
}

void cmd_fit(const FitOpts& opts) {
    const auto points = load_curve_csv(opts.csv);
    const QuadraticFit fit = fit_quadratic(points);
    std::cout << "points:          " << points.size() << "\n"
              << "linear_coeff:    " << fit.linear_coeff << "\n"
              << "quadratic_coeff: " << fit.quadratic_coeff << "\n"
              << "intercept:       " << fit.intercept << "\n"
              << "r_squared:       " << fit.r_squared << "\n";
}

void cmd_predict(const PredictOpts& opts) {
    const GbdtModel model = load_model(opts.model);
    std::vector<PromptRecord> records;
    if (opts.input == "-") {
        std::string line;
        size_t line_no = 0;
        while (std::getline(std::cin, line)) {
            ++line_no;
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            json obj;
            try {
                obj = json::parse(line);
            } catch (const json::parse_error& e) {
                throw std::runtime_error("stdin:" + std::to_string(line_no) +
                                         ": malformed JSON: " + e.what());
            }
            if (!obj.is_object() || !obj.contains("prompt") || !obj["prompt"].is_string())
                throw std::runtime_error("stdin:" + std::to_string(line_no) +
                                         ": missing string field 'prompt'");
            PromptRecord rec;
            rec.prompt_text = obj["prompt"].get<std::string>();
            rec.id = obj.contains("id") && obj["id"].is_string()
                         ? obj["id"].get<std::string>()
                         : "rec-" + std::to_string(records.size() + 1);
            records.push_back(std::move(rec));
        }
    } else {
        records = load_prompts_jsonl(opts.input);
    }

    std::ostringstream csv;
    csv << "id,predicted_length\n";
    for (const auto& rec : records)
        csv << rec.id << "," << predict_length(model, rec.prompt_text) << "\n";

    if (opts.output == "-") {
        std::cout << csv.str();
    } else {
        std::ofstream out(opts.output);
        if (!out) throw std::runtime_error(opts.output + ": cannot open for writing");
        out << csv.str();
        if (!out) throw std::runtime_error(opts.output + ": write failed");
        std::vector<std::string> inputs = {opts.model};
        if (opts.input != "-") inputs.push_back(opts.input);
        write_manifest(opts.output, "predict", {{"model", opts.model}, {"input", opts.input}},
                       inputs, 0);
    }
}

} // namespace dlsim
