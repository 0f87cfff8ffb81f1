#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "dlsim/cli_commands.hpp"

using namespace dlsim;

int main(int argc, char** argv) {
    CLI::App app{"dlsim - compute-budgeted inference planner and simulator for diffusion LLMs"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kToolVersion));

    IngestOpts ingest;
    auto* cmd_ingest_app = app.add_subcommand("ingest", "Normalize a JSONL dataset and print stats");
    cmd_ingest_app->add_option("--in", ingest.input, "Input JSONL path")->required();
    cmd_ingest_app->add_option("--out", ingest.output, "Normalized JSONL output path")->required();
    cmd_ingest_app->add_option("--tokenizer", ingest.tokenizer,
                               "Token counting mode: default|precomputed")
        ->default_val("default");

    TrainOpts train_opts;
    train_opts.config.seed = kDefaultSeed;
    auto* cmd_train_app = app.add_subcommand("train", "Train a response-length predictor");
    cmd_train_app->add_option("--data", train_opts.data, "Normalized JSONL dataset")->required();
    cmd_train_app->add_option("--out", train_opts.model_out, "Model JSON output path")->required();
    cmd_train_app->add_option("--variant", train_opts.variant, "text-only|engineered")
        ->default_val("text-only");
    cmd_train_app->add_option("--rounds", train_opts.config.rounds, "Boosting rounds")
        ->default_val(200);
    cmd_train_app->add_option("--max-depth", train_opts.config.max_depth, "Tree depth limit")
        ->default_val(6);
    cmd_train_app
        ->add_option("--learning-rate", train_opts.config.learning_rate, "Shrinkage in (0,1]")
        ->default_val(0.1);
    cmd_train_app
        ->add_option("--min-samples-leaf", train_opts.config.min_samples_leaf, "Leaf size floor")
        ->default_val(20);
    cmd_train_app
        ->add_option("--hash-buckets", train_opts.config.hash_buckets,
                     "N-gram hash buckets (power of two)")
        ->default_val(4096);
    cmd_train_app->add_option("--seed", train_opts.config.seed, "Split seed")
        ->default_val(kDefaultSeed);
    cmd_train_app->add_option("--ratio", train_opts.train_ratio, "Train fraction")
        ->default_val(0.8);
    cmd_train_app
        ->add_option("--calib-fraction", train_opts.calib_fraction,
                     "Fraction of the train portion held out for calibration")
        ->default_val(0.1);
    cmd_train_app->add_option("--keywords", train_opts.config.keywords,
                              "Keyword indicators for the engineered variant")
        ->delimiter(',');

    CalibrateOpts calibrate;
    auto* cmd_cal_app = app.add_subcommand("calibrate", "Compute the safety margin delta");
    cmd_cal_app->add_option("--model", calibrate.model, "Trained model JSON")->required();
    cmd_cal_app->add_option("--data", calibrate.data, "The dataset used for training")->required();
    cmd_cal_app->add_option("--p-safe", calibrate.p_safe, "Quantile of positive residuals")
        ->default_val(0.95);
    cmd_cal_app->add_option("--out", calibrate.margin_out,
                            "Margin JSON path (default <model>.margin.json)");

    BenchOpts bench;
    auto* cmd_bench_app = app.add_subcommand("bench", "Simulate strategies and report costs");
    cmd_bench_app->add_option("--data", bench.data, "Normalized JSONL dataset")->required();
    cmd_bench_app->add_option("--out", bench.report_out, "Report JSON output path")->required();
    std::string model_path, margin_path, csv_path, traces_dir, curve_path;
    cmd_bench_app->add_option("--model", model_path, "Trained model JSON (for predict strategy)");
    cmd_bench_app->add_option("--margin", margin_path, "Margin JSON sidecar");
    cmd_bench_app->add_option("--strategies", bench.strategies,
                              "Comma-separated: max,static,mean,predict,oracle")
        ->delimiter(',');
    cmd_bench_app->add_option("--static-initial", bench.static_initial,
                              "Initial canvas for the static strategy")
        ->default_val(200);
    cmd_bench_app->add_flag("--include-prompt", bench.include_prompt,
                            "Charge prompt tokens in every attempt's cost");
    cmd_bench_app->add_flag("--eval-all", bench.eval_all,
                            "Simulate the whole file instead of the held-out test split");
    cmd_bench_app->add_option("--jobs", bench.jobs, "Worker threads")->default_val(1);
    cmd_bench_app->add_option("--seed", bench.seed, "Split seed when no model is given")
        ->default_val(kDefaultSeed);
    int64_t mean_override = 0;
    auto* mean_opt = cmd_bench_app->add_option("--mean", mean_override,
                                               "Override the mean-doubling start length");
    cmd_bench_app->add_option("--csv", csv_path, "Also write the report as CSV");
    cmd_bench_app->add_option("--traces", traces_dir, "Directory for per-strategy trace JSONL");
    cmd_bench_app->add_option("--emit-cost-curve", curve_path,
                              "Write the exact cost curve CSV (seq_len,flop)");
    auto* opt_blocks =
        cmd_bench_app->add_option("--blocks", bench.model_config.num_blocks, "Transformer blocks N")
            ->default_val(32);
    auto* opt_hidden = cmd_bench_app->add_option("--hidden", bench.model_config.hidden_dim,
                                                 "Hidden dim D")
                           ->default_val(4096);
    auto* opt_mlp =
        cmd_bench_app->add_option("--mlp", bench.model_config.mlp_width, "MLP width F")
            ->default_val(12288);
    auto* opt_steps = cmd_bench_app->add_option("--steps", bench.model_config.diffusion_steps,
                                                "Diffusion steps T")
                          ->default_val(128);
    auto* opt_lmax = cmd_bench_app->add_option("--lmax", bench.model_config.max_response_len,
                                               "Maximum response length")
                         ->default_val(4096);

    GenOpts gen;
    auto* cmd_gen_app = app.add_subcommand("gen", "Generate a synthetic dataset");
    cmd_gen_app->add_option("--out", gen.output, "Output JSONL path")->required();
    cmd_gen_app->add_option("--size", gen.size, "Number of records")->required();
    cmd_gen_app->add_option("--seed", gen.seed, "RNG seed")->default_val(kDefaultSeed);
    cmd_gen_app->add_flag("--skewed-paper", gen.skewed_preset,
                          "Heavy-tail preset (lognormal, mean 96 / std 120)");
    cmd_gen_app->add_flag("--bimodal-paper", gen.bimodal_preset,
                          "Bimodal preset (60% mean 50, 40% mean 3000)");
    cmd_gen_app->add_option("--component", gen.components,
                            "Mixture component weight:family:mean:spread (repeatable)");

    FitOpts fit;
    auto* cmd_fit_app = app.add_subcommand("fit", "Fit the quadratic cost curve to a CSV");
    cmd_fit_app->add_option("--csv", fit.csv, "CSV with header seq_len,flop")->required();

    PredictOpts predict;
    auto* cmd_predict_app = app.add_subcommand("predict", "Predict lengths for prompts");
    cmd_predict_app->add_option("--model", predict.model, "Trained model JSON")->required();
    cmd_predict_app->add_option("--in", predict.input, "Prompt JSONL path or - for stdin")
        ->default_val("-");
    cmd_predict_app->add_option("--out", predict.output, "CSV output path or - for stdout")
        ->default_val("-");

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_ingest_app->parsed()) {
            cmd_ingest(ingest);
        } else if (cmd_train_app->parsed()) {
            cmd_train(train_opts);
        } else if (cmd_cal_app->parsed()) {
            cmd_calibrate(calibrate);
        } else if (cmd_bench_app->parsed()) {
            if (!model_path.empty()) bench.model = model_path;
            if (!margin_path.empty()) bench.margin = margin_path;
            if (!csv_path.empty()) bench.csv_out = csv_path;
            if (!traces_dir.empty()) bench.traces_dir = traces_dir;
            if (!curve_path.empty()) bench.cost_curve_out = curve_path;
            if (mean_opt->count() > 0) bench.mean_override = mean_override;
            // DLSIM_CONFIG supplies model-config defaults; explicit flags win.
            if (const char* cfg_path = std::getenv("DLSIM_CONFIG")) {
                const ModelConfig from_file =
                    dlsim::load_model_config_file(cfg_path, bench.model_config);
                if (opt_blocks->count() == 0) bench.model_config.num_blocks = from_file.num_blocks;
                if (opt_hidden->count() == 0) bench.model_config.hidden_dim = from_file.hidden_dim;
                if (opt_mlp->count() == 0) bench.model_config.mlp_width = from_file.mlp_width;
                if (opt_steps->count() == 0)
                    bench.model_config.diffusion_steps = from_file.diffusion_steps;
                if (opt_lmax->count() == 0)
                    bench.model_config.max_response_len = from_file.max_response_len;
            }
            cmd_bench(bench);
        } else if (cmd_gen_app->parsed()) {
            cmd_gen(gen);
        } else if (cmd_fit_app->parsed()) {
            cmd_fit(fit);
        } else if (cmd_predict_app->parsed()) {
            cmd_predict(predict);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
