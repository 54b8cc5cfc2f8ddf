// regnet: train, inspect and benchmark Regression Network models.

#include <filesystem>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "regnet/bench.hpp"

namespace fs = std::filesystem;
using namespace regnet;

namespace {

struct TrainFlags {
    std::string data_path;
    std::string schema_path;
    std::string arch = "k1+2";
    std::string mode = "stepwise";
    std::string out_path = "model.json";
    uint64_t seed = 42;
    std::optional<uint64_t> split_seed;
    double val_fraction = 0.2;
    int max_epochs = 512;
    int patience = 32;
    double min_delta = 0.005;
    int batch_size = 256;
    double learning_rate = 1e-3;
    bool no_class_balancing = false;
    std::vector<int> level_hidden{16, 16};
    std::vector<int> residual_hidden{32, 32};
    std::vector<int> dense_hidden{64, 64};
    bool verbose = false;
};

int run_generate(const std::string& dataset, int rows, uint64_t seed, const std::string& out_dir) {
    SyntheticName name = synthetic_from_string(dataset);
    fs::create_directories(out_dir);
    RawDataset raw = generate({name, rows, seed});
    fs::path csv = fs::path(out_dir) / (dataset + ".csv");
    fs::path sidecar = fs::path(out_dir) / (dataset + ".json");
    write_file(csv.string(), to_csv(raw));
    write_file(sidecar.string(), synthetic_sidecar({name, rows, seed}).dump(1) + "\n");
    std::cout << "wrote " << csv.string() << " (" << raw.n_rows() << " rows)\n";
    std::cout << "wrote " << sidecar.string() << "\n";
    return 0;
}

int run_train(const TrainFlags& f) {
    SchemaConfig schema_cfg = SchemaConfig::load(f.schema_path);
    RawDataset raw = load_csv(f.data_path, schema_cfg);
    if (raw.dropped_rows > 0)
        std::cerr << "dropped " << raw.dropped_rows << " rows with missing or unparseable cells\n";

    uint64_t split_seed = f.split_seed.value_or(f.seed);
    auto [train_raw, val_raw] = split(raw, f.val_fraction, split_seed);
    Preprocessor pre = fit_preprocessor(train_raw, schema_cfg);
    Dataset train_ds = apply_preprocessor(pre, train_raw);
    Dataset val_ds = apply_preprocessor(pre, val_raw);

    TrainConfig cfg;
    cfg.max_epochs = f.max_epochs;
    cfg.patience = f.patience;
    cfg.min_delta = f.min_delta;
    cfg.batch_size = f.batch_size;
    cfg.learning_rate = f.learning_rate;
    cfg.class_balancing = !f.no_class_balancing;
    cfg.seed = f.seed;
    cfg.mode = f.mode == "all-at-once" ? TrainMode::AllAtOnce : TrainMode::StepWise;

    EpochObserver observer;
    if (f.verbose)
        observer = [](const std::string& phase, int epoch, double tr, double va,
                      const RegressionNetwork&) {
            std::cerr << phase << " epoch " << epoch << " train " << format_double(tr) << " val "
                      << format_double(va) << "\n";
        };

    Architecture arch = architecture_from_string(f.arch);
    TrainedModel tm;
    tm.preprocessor = pre;
    tm.split_seed = split_seed;
    tm.val_fraction = f.val_fraction;
    if (arch == Architecture::Regression) {
        auto [model, hist] = train_baseline_regression(train_ds, val_ds, cfg, observer);
        tm.model = std::move(model);
        tm.history = std::move(hist);
    } else {
        ModelSpec spec = architecture_spec(arch, SubnetTemplate{f.level_hidden},
                                           SubnetTemplate{f.residual_hidden},
                                           SubnetTemplate{f.dense_hidden});
        tm.model = build_model(train_ds.schema, spec, train_ds.task, cfg.seed);
        tm.history = train(tm.model, train_ds, val_ds, cfg, observer);
    }

    save_model(tm, f.out_path);
    std::cout << "arch: " << to_string(arch) << "\n";
    std::cout << "phases: " << tm.history.phases.size() << "\n";
    std::cout << "final_val_loss: " << format_double(tm.history.final_val_loss) << "\n";
    std::cout << "min_val_loss: " << format_double(tm.history.min_val_loss()) << "\n";
    std::cout << "wrote " << f.out_path << "\n";
    return 0;
}

int run_evaluate(const std::string& model_path, const std::string& data_path,
                 const std::string& split_name) {
    TrainedModel tm = load_model(model_path);
    SchemaConfig schema_cfg = tm.preprocessor.schema_config();
    RawDataset raw = load_csv(data_path, schema_cfg);

    RawDataset subset_raw;
    if (split_name == "all") {
        subset_raw = std::move(raw);
    } else {
        auto [train_raw, val_raw] = split(raw, tm.val_fraction, tm.split_seed);
        subset_raw = split_name == "train" ? std::move(train_raw) : std::move(val_raw);
    }
    Dataset ds = apply_preprocessor(tm.preprocessor, subset_raw);
    Vector pred = predict(tm.model, ds.x);
    LossKind kind = loss_for_task(tm.model.task);
    double value = loss(pred, ds.y, kind);

    std::cout << "metric: " << (kind == LossKind::MeanSquaredError ? "mse" : "bce") << "\n";
    std::cout << "split: " << split_name << "\n";
    std::cout << "rows: " << ds.n_rows() << "\n";
    std::cout << "loss: " << format_double(value) << "\n";
    return 0;
}

int run_export(const std::string& model_path, const std::vector<std::string>& features,
               const std::vector<std::string>& pairs, int points, bool combined,
               const std::string& out_dir) {
    if (features.empty() && pairs.empty())
        throw CLI::ValidationError("export-functions", "need at least one --feature or --pair");
    TrainedModel tm = load_model(model_path);
    fs::create_directories(out_dir);
    auto emit = [&](const FunctionGrid& grid, const std::string& stem) {
        fs::path csv = fs::path(out_dir) / (stem + ".csv");
        fs::path json = fs::path(out_dir) / (stem + ".json");
        write_file(csv.string(), grid_to_csv(grid));
        write_file(json.string(), grid_to_json(grid).dump(1) + "\n");
        std::cout << "wrote " << csv.string() << " and " << json.string() << "\n";
    };
    for (const auto& feature : features)
        emit(grid_1d(tm.model, tm.preprocessor, feature, points > 0 ? points : 256), feature);
    for (const auto& pair : pairs) {
        auto comma = pair.find(',');
        if (comma == std::string::npos)
            throw CLI::ValidationError("--pair", "expected two feature names as 'a,b'");
        std::string a = pair.substr(0, comma), b = pair.substr(comma + 1);
        std::string stem = a + "__" + b + (combined ? "__combined" : "");
        emit(grid_2d(tm.model, tm.preprocessor, a, b, points > 0 ? points : 64, combined), stem);
    }
    return 0;
}

int run_benchmark(const std::string& suite_path, const std::string& out_path,
                  std::optional<int> jobs) {
    SuiteConfig cfg = SuiteConfig::load(suite_path);
    if (jobs) cfg.jobs = *jobs;
    std::vector<ResultCell> cells = run_suite(cfg);
    std::cout << format_table(cells);
    if (!out_path.empty()) {
        write_file(out_path, report_json(cfg, cells).dump(1) + "\n");
        std::cout << "wrote " << out_path << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Regression Networks: additive models of per-subset neural networks"};
    app.require_subcommand(1);

    // generate
    std::string gen_dataset;
    int gen_rows = 10000;
    uint64_t gen_seed = 42;
    std::string gen_out = ".";
    auto* gen = app.add_subcommand("generate", "Generate a synthetic benchmark dataset");
    gen->add_option("--dataset", gen_dataset,
                    "Dataset name: add, add_multiply, complex, importance, categorical, "
                    "categorical_interact")
        ->required();
    gen->add_option("--rows", gen_rows, "Number of rows")->capture_default_str();
    gen->add_option("--seed", gen_seed, "Generation seed")->capture_default_str();
    gen->add_option("--out", gen_out, "Output directory")->capture_default_str();

    // train
    TrainFlags tf;
    auto* train_cmd = app.add_subcommand("train", "Train a model on a CSV dataset");
    train_cmd->add_option("--data", tf.data_path, "CSV file")->required();
    train_cmd->add_option("--schema", tf.schema_path, "Schema config JSON (or generate sidecar)")
        ->required();
    train_cmd->add_option("--arch", tf.arch, "Architecture: regression, k1, k1+2, k1+2+res, dense")
        ->capture_default_str();
    train_cmd->add_option("--mode", tf.mode, "Training mode: stepwise or all-at-once")
        ->check(CLI::IsMember({"stepwise", "all-at-once"}))
        ->capture_default_str();
    train_cmd->add_option("--out", tf.out_path, "Model archive path")->capture_default_str();
    train_cmd->add_option("--seed", tf.seed, "Training seed")->capture_default_str();
    train_cmd->add_option("--split-seed", tf.split_seed, "Holdout split seed (default: --seed)");
    train_cmd->add_option("--val-fraction", tf.val_fraction, "Holdout validation fraction")
        ->capture_default_str();
    train_cmd->add_option("--max-epochs", tf.max_epochs, "Epoch cap per phase")->capture_default_str();
    train_cmd->add_option("--patience", tf.patience, "Early-stopping patience")->capture_default_str();
    train_cmd->add_option("--min-delta", tf.min_delta, "Early-stopping improvement tolerance")
        ->capture_default_str();
    train_cmd->add_option("--batch-size", tf.batch_size, "Mini-batch size")->capture_default_str();
    train_cmd->add_option("--learning-rate", tf.learning_rate, "Adam learning rate")
        ->capture_default_str();
    train_cmd->add_flag("--no-class-balancing", tf.no_class_balancing,
                        "Disable class balancing for classification");
    train_cmd->add_option("--level-hidden", tf.level_hidden, "Hidden sizes of subset networks")
        ->delimiter(',')
        ->capture_default_str();
    train_cmd->add_option("--residual-hidden", tf.residual_hidden, "Hidden sizes of the residual network")
        ->delimiter(',')
        ->capture_default_str();
    train_cmd->add_option("--dense-hidden", tf.dense_hidden, "Hidden sizes of the dense architecture")
        ->delimiter(',')
        ->capture_default_str();
    train_cmd->add_flag("--verbose", tf.verbose, "Print per-epoch progress to stderr");

    // evaluate
    std::string eval_model, eval_data, eval_split = "val";
    auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a trained model on a CSV dataset");
    eval_cmd->add_option("--model", eval_model, "Model archive path")->required();
    eval_cmd->add_option("--data", eval_data, "CSV file")->required();
    eval_cmd->add_option("--split", eval_split, "Rows to score: val, train or all")
        ->check(CLI::IsMember({"val", "train", "all"}))
        ->capture_default_str();

    // export-functions
    std::string ex_model, ex_out = ".";
    std::vector<std::string> ex_features, ex_pairs;
    int ex_points = 0;
    bool ex_combined = false;
    auto* ex_cmd = app.add_subcommand("export-functions",
                                      "Export learned shape/interaction functions as grids");
    ex_cmd->add_option("--model", ex_model, "Model archive path")->required();
    ex_cmd->add_option("--feature", ex_features, "Level-1 feature to export (repeatable)");
    ex_cmd->add_option("--pair", ex_pairs, "Level-2 pair to export as 'a,b' (repeatable)");
    ex_cmd->add_option("--points", ex_points,
                       "Grid points per continuous axis (default 256 for 1D, 64 for 2D)");
    ex_cmd->add_flag("--combined", ex_combined, "Add the level-1 contributions into 2D grids");
    ex_cmd->add_option("--out", ex_out, "Output directory")->capture_default_str();

    // benchmark
    std::string bench_suite, bench_out;
    std::optional<int> bench_jobs;
    auto* bench_cmd = app.add_subcommand("benchmark", "Run a benchmark suite and print the table");
    bench_cmd->add_option("--suite", bench_suite, "Suite config JSON")->required();
    bench_cmd->add_option("--out", bench_out, "Report JSON path");
    bench_cmd->add_option("--jobs", bench_jobs, "Worker threads (overrides suite config)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (gen->parsed()) return run_generate(gen_dataset, gen_rows, gen_seed, gen_out);
        if (train_cmd->parsed()) return run_train(tf);
        if (eval_cmd->parsed()) return run_evaluate(eval_model, eval_data, eval_split);
        if (ex_cmd->parsed())
            return run_export(ex_model, ex_features, ex_pairs, ex_points, ex_combined, ex_out);
        if (bench_cmd->parsed()) return run_benchmark(bench_suite, bench_out, bench_jobs);
    } catch (const CLI::ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
