#pragma once

#include <atomic>
#include <mutex>
#include <thread>

#include "regnet/interpret.hpp"

namespace regnet {

// The five-way comparison of the benchmark tables.
enum class Architecture { Regression, K1, K1Plus2, K1Plus2Res, Dense };

inline const char* to_string(Architecture a) {
    switch (a) {
        case Architecture::Regression: return "regression";
        case Architecture::K1: return "k1";
        case Architecture::K1Plus2: return "k1+2";
        case Architecture::K1Plus2Res: return "k1+2+res";
        case Architecture::Dense: return "dense";
    }
    return "?";
}

inline Architecture architecture_from_string(const std::string& s) {
    for (Architecture a : {Architecture::Regression, Architecture::K1, Architecture::K1Plus2,
                           Architecture::K1Plus2Res, Architecture::Dense})
        if (s == to_string(a)) return a;
    throw std::invalid_argument("unknown architecture '" + s + "'");
}

// ModelSpec for one benchmark column. The dense baseline lives in the same
// framework as every other column: subsets = {} plus a residual network.
inline ModelSpec architecture_spec(Architecture arch, const SubnetTemplate& level,
                                   const SubnetTemplate& residual, const SubnetTemplate& dense) {
    ModelSpec spec;
    spec.default_template = level;
    spec.residual_template = residual;
    switch (arch) {
        case Architecture::Regression:
            spec.k_max = 1;
            spec.default_template = SubnetTemplate{{}, Activation::ELU};
            break;
        case Architecture::K1: spec.k_max = 1; break;
        case Architecture::K1Plus2: spec.k_max = 2; break;
        case Architecture::K1Plus2Res:
            spec.k_max = 2;
            spec.include_residual = true;
            break;
        case Architecture::Dense:
            spec.explicit_subsets = std::vector<FeatureSubset>{};
            spec.include_residual = true;
            spec.residual_template = dense;
            break;
    }
    return spec;
}

struct DatasetRef {
    std::string name;
    std::string csv_path;     // empty: synthetic, generated from `name`
    std::string schema_path;  // required with csv_path
    int rows = 10000;         // synthetic only

    bool synthetic() const { return csv_path.empty(); }
};

struct SuiteConfig {
    std::vector<DatasetRef> datasets;
    std::vector<Architecture> architectures{Architecture::Regression, Architecture::K1,
                                            Architecture::K1Plus2, Architecture::K1Plus2Res,
                                            Architecture::Dense};
    int runs_per_cell = 5;  // at least three runs per reported value
    uint64_t base_seed = 42;
    uint64_t data_seed = 7;  // generation and split stay fixed; only training varies per run
    double val_fraction = 0.2;
    TrainConfig train;
    SubnetTemplate level_template{{16, 16}, Activation::ELU};
    SubnetTemplate residual_template{{32, 32}, Activation::ELU};
    SubnetTemplate dense_template{{64, 64}, Activation::ELU};
    int jobs = 1;

    void validate() const {
        if (datasets.empty()) throw std::invalid_argument("suite config: no datasets");
        if (architectures.empty()) throw std::invalid_argument("suite config: no architectures");
        if (runs_per_cell < 3) throw std::invalid_argument("suite config: runs_per_cell must be >= 3");
        train.validate();
    }

    static SuiteConfig from_json(const nlohmann::json& j);
    static SuiteConfig load(const std::string& path);
    nlohmann::json to_json() const;
};

// One table cell: the per-run minimum validation losses of (dataset,
// architecture), with their mean and sample standard deviation.
struct ResultCell {
    std::string dataset;
    Architecture arch = Architecture::Regression;
    LossKind metric = LossKind::MeanSquaredError;
    std::vector<double> run_values;
    double mean = 0.0;
    double stddev = 0.0;
    double target_val_variance = 0.0;  // of the validation targets, training units
    std::string error;
};

namespace detail {

inline void finalize_stats(ResultCell& cell) {
    if (cell.run_values.empty()) return;
    double s = 0.0;
    for (double v : cell.run_values) s += v;
    cell.mean = s / static_cast<double>(cell.run_values.size());
    double ss = 0.0;
    for (double v : cell.run_values) ss += (v - cell.mean) * (v - cell.mean);
    cell.stddev = cell.run_values.size() > 1
                      ? std::sqrt(ss / static_cast<double>(cell.run_values.size() - 1))
                      : 0.0;
}

struct PreparedData {
    std::string name;
    SchemaConfig schema_cfg;
    Preprocessor pre;
    Dataset train;
    Dataset val;
};

inline PreparedData prepare_dataset(const DatasetRef& ref, uint64_t data_seed,
                                    double val_fraction) {
    PreparedData out;
    out.name = ref.name;
    RawDataset raw;
    if (ref.synthetic()) {
        SyntheticName sn = synthetic_from_string(ref.name);
        raw = generate({sn, ref.rows, data_seed});
        out.schema_cfg = synthetic_schema(sn);
    } else {
        out.schema_cfg = SchemaConfig::load(ref.schema_path);
        raw = load_csv(ref.csv_path, out.schema_cfg);
    }
    auto [train_raw, val_raw] = split(raw, val_fraction, data_seed);
    out.pre = fit_preprocessor(train_raw, out.schema_cfg);
    out.train = apply_preprocessor(out.pre, train_raw);
    out.val = apply_preprocessor(out.pre, val_raw);
    return out;
}

}  // namespace detail

// Called once per completed training run, serialized by the suite mutex.
using RunHook = std::function<void(const std::string& dataset, Architecture arch, int run,
                                   const TrainedModel& tm, const Dataset& train,
                                   const Dataset& val)>;

inline std::pair<TrainedModel, TrainHistory> train_architecture(Architecture arch,
                                                                const detail::PreparedData& data,
                                                                const SuiteConfig& suite,
                                                                const TrainConfig& cfg) {
    TrainedModel tm;
    tm.preprocessor = data.pre;
    tm.split_seed = suite.data_seed;
    tm.val_fraction = suite.val_fraction;
    TrainHistory hist;
    if (arch == Architecture::Regression) {
        auto [model, h] = train_baseline_regression(data.train, data.val, cfg);
        tm.model = std::move(model);
        hist = std::move(h);
    } else {
        ModelSpec spec = architecture_spec(arch, suite.level_template, suite.residual_template,
                                           suite.dense_template);
        tm.model = build_model(data.train.schema, spec, data.train.task, cfg.seed);
        hist = train(tm.model, data.train, data.val, cfg);
    }
    tm.history = hist;
    return {std::move(tm), std::move(hist)};
}

// Runs runs_per_cell independent trainings per (dataset, architecture) with
// seeds base_seed + run; the data split never varies. Failures are recorded
// in the cell, not fatal to the suite.
inline std::vector<ResultCell> run_suite(const SuiteConfig& config, const RunHook& hook = {}) {
    config.validate();
    std::vector<detail::PreparedData> prepared;
    std::vector<std::string> prep_errors(config.datasets.size());
    for (const auto& ref : config.datasets) {
        try {
            prepared.push_back(detail::prepare_dataset(ref, config.data_seed, config.val_fraction));
        } catch (const std::exception& e) {
            prepared.push_back({});
            prepared.back().name = ref.name;
            prep_errors[prepared.size() - 1] = e.what();
        }
    }

    size_t n_arch = config.architectures.size();
    std::vector<ResultCell> cells(prepared.size() * n_arch);
    std::atomic<size_t> next{0};
    std::mutex hook_mutex;

    auto worker = [&] {
        for (;;) {
            size_t task = next.fetch_add(1);
            if (task >= cells.size()) return;
            size_t di = task / n_arch;
            Architecture arch = config.architectures[task % n_arch];
            const auto& data = prepared[di];
            ResultCell& cell = cells[task];
            cell.dataset = data.name;
            cell.arch = arch;
            if (!prep_errors[di].empty()) {
                cell.error = prep_errors[di];
                continue;
            }
            cell.metric = loss_for_task(data.train.task);
            double sd = population_sd(data.val.y);
            cell.target_val_variance = sd * sd;
            for (int run = 0; run < config.runs_per_cell; ++run) {
                try {
                    TrainConfig cfg = config.train;
                    cfg.seed = config.base_seed + static_cast<uint64_t>(run);
                    auto [tm, hist] = train_architecture(arch, data, config, cfg);
                    cell.run_values.push_back(hist.min_val_loss());
                    if (hook) {
                        std::lock_guard<std::mutex> lock(hook_mutex);
                        hook(data.name, arch, run, tm, data.train, data.val);
                    }
                } catch (const std::exception& e) {
                    cell.error = e.what();
                    break;
                }
            }
            detail::finalize_stats(cell);
        }
    };

    int jobs = std::max(1, config.jobs);
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (int i = 0; i < jobs; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    return cells;
}

// "mean (std)" with the mean at sig_figs significant figures and the
// standard deviation at two; the best (lowest-mean) cell per row is starred.
inline std::string format_sig(double v, int sig_figs) {
    if (v == 0.0) return "0";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", sig_figs, v);
    return buf;
}

inline std::string format_table(const std::vector<ResultCell>& cells, int sig_figs = 5) {
    if (cells.empty()) throw std::invalid_argument("format_table: no cells");
    std::vector<std::string> datasets;
    std::vector<Architecture> archs;
    for (const auto& c : cells) {
        if (std::find(datasets.begin(), datasets.end(), c.dataset) == datasets.end())
            datasets.push_back(c.dataset);
        if (std::find(archs.begin(), archs.end(), c.arch) == archs.end()) archs.push_back(c.arch);
    }
    auto find_cell = [&](const std::string& ds, Architecture a) -> const ResultCell* {
        for (const auto& c : cells)
            if (c.dataset == ds && c.arch == a) return &c;
        return nullptr;
    };

    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> header{"dataset"};
    for (Architecture a : archs) header.emplace_back(to_string(a));
    rows.push_back(header);
    for (const auto& ds : datasets) {
        double best = std::numeric_limits<double>::infinity();
        for (Architecture a : archs)
            if (const ResultCell* c = find_cell(ds, a); c && c->error.empty() && !c->run_values.empty())
                best = std::min(best, c->mean);
        std::vector<std::string> row{ds};
        for (Architecture a : archs) {
            const ResultCell* c = find_cell(ds, a);
            if (!c) row.emplace_back("-");
            else if (!c->error.empty() || c->run_values.empty()) row.emplace_back("error");
            else {
                std::string s = format_sig(c->mean, sig_figs) + " (" + format_sig(c->stddev, 2) + ")";
                if (c->mean == best) s += " *";
                row.push_back(s);
            }
        }
        rows.push_back(row);
    }

    std::vector<size_t> widths(rows[0].size(), 0);
    for (const auto& row : rows)
        for (size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
    std::string out;
    for (const auto& row : rows) {
        for (size_t i = 0; i < row.size(); ++i) {
            out += row[i];
            if (i + 1 < row.size()) out.append(widths[i] - row[i].size() + 2, ' ');
        }
        out += '\n';
    }
    return out;
}

inline nlohmann::json report_json(const SuiteConfig& config, const std::vector<ResultCell>& cells) {
    nlohmann::json j;
    j["suite"] = config.to_json();
    auto arr = nlohmann::json::array();
    for (const auto& c : cells) {
        nlohmann::json e;
        e["dataset"] = c.dataset;
        e["architecture"] = to_string(c.arch);
        e["metric"] = c.metric == LossKind::MeanSquaredError ? "mse" : "bce";
        e["runs"] = c.run_values;
        e["mean"] = c.mean;
        e["stddev"] = c.stddev;
        e["target_val_variance"] = c.target_val_variance;
        e["error"] = c.error;
        arr.push_back(e);
    }
    j["cells"] = arr;
    return j;
}

// --- suite config JSON -------------------------------------------------

namespace detail {

inline SubnetTemplate template_from_suite_json(const nlohmann::json& j) {
    SubnetTemplate t;
    if (j.is_array()) {
        t.hidden = j.get<std::vector<int>>();
    } else {
        t = template_from_json(j);
    }
    return t;
}

}  // namespace detail

inline SuiteConfig SuiteConfig::from_json(const nlohmann::json& j) {
    SuiteConfig cfg;
    cfg.datasets.clear();
    for (const auto& d : j.at("datasets")) {
        DatasetRef ref;
        if (d.is_string()) {
            ref.name = d.get<std::string>();
        } else {
            ref.name = d.at("name").get<std::string>();
            ref.csv_path = d.value("csv", "");
            ref.schema_path = d.value("schema", "");
            ref.rows = d.value("rows", 10000);
            if (!ref.csv_path.empty() && ref.schema_path.empty())
                throw std::invalid_argument("suite config: csv dataset needs a schema path");
        }
        cfg.datasets.push_back(std::move(ref));
    }
    if (j.contains("architectures")) {
        cfg.architectures.clear();
        for (const auto& a : j.at("architectures"))
            cfg.architectures.push_back(architecture_from_string(a.get<std::string>()));
    }
    cfg.runs_per_cell = j.value("runs_per_cell", 5);
    cfg.base_seed = j.value("base_seed", uint64_t{42});
    cfg.data_seed = j.value("data_seed", uint64_t{7});
    cfg.val_fraction = j.value("val_fraction", 0.2);
    cfg.jobs = j.value("jobs", 1);
    if (j.contains("train")) {
        const auto& t = j.at("train");
        cfg.train.max_epochs = t.value("max_epochs", cfg.train.max_epochs);
        cfg.train.patience = t.value("patience", cfg.train.patience);
        cfg.train.min_delta = t.value("min_delta", cfg.train.min_delta);
        cfg.train.batch_size = t.value("batch_size", cfg.train.batch_size);
        cfg.train.learning_rate = t.value("learning_rate", cfg.train.learning_rate);
        cfg.train.beta1 = t.value("beta1", cfg.train.beta1);
        cfg.train.beta2 = t.value("beta2", cfg.train.beta2);
        cfg.train.epsilon = t.value("epsilon", cfg.train.epsilon);
        cfg.train.class_balancing = t.value("class_balancing", cfg.train.class_balancing);
        std::string mode = t.value("mode", "stepwise");
        if (mode == "stepwise") cfg.train.mode = TrainMode::StepWise;
        else if (mode == "all-at-once") cfg.train.mode = TrainMode::AllAtOnce;
        else throw std::invalid_argument("suite config: unknown train mode '" + mode + "'");
    }
    if (j.contains("templates")) {
        const auto& t = j.at("templates");
        if (t.contains("level")) cfg.level_template = detail::template_from_suite_json(t.at("level"));
        if (t.contains("residual"))
            cfg.residual_template = detail::template_from_suite_json(t.at("residual"));
        if (t.contains("dense")) cfg.dense_template = detail::template_from_suite_json(t.at("dense"));
    }
    return cfg;
}

inline SuiteConfig SuiteConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open suite config: " + path);
    return from_json(nlohmann::json::parse(in));
}

inline nlohmann::json SuiteConfig::to_json() const {
    nlohmann::json j;
    auto ds = nlohmann::json::array();
    for (const auto& ref : datasets) {
        if (ref.synthetic() && ref.rows == 10000) {
            ds.push_back(ref.name);
        } else {
            nlohmann::json d;
            d["name"] = ref.name;
            if (!ref.csv_path.empty()) {
                d["csv"] = ref.csv_path;
                d["schema"] = ref.schema_path;
            } else {
                d["rows"] = ref.rows;
            }
            ds.push_back(d);
        }
    }
    j["datasets"] = ds;
    auto archs = nlohmann::json::array();
    for (Architecture a : architectures) archs.push_back(to_string(a));
    j["architectures"] = archs;
    j["runs_per_cell"] = runs_per_cell;
    j["base_seed"] = base_seed;
    j["data_seed"] = data_seed;
    j["val_fraction"] = val_fraction;
    j["jobs"] = jobs;
    j["train"] = {{"max_epochs", train.max_epochs},
                  {"patience", train.patience},
                  {"min_delta", train.min_delta},
                  {"batch_size", train.batch_size},
                  {"learning_rate", train.learning_rate},
                  {"beta1", train.beta1},
                  {"beta2", train.beta2},
                  {"epsilon", train.epsilon},
                  {"class_balancing", train.class_balancing},
                  {"mode", train.mode == TrainMode::StepWise ? "stepwise" : "all-at-once"}};
    j["templates"] = {{"level", detail::template_to_json(level_template)},
                      {"residual", detail::template_to_json(residual_template)},
                      {"dense", detail::template_to_json(dense_template)}};
    return j;
}

}  // namespace regnet
