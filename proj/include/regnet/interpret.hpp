#pragma once

#include "regnet/synthetic.hpp"
#include "regnet/trainer.hpp"

namespace regnet {

constexpr int kModelArchiveVersion = 1;

struct GridAxis {
    std::string feature;
    bool categorical = false;
    Vector values;                    // raw units, continuous axes
    std::vector<std::string> labels;  // categorical axes

    size_t size() const { return categorical ? labels.size() : values.size(); }
};

// A learned function evaluated over a 1D or 2D grid of raw feature values.
// Contributions are in model-output units (target units for regression,
// logits for classification); only the axes are in raw units.
struct FunctionGrid {
    FeatureSubset subset;
    std::vector<GridAxis> axes;
    Vector values;  // row-major over axes
    bool combined = false;

    double at(size_t i) const { return values[i]; }
    double at(size_t i, size_t j) const { return values[i * axes[1].size() + j]; }
};

namespace detail {

inline int group_index(const std::vector<FeatureGroup>& schema, const std::string& feature) {
    for (size_t i = 0; i < schema.size(); ++i)
        if (schema[i].name == feature) return static_cast<int>(i);
    throw std::invalid_argument("unknown feature '" + feature + "'");
}

// Axis points plus their encoded forms, one encoded row per point.
struct AxisEncoding {
    GridAxis axis;
    std::vector<Vector> encoded;  // span-wide blocks
};

inline AxisEncoding axis_for(const RegressionNetwork& model, const Preprocessor& pre,
                             int group_idx, int n_points) {
    const FeatureGroup& g = model.schema[group_idx];
    AxisEncoding out;
    out.axis.feature = g.name;
    if (g.kind == FeatureGroup::Kind::Continuous) {
        const auto& st = pre.continuous.at(g.name);
        int n = std::max(n_points, 2);
        for (int i = 0; i < n; ++i) {
            // endpoints hit the training min/max exactly
            double v = i == 0      ? st.min
                       : i == n - 1 ? st.max
                                    : st.min + (st.max - st.min) * static_cast<double>(i) / (n - 1);
            out.axis.values.push_back(v);
            out.encoded.push_back({(v - st.mean) / st.sd});
        }
    } else {
        out.axis.categorical = true;
        const auto& vocab = pre.categorical.at(g.name);
        for (size_t idx = 0; idx < vocab.categories.size(); ++idx) {
            out.axis.labels.push_back(vocab.categories[idx]);
            if (g.kind == FeatureGroup::Kind::CategoricalOneHot) {
                Vector block(g.span(), 0.0);
                block[idx] = 1.0;
                out.encoded.push_back(std::move(block));
            } else {
                out.encoded.push_back({static_cast<double>(idx)});
            }
        }
    }
    return out;
}

}  // namespace detail

// Shape function of a single feature: contribution of f_{feature} over an
// evenly spaced raw-unit grid (continuous) or one value per category.
inline FunctionGrid grid_1d(const RegressionNetwork& model, const Preprocessor& pre,
                            const std::string& feature, int n_points = 256) {
    int gi = detail::group_index(model.schema, feature);
    FeatureSubset subset{gi};
    auto it = model.subnets.find(subset);
    if (it == model.subnets.end())
        throw std::invalid_argument("grid_1d: '" + feature + "' is not a level-1 subset of the model");
    auto enc = detail::axis_for(model, pre, gi, n_points);

    Matrix batch(static_cast<int>(enc.encoded.size()), model.schema[gi].span());
    for (size_t r = 0; r < enc.encoded.size(); ++r)
        for (size_t c = 0; c < enc.encoded[r].size(); ++c)
            batch(static_cast<int>(r), static_cast<int>(c)) = enc.encoded[r][c];

    FunctionGrid grid;
    grid.subset = subset;
    grid.axes.push_back(std::move(enc.axis));
    grid.values = forward(it->second, batch);
    return grid;
}

// Interaction function of a feature pair over the product grid. In combined
// mode the two level-1 contributions are added in, giving the full joint
// effect of the pair.
inline FunctionGrid grid_2d(const RegressionNetwork& model, const Preprocessor& pre,
                            const std::string& feature_a, const std::string& feature_b,
                            int n_points = 64, bool combined = false) {
    int ga = detail::group_index(model.schema, feature_a);
    int gb = detail::group_index(model.schema, feature_b);
    if (ga == gb) throw std::invalid_argument("grid_2d: need two distinct features");
    if (ga > gb) std::swap(ga, gb);
    FeatureSubset subset{ga, gb};
    auto it = model.subnets.find(subset);
    if (it == model.subnets.end())
        throw std::invalid_argument("grid_2d: requested pair is not a level-2 subset of the model");

    auto ea = detail::axis_for(model, pre, ga, n_points);
    auto eb = detail::axis_for(model, pre, gb, n_points);
    size_t na = ea.encoded.size(), nb = eb.encoded.size();
    int span_a = model.schema[ga].span(), span_b = model.schema[gb].span();

    Matrix batch(static_cast<int>(na * nb), span_a + span_b);
    for (size_t i = 0; i < na; ++i)
        for (size_t j = 0; j < nb; ++j) {
            int r = static_cast<int>(i * nb + j);
            for (int c = 0; c < span_a; ++c) batch(r, c) = ea.encoded[i][c];
            for (int c = 0; c < span_b; ++c) batch(r, span_a + c) = eb.encoded[j][c];
        }

    FunctionGrid grid;
    grid.subset = subset;
    grid.values = forward(it->second, batch);
    grid.axes.push_back(std::move(ea.axis));
    grid.axes.push_back(std::move(eb.axis));
    if (combined) {
        grid.combined = true;
        FunctionGrid fa = grid_1d(model, pre, model.schema[ga].name,
                                  static_cast<int>(na));
        FunctionGrid fb = grid_1d(model, pre, model.schema[gb].name,
                                  static_cast<int>(nb));
        for (size_t i = 0; i < na; ++i)
            for (size_t j = 0; j < nb; ++j) {
                grid.values[i * nb + j] += fa.values[i];
                grid.values[i * nb + j] += fb.values[j];
            }
    }
    return grid;
}

inline std::string grid_to_csv(const FunctionGrid& grid) {
    std::string out;
    for (const auto& ax : grid.axes) {
        out += ax.feature;
        out += ',';
    }
    out += "value\n";
    auto axis_cell = [](const GridAxis& ax, size_t i) {
        return ax.categorical ? ax.labels[i] : format_double(ax.values[i]);
    };
    if (grid.axes.size() == 1) {
        for (size_t i = 0; i < grid.values.size(); ++i)
            out += axis_cell(grid.axes[0], i) + "," + format_double(grid.values[i]) + "\n";
    } else {
        size_t nb = grid.axes[1].size();
        for (size_t i = 0; i < grid.axes[0].size(); ++i)
            for (size_t j = 0; j < nb; ++j)
                out += axis_cell(grid.axes[0], i) + "," + axis_cell(grid.axes[1], j) + "," +
                       format_double(grid.values[i * nb + j]) + "\n";
    }
    return out;
}

inline nlohmann::json grid_to_json(const FunctionGrid& grid) {
    nlohmann::json j;
    j["subset"] = grid.subset.indices;
    j["combined"] = grid.combined;
    j["axes"] = nlohmann::json::array();
    for (const auto& ax : grid.axes) {
        nlohmann::json a;
        a["feature"] = ax.feature;
        a["categorical"] = ax.categorical;
        if (ax.categorical) a["labels"] = ax.labels;
        else a["values"] = ax.values;
        j["axes"].push_back(a);
    }
    j["values"] = grid.values;  // row-major
    return j;
}

// --- model archive -----------------------------------------------------

namespace detail {

inline std::string activation_name(Activation a) { return a == Activation::ReLU ? "relu" : "elu"; }

inline Activation activation_from(const std::string& s) {
    if (s == "relu") return Activation::ReLU;
    if (s == "elu") return Activation::ELU;
    throw std::runtime_error("unknown activation '" + s + "'");
}

inline nlohmann::json params_to_json(const ParamSet& p) {
    if (!std::all_of(p.weights.begin(), p.weights.end(), [](const Matrix& m) { return all_finite(m); }) ||
        !std::all_of(p.biases.begin(), p.biases.end(), [](const Vector& v) { return all_finite(v); }))
        throw std::runtime_error("save_model: non-finite parameter");
    nlohmann::json j;
    j["activation"] = activation_name(p.spec.activation);
    j["layer_sizes"] = p.spec.layer_sizes;
    auto weights = nlohmann::json::array();
    for (const auto& w : p.weights) {
        auto layer = nlohmann::json::array();
        for (int r = 0; r < w.rows; ++r)
            layer.push_back(std::vector<double>(w.row(r), w.row(r) + w.cols));
        weights.push_back(layer);
    }
    j["weights"] = weights;
    j["biases"] = p.biases;
    return j;
}

inline ParamSet params_from_json(const nlohmann::json& j) {
    ParamSet p;
    p.spec.layer_sizes = j.at("layer_sizes").get<std::vector<int>>();
    p.spec.activation = activation_from(j.at("activation").get<std::string>());
    p.spec.validate();
    const auto& weights = j.at("weights");
    const auto& biases = j.at("biases");
    if (static_cast<int>(weights.size()) != p.spec.n_layers() ||
        static_cast<int>(biases.size()) != p.spec.n_layers())
        throw std::runtime_error("model archive: layer count mismatch");
    for (int l = 0; l < p.spec.n_layers(); ++l) {
        int rows = p.spec.layer_sizes[l + 1], cols = p.spec.layer_sizes[l];
        Matrix w(rows, cols);
        const auto& jw = weights[l];
        if (static_cast<int>(jw.size()) != rows) throw std::runtime_error("model archive: weight shape mismatch");
        for (int r = 0; r < rows; ++r) {
            auto row = jw[r].get<std::vector<double>>();
            if (static_cast<int>(row.size()) != cols)
                throw std::runtime_error("model archive: weight shape mismatch");
            for (int c = 0; c < cols; ++c) w(r, c) = row[c];
        }
        Vector b = biases[l].get<Vector>();
        if (static_cast<int>(b.size()) != rows) throw std::runtime_error("model archive: bias shape mismatch");
        if (!all_finite(w) || !all_finite(b)) throw std::runtime_error("model archive: non-finite parameter");
        p.weights.push_back(std::move(w));
        p.biases.push_back(std::move(b));
    }
    return p;
}

inline nlohmann::json template_to_json(const SubnetTemplate& t) {
    return {{"hidden", t.hidden}, {"activation", activation_name(t.activation)}};
}

inline SubnetTemplate template_from_json(const nlohmann::json& j) {
    SubnetTemplate t;
    t.hidden = j.at("hidden").get<std::vector<int>>();
    t.activation = activation_from(j.at("activation").get<std::string>());
    return t;
}

inline std::string task_name(TaskKind t) {
    return t == TaskKind::Regression ? "regression" : "binary_classification";
}

inline TaskKind task_from(const std::string& s) {
    if (s == "regression") return TaskKind::Regression;
    if (s == "binary_classification") return TaskKind::BinaryClassification;
    throw std::runtime_error("unknown task '" + s + "'");
}

}  // namespace detail

// Everything needed to reuse a trained model: the network, the fitted
// preprocessor, and how the data was split during training.
struct TrainedModel {
    RegressionNetwork model;
    Preprocessor preprocessor;
    TrainHistory history;
    uint64_t split_seed = 0;
    double val_fraction = 0.2;
};

inline nlohmann::json model_to_json(const TrainedModel& tm) {
    const RegressionNetwork& m = tm.model;
    nlohmann::json j;
    j["format"] = "regression-network";
    j["format_version"] = kModelArchiveVersion;
    j["task"] = detail::task_name(m.task);
    j["bias"] = m.bias;

    nlohmann::json spec;
    spec["k_max"] = m.spec.k_max;
    spec["include_bias"] = m.spec.include_bias;
    spec["include_residual"] = m.spec.include_residual;
    spec["default_template"] = detail::template_to_json(m.spec.default_template);
    spec["residual_template"] = detail::template_to_json(m.spec.residual_template);
    nlohmann::json lt = nlohmann::json::object();
    for (const auto& [level, t] : m.spec.level_templates)
        lt[std::to_string(level)] = detail::template_to_json(t);
    spec["level_templates"] = lt;
    if (m.spec.explicit_subsets) {
        auto arr = nlohmann::json::array();
        for (const auto& s : *m.spec.explicit_subsets) arr.push_back(s.indices);
        spec["explicit_subsets"] = arr;
    } else {
        spec["explicit_subsets"] = nullptr;
    }
    j["model_spec"] = spec;

    auto schema = nlohmann::json::array();
    for (const auto& g : m.schema) {
        const char* kind = g.kind == FeatureGroup::Kind::Continuous ? "continuous"
                           : g.kind == FeatureGroup::Kind::CategoricalOneHot ? "one_hot"
                                                                             : "ordinal";
        schema.push_back({{"name", g.name},
                          {"kind", kind},
                          {"cardinality", g.cardinality},
                          {"col_start", g.col_start}});
    }
    j["schema"] = schema;

    auto subnets = nlohmann::json::array();
    for (const auto& [s, params] : m.subnets) {
        nlohmann::json e = detail::params_to_json(params);
        e["subset"] = s.indices;
        subnets.push_back(e);
    }
    j["subnets"] = subnets;
    j["residual"] = m.residual ? detail::params_to_json(*m.residual) : nlohmann::json(nullptr);

    const Preprocessor& pre = tm.preprocessor;
    nlohmann::json jp;
    jp["task"] = detail::task_name(pre.task);
    jp["target_name"] = pre.target_name;
    jp["standardize_target"] = pre.standardize_target;
    jp["target_mean"] = pre.target_mean;
    jp["target_sd"] = pre.target_sd;
    jp["feature_names"] = pre.feature_names;
    nlohmann::json jc = nlohmann::json::object();
    for (const auto& [name, st] : pre.continuous)
        jc[name] = {{"mean", st.mean}, {"sd", st.sd}, {"min", st.min}, {"max", st.max}};
    jp["continuous"] = jc;
    nlohmann::json jv = nlohmann::json::object();
    for (const auto& [name, vocab] : pre.categorical)
        jv[name] = {{"categories", vocab.categories}, {"one_hot", vocab.one_hot}};
    jp["categorical"] = jv;
    j["preprocessor"] = jp;

    nlohmann::json jh;
    jh["final_val_loss"] = std::isfinite(tm.history.final_val_loss)
                               ? nlohmann::json(tm.history.final_val_loss)
                               : nlohmann::json(nullptr);
    auto phases = nlohmann::json::array();
    for (const auto& p : tm.history.phases)
        phases.push_back({{"phase", p.phase},
                          {"epochs", p.epochs.size()},
                          {"best_epoch", p.best_epoch},
                          {"best_val_loss", std::isfinite(p.best_val_loss)
                                                ? nlohmann::json(p.best_val_loss)
                                                : nlohmann::json(nullptr)},
                          {"stopped_early", p.stopped_early},
                          {"nan_abort", p.nan_abort}});
    jh["phases"] = phases;
    j["train_history"] = jh;

    j["data_split"] = {{"seed", tm.split_seed}, {"val_fraction", tm.val_fraction}};
    return j;
}

inline void save_model(const TrainedModel& tm, const std::string& path) {
    write_file(path, model_to_json(tm).dump(1) + "\n");
}

inline TrainedModel model_from_json(const nlohmann::json& j) {
    int version = j.at("format_version").get<int>();
    if (version != kModelArchiveVersion)
        throw std::runtime_error("unsupported model archive version " + std::to_string(version));

    TrainedModel tm;
    RegressionNetwork& m = tm.model;
    m.task = detail::task_from(j.at("task").get<std::string>());
    m.bias = j.at("bias").get<double>();

    const auto& spec = j.at("model_spec");
    m.spec.k_max = spec.at("k_max").get<int>();
    m.spec.include_bias = spec.at("include_bias").get<bool>();
    m.spec.include_residual = spec.at("include_residual").get<bool>();
    m.spec.default_template = detail::template_from_json(spec.at("default_template"));
    m.spec.residual_template = detail::template_from_json(spec.at("residual_template"));
    for (const auto& [k, t] : spec.at("level_templates").items())
        m.spec.level_templates[std::stoi(k)] = detail::template_from_json(t);
    if (!spec.at("explicit_subsets").is_null()) {
        std::vector<FeatureSubset> subsets;
        for (const auto& s : spec.at("explicit_subsets"))
            subsets.push_back(FeatureSubset(s.get<std::vector<int>>()));
        m.spec.explicit_subsets = std::move(subsets);
    }

    for (const auto& g : j.at("schema")) {
        FeatureGroup fg;
        fg.name = g.at("name").get<std::string>();
        std::string kind = g.at("kind").get<std::string>();
        fg.kind = kind == "continuous" ? FeatureGroup::Kind::Continuous
                  : kind == "one_hot"  ? FeatureGroup::Kind::CategoricalOneHot
                                       : FeatureGroup::Kind::CategoricalOrdinal;
        fg.cardinality = g.at("cardinality").get<int>();
        fg.col_start = g.at("col_start").get<int>();
        m.schema.push_back(std::move(fg));
    }

    for (const auto& e : j.at("subnets")) {
        FeatureSubset s(e.at("subset").get<std::vector<int>>());
        ParamSet p = detail::params_from_json(e);
        if (p.spec.input_dim() != static_cast<int>(m.subset_columns(s).size()))
            throw std::runtime_error("model archive: subnet width does not match subset span");
        m.subnets.emplace(std::move(s), std::move(p));
    }
    if (!j.at("residual").is_null()) m.residual = detail::params_from_json(j.at("residual"));

    const auto& jp = j.at("preprocessor");
    Preprocessor& pre = tm.preprocessor;
    pre.task = detail::task_from(jp.at("task").get<std::string>());
    pre.target_name = jp.at("target_name").get<std::string>();
    pre.standardize_target = jp.at("standardize_target").get<bool>();
    pre.target_mean = jp.at("target_mean").get<double>();
    pre.target_sd = jp.at("target_sd").get<double>();
    pre.feature_names = jp.at("feature_names").get<std::vector<std::string>>();
    for (const auto& [name, st] : jp.at("continuous").items())
        pre.continuous[name] = {st.at("mean").get<double>(), st.at("sd").get<double>(),
                                st.at("min").get<double>(), st.at("max").get<double>()};
    for (const auto& [name, v] : jp.at("categorical").items()) {
        CategoricalVocab vocab;
        vocab.categories = v.at("categories").get<std::vector<std::string>>();
        vocab.one_hot = v.at("one_hot").get<bool>();
        pre.categorical[name] = std::move(vocab);
    }

    const auto& jh = j.at("train_history");
    tm.history.final_val_loss = jh.at("final_val_loss").is_null()
                                    ? std::numeric_limits<double>::infinity()
                                    : jh.at("final_val_loss").get<double>();
    for (const auto& p : jh.at("phases")) {
        PhaseHistory ph;
        ph.phase = p.at("phase").get<std::string>();
        ph.epochs.resize(p.at("epochs").get<size_t>());  // lengths only; curves are not archived
        ph.best_epoch = p.at("best_epoch").get<int>();
        ph.best_val_loss = p.at("best_val_loss").is_null()
                               ? std::numeric_limits<double>::infinity()
                               : p.at("best_val_loss").get<double>();
        ph.stopped_early = p.at("stopped_early").get<bool>();
        ph.nan_abort = p.at("nan_abort").get<bool>();
        tm.history.phases.push_back(std::move(ph));
    }

    tm.split_seed = j.at("data_split").at("seed").get<uint64_t>();
    tm.val_fraction = j.at("data_split").at("val_fraction").get<double>();
    return tm;
}

inline TrainedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open model archive: " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
        return model_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("corrupt model archive " + path + ": " + e.what());
    }
}

}  // namespace regnet
