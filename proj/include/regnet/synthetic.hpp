#pragma once

#include <array>
#include <functional>

#include "regnet/data.hpp"

namespace regnet {

enum class SyntheticName { Add, AddMultiply, Complex, Importance, Categorical, CategoricalInteract };

inline const char* to_string(SyntheticName n) {
    switch (n) {
        case SyntheticName::Add: return "add";
        case SyntheticName::AddMultiply: return "add_multiply";
        case SyntheticName::Complex: return "complex";
        case SyntheticName::Importance: return "importance";
        case SyntheticName::Categorical: return "categorical";
        case SyntheticName::CategoricalInteract: return "categorical_interact";
    }
    return "?";
}

inline SyntheticName synthetic_from_string(const std::string& s) {
    for (SyntheticName n : {SyntheticName::Add, SyntheticName::AddMultiply, SyntheticName::Complex,
                            SyntheticName::Importance, SyntheticName::Categorical,
                            SyntheticName::CategoricalInteract})
        if (s == to_string(n)) return n;
    throw std::invalid_argument("unknown synthetic dataset '" + s + "'");
}

struct SyntheticSpec {
    SyntheticName name = SyntheticName::Add;
    int n_rows = 10000;
    uint64_t seed = 42;
};

// Mappings from the categorical levels a in {0..3} and b in {0,1} to values
// in [-5,5]. h is checked to be non-decomposable: no pair of univariate
// functions reproduces it.
struct CategoricalMaps {
    std::array<double, 4> f{};
    std::array<double, 2> g{};
    std::array<double, 8> h{};  // h[a*2 + b]

    double h_at(int a, int b) const { return h[a * 2 + b]; }

    bool h_is_decomposable() const {
        for (int a = 0; a < 4; ++a)
            for (int a2 = a + 1; a2 < 4; ++a2)
                if (h_at(a, 0) + h_at(a2, 1) != h_at(a, 1) + h_at(a2, 0)) return false;
        return true;
    }
};

inline CategoricalMaps categorical_maps(uint64_t seed) {
    Rng rng(mix64(seed, 0x434d4150ULL));  // "CMAP"
    CategoricalMaps maps;
    for (double& v : maps.f) v = rng.uniform(-5.0, 5.0);
    for (double& v : maps.g) v = rng.uniform(-5.0, 5.0);
    for (double& v : maps.h) v = rng.uniform(-5.0, 5.0);
    if (maps.h_is_decomposable())
        throw std::runtime_error("categorical_maps: degenerate h mapping for this seed");
    return maps;
}

namespace detail {

struct SyntheticLayout {
    bool has_x = false, has_y = false, has_q = false, has_a = false, has_b = false;
};

inline SyntheticLayout synthetic_layout(SyntheticName name) {
    SyntheticLayout l;
    switch (name) {
        case SyntheticName::Add:
        case SyntheticName::AddMultiply:
        case SyntheticName::Importance: l.has_x = l.has_y = true; break;
        case SyntheticName::Complex: l.has_x = l.has_y = l.has_q = true; break;
        case SyntheticName::Categorical: l.has_a = l.has_b = true; break;
        case SyntheticName::CategoricalInteract:
            l.has_x = l.has_y = l.has_a = l.has_b = true;
            break;
    }
    return l;
}

}  // namespace detail

// Generating function of each dataset, evaluated on raw feature values in
// column order (categorical levels passed as their numeric codes). The guard
// constants keep sqrt/log arguments positive.
inline std::function<double(const std::vector<double>&)> ground_truth_fn(SyntheticName name,
                                                                         const CategoricalMaps& maps) {
    switch (name) {
        case SyntheticName::Add:
            return [](const std::vector<double>& v) { return v[0] + v[1]; };
        case SyntheticName::AddMultiply:
            return [](const std::vector<double>& v) { return v[0] + v[1] + v[0] * v[1]; };
        case SyntheticName::Complex:
            return [](const std::vector<double>& v) {
                double x = v[0], y = v[1], q = v[2];
                return x * x + y - q + std::sqrt(std::abs(x * q) + 0.0001) +
                       std::log(std::abs(y + q) + 0.0001);
            };
        case SyntheticName::Importance:
            return [](const std::vector<double>& v) {
                double x = v[0], y = v[1];
                return x + y + 0.2 * x * std::log(std::abs(y) / 100.0 + 0.0001);
            };
        case SyntheticName::Categorical:
            return [maps](const std::vector<double>& v) {
                return maps.f[static_cast<int>(v[0])] + maps.g[static_cast<int>(v[1])];
            };
        case SyntheticName::CategoricalInteract:
            return [maps](const std::vector<double>& v) {
                double x = v[0], y = v[1];
                int a = static_cast<int>(v[2]), b = static_cast<int>(v[3]);
                return x + y + x * y + maps.f[a] + maps.g[b] + maps.h_at(a, b);
            };
    }
    throw std::invalid_argument("unknown synthetic dataset");
}

// Draws x ~ N(1,2), y ~ N(-4,3.5), q ~ N(0,1), a uniform over {0..3},
// b uniform over {0,1}, row by row in that order, and computes the target
// exactly from the generating function. Deterministic per seed.
inline RawDataset generate(const SyntheticSpec& spec) {
    if (spec.n_rows < 1) throw std::invalid_argument("generate: n_rows must be >= 1");
    auto layout = detail::synthetic_layout(spec.name);
    CategoricalMaps maps = categorical_maps(spec.seed);
    auto truth = ground_truth_fn(spec.name, maps);
    Rng rng(mix64(spec.seed, 0x53594e54ULL));  // "SYNT"

    RawDataset raw;
    raw.task = TaskKind::Regression;
    raw.target_name = "z";
    auto add_col = [&raw](const char* name, bool numeric) {
        RawColumn c;
        c.name = name;
        c.is_numeric = numeric;
        raw.features.push_back(std::move(c));
    };
    if (layout.has_x) add_col("x", true);
    if (layout.has_y) add_col("y", true);
    if (layout.has_q) add_col("q", true);
    if (layout.has_a) add_col("a", false);
    if (layout.has_b) add_col("b", false);

    for (int i = 0; i < spec.n_rows; ++i) {
        std::vector<double> row;
        size_t ci = 0;
        auto push_num = [&](double v) { raw.features[ci++].nums.push_back(v); row.push_back(v); };
        auto push_cat = [&](int v) {
            raw.features[ci++].cats.push_back(std::to_string(v));
            row.push_back(static_cast<double>(v));
        };
        if (layout.has_x) push_num(rng.normal(1.0, 2.0));
        if (layout.has_y) push_num(rng.normal(-4.0, 3.5));
        if (layout.has_q) push_num(rng.normal(0.0, 1.0));
        if (layout.has_a) push_cat(static_cast<int>(rng.below(4)));
        if (layout.has_b) push_cat(static_cast<int>(rng.below(2)));
        raw.target.push_back(truth(row));
    }
    return raw;
}

// Pipeline configuration matching a synthetic dataset: categorical levels
// one-hot encoded, target kept in its native units.
inline SchemaConfig synthetic_schema(SyntheticName name) {
    auto layout = detail::synthetic_layout(name);
    SchemaConfig cfg;
    cfg.task = TaskKind::Regression;
    cfg.target = "z";
    cfg.standardize_target = false;
    auto cont = ColumnConfig{ColumnRole::Continuous, CatEncoding::Auto};
    auto cat = ColumnConfig{ColumnRole::Categorical, CatEncoding::OneHot};
    if (layout.has_x) cfg.columns["x"] = cont;
    if (layout.has_y) cfg.columns["y"] = cont;
    if (layout.has_q) cfg.columns["q"] = cont;
    if (layout.has_a) cfg.columns["a"] = cat;
    if (layout.has_b) cfg.columns["b"] = cat;
    return cfg;
}

// Shortest decimal form that parses back to the same binary64 value.
inline std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

inline std::string to_csv(const RawDataset& raw) {
    std::string out;
    for (const auto& col : raw.features) {
        out += col.name;
        out += ',';
    }
    out += raw.target_name;
    out += '\n';
    for (size_t r = 0; r < raw.n_rows(); ++r) {
        for (const auto& col : raw.features) {
            out += col.is_numeric ? format_double(col.nums[r]) : col.cats[r];
            out += ',';
        }
        out += format_double(raw.target[r]);
        out += '\n';
    }
    return out;
}

inline void write_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out << contents;
}

inline const char* generator_description(SyntheticName name) {
    switch (name) {
        case SyntheticName::Add: return "z = x + y";
        case SyntheticName::AddMultiply: return "z = x + y + x*y";
        case SyntheticName::Complex:
            return "z = x^2 + y - q + sqrt(|x*q| + 0.0001) + log(|y + q| + 0.0001)";
        case SyntheticName::Importance: return "z = x + y + 0.2*x*log(|y|/100 + 0.0001)";
        case SyntheticName::Categorical: return "z = f(a) + g(b)";
        case SyntheticName::CategoricalInteract:
            return "z = x + y + x*y + f(a) + g(b) + h(a,b)";
    }
    return "?";
}

// Sidecar recording how the CSV was produced; its "schema" block is directly
// usable as a pipeline schema config.
inline nlohmann::json synthetic_sidecar(const SyntheticSpec& spec) {
    auto layout = detail::synthetic_layout(spec.name);
    nlohmann::json j;
    j["dataset"] = to_string(spec.name);
    j["rows"] = spec.n_rows;
    j["seed"] = spec.seed;
    j["generator"] = generator_description(spec.name);
    j["distributions"] = {{"x", "normal(mean=1, sd=2)"},
                          {"y", "normal(mean=-4, sd=3.5)"},
                          {"q", "normal(mean=0, sd=1)"},
                          {"a", "uniform over {0,1,2,3}"},
                          {"b", "uniform over {0,1}"}};
    if (layout.has_a) {
        CategoricalMaps maps = categorical_maps(spec.seed);
        j["categorical_maps"] = {{"f", maps.f}, {"g", maps.g}, {"h", maps.h}};
    }
    nlohmann::json cols = nlohmann::json::object();
    if (layout.has_x) cols["x"] = "continuous";
    if (layout.has_y) cols["y"] = "continuous";
    if (layout.has_q) cols["q"] = "continuous";
    if (layout.has_a) cols["a"] = {{"type", "categorical"}, {"encoding", "one_hot"}};
    if (layout.has_b) cols["b"] = {{"type", "categorical"}, {"encoding", "one_hot"}};
    j["schema"] = {{"task", "regression"},
                   {"target", "z"},
                   {"standardize_target", false},
                   {"columns", cols}};
    return j;
}

}  // namespace regnet
