#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>

#include "regnet/mlp.hpp"

namespace regnet {

enum class TaskKind { Regression, BinaryClassification };

inline LossKind loss_for_task(TaskKind t) {
    return t == TaskKind::Regression ? LossKind::MeanSquaredError
                                     : LossKind::BinaryCrossEntropyFromLogits;
}

// One encoded feature group: a continuous column, an ordinal-encoded
// categorical column, or a one-hot block. A subset over groups feeds the
// concatenation of their encoded spans to its subnetwork.
struct FeatureGroup {
    enum class Kind { Continuous, CategoricalOneHot, CategoricalOrdinal };
    std::string name;
    Kind kind = Kind::Continuous;
    int cardinality = 0;  // categorical kinds only
    int col_start = 0;    // first encoded column

    int span() const { return kind == Kind::CategoricalOneHot ? cardinality : 1; }
    bool operator==(const FeatureGroup&) const = default;
};

// Sorted set of feature-group indices naming one additive function f_S.
// Ordered by (level, lexicographic) so enumeration order and map iteration
// order coincide.
struct FeatureSubset {
    std::vector<int> indices;

    FeatureSubset() = default;
    FeatureSubset(std::initializer_list<int> idx) : indices(idx) { validate(); }
    explicit FeatureSubset(std::vector<int> idx) : indices(std::move(idx)) { validate(); }

    int level() const { return static_cast<int>(indices.size()); }

    void validate() const {
        if (indices.empty()) throw std::invalid_argument("FeatureSubset: must be non-empty");
        for (size_t i = 1; i < indices.size(); ++i)
            if (indices[i] <= indices[i - 1])
                throw std::invalid_argument("FeatureSubset: indices must be strictly increasing");
        if (indices.front() < 0) throw std::invalid_argument("FeatureSubset: negative index");
    }

    std::string label() const {
        std::string s = "{";
        for (size_t i = 0; i < indices.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(indices[i]);
        }
        return s + "}";
    }

    bool operator==(const FeatureSubset&) const = default;
    auto operator<=>(const FeatureSubset& o) const {
        if (auto c = indices.size() <=> o.indices.size(); c != 0) return c;
        return indices <=> o.indices;
    }
};

// Hidden-layer shape shared by the subnetworks of one level; the input width
// is derived per subset from the schema, the output is always one unit.
struct SubnetTemplate {
    std::vector<int> hidden{16, 16};
    Activation activation = Activation::ELU;

    MlpSpec instantiate(int input_dim) const {
        MlpSpec s;
        s.layer_sizes.push_back(input_dim);
        for (int h : hidden) s.layer_sizes.push_back(h);
        s.layer_sizes.push_back(1);
        s.activation = activation;
        return s;
    }
    bool operator==(const SubnetTemplate&) const = default;
};

struct ModelSpec {
    int k_max = 2;
    bool include_bias = false;      // f_empty removed by default
    bool include_residual = false;
    std::map<int, SubnetTemplate> level_templates;  // per-level overrides
    SubnetTemplate default_template{};
    SubnetTemplate residual_template{{32, 32}, Activation::ELU};
    // When present, replaces enumeration entirely (may be empty: no subset
    // functions at all, e.g. a plain dense model via the residual).
    std::optional<std::vector<FeatureSubset>> explicit_subsets;

    const SubnetTemplate& template_for_level(int level) const {
        auto it = level_templates.find(level);
        return it == level_templates.end() ? default_template : it->second;
    }
    bool operator==(const ModelSpec&) const = default;
};

// All subsets of size 1..k_max over n_groups features, in deterministic
// (level, lexicographic) order.
inline std::vector<FeatureSubset> enumerate_subsets(int n_groups, int k_max) {
    if (k_max < 1 || k_max > n_groups)
        throw std::invalid_argument("enumerate_subsets: k_max out of range");
    std::vector<FeatureSubset> out;
    std::vector<int> cur;
    auto rec = [&](auto&& self, int start, int remaining) -> void {
        if (remaining == 0) {
            out.push_back(FeatureSubset(cur));
            return;
        }
        for (int i = start; i <= n_groups - remaining; ++i) {
            cur.push_back(i);
            self(self, i + 1, remaining - 1);
            cur.pop_back();
        }
    };
    for (int k = 1; k <= k_max; ++k) rec(rec, 0, k);
    return out;
}

// The full additive model: one subnetwork per feature subset, an optional
// residual network over all features, and an optional scalar bias.
struct RegressionNetwork {
    ModelSpec spec;
    std::vector<FeatureGroup> schema;
    TaskKind task = TaskKind::Regression;
    std::map<FeatureSubset, ParamSet> subnets;
    std::optional<ParamSet> residual;
    double bias = 0.0;

    int total_width() const {
        int w = 0;
        for (const auto& g : schema) w += g.span();
        return w;
    }

    std::vector<int> subset_columns(const FeatureSubset& s) const {
        std::vector<int> cols;
        for (int gi : s.indices) {
            if (gi >= static_cast<int>(schema.size()))
                throw std::invalid_argument("subset index outside schema");
            const FeatureGroup& g = schema[gi];
            for (int c = 0; c < g.span(); ++c) cols.push_back(g.col_start + c);
        }
        return cols;
    }

    std::set<int> levels_present() const {
        std::set<int> ls;
        for (const auto& [s, _] : subnets) ls.insert(s.level());
        return ls;
    }
};

// Subnetwork seeds derive from a stable hash of the canonical subset so that
// adding or removing subsets never reshuffles the others' initializations.
inline uint64_t subset_seed(uint64_t seed, const FeatureSubset& s) {
    uint64_t h = mix64(seed, 0x5355424eULL);  // "SUBN"
    for (int i : s.indices) h = mix64(h, static_cast<uint64_t>(i) + 1);
    return h;
}

inline uint64_t residual_seed(uint64_t seed) { return mix64(seed, 0x52455349ULL); }  // "RESI"

// Subset functions start as the exact zero function: hidden layers keep the
// fan-in uniform init, the single-unit output layer starts at zero. A fresh
// level contributes nothing until training pushes it away from zero. The
// residual network keeps the full fan-in init of a plain MLP.
inline ParamSet init_subnet(const MlpSpec& spec, uint64_t seed) {
    ParamSet p = init_mlp(spec, seed);
    std::fill(p.weights.back().data.begin(), p.weights.back().data.end(), 0.0);
    return p;
}

inline RegressionNetwork build_model(const std::vector<FeatureGroup>& schema,
                                     const ModelSpec& spec, TaskKind task, uint64_t seed) {
    if (schema.empty()) throw std::invalid_argument("build_model: empty schema");
    int n_groups = static_cast<int>(schema.size());

    std::vector<FeatureSubset> subsets;
    if (spec.explicit_subsets) {
        std::set<FeatureSubset> dedup;
        for (const auto& s : *spec.explicit_subsets) {
            s.validate();
            if (s.indices.back() >= n_groups)
                throw std::invalid_argument("build_model: explicit subset outside schema");
            dedup.insert(s);
        }
        subsets.assign(dedup.begin(), dedup.end());
    } else {
        if (spec.k_max > n_groups)
            throw std::invalid_argument("build_model: k_max exceeds number of feature groups");
        subsets = enumerate_subsets(n_groups, spec.k_max);
    }

    RegressionNetwork model;
    model.spec = spec;
    model.schema = schema;
    model.task = task;
    for (const auto& s : subsets) {
        int din = static_cast<int>(model.subset_columns(s).size());
        MlpSpec ms = spec.template_for_level(s.level()).instantiate(din);
        model.subnets.emplace(s, init_subnet(ms, subset_seed(seed, s)));
    }
    if (spec.include_residual) {
        MlpSpec ms = spec.residual_template.instantiate(model.total_width());
        model.residual = init_mlp(ms, residual_seed(seed));
    }
    model.bias = 0.0;
    return model;
}

// Per-part contribution vectors; summing every entry (plus residual and
// bias when present) reproduces predict exactly.
struct Decomposition {
    std::map<FeatureSubset, Vector> parts;
    std::optional<Vector> residual;
    std::optional<double> bias;

    Vector total(size_t n) const {
        Vector sum(n, 0.0);
        for (const auto& [_, v] : parts)
            for (size_t i = 0; i < n; ++i) sum[i] += v[i];
        if (residual)
            for (size_t i = 0; i < n; ++i) sum[i] += (*residual)[i];
        if (bias)
            for (size_t i = 0; i < n; ++i) sum[i] += *bias;
        return sum;
    }
};

inline Decomposition decompose(const RegressionNetwork& model, const Matrix& batch) {
    if (batch.cols != model.total_width())
        throw std::invalid_argument("decompose: batch width does not match schema");
    Decomposition d;
    for (const auto& [s, params] : model.subnets)
        d.parts.emplace(s, forward(params, gather_columns(batch, model.subset_columns(s))));
    if (model.residual) d.residual = forward(*model.residual, batch);
    if (model.spec.include_bias) d.bias = model.bias;
    return d;
}

// Sum of all subset functions plus residual plus bias. Regression: target
// units. Classification: a logit; callers apply the sigmoid.
inline Vector predict(const RegressionNetwork& model, const Matrix& batch) {
    if (batch.cols != model.total_width())
        throw std::invalid_argument("predict: batch width does not match schema");
    Vector sum(batch.rows, 0.0);
    for (const auto& [s, params] : model.subnets) {
        Vector part = forward(params, gather_columns(batch, model.subset_columns(s)));
        for (size_t i = 0; i < sum.size(); ++i) sum[i] += part[i];
    }
    if (model.residual) {
        Vector part = forward(*model.residual, batch);
        for (size_t i = 0; i < sum.size(); ++i) sum[i] += part[i];
    }
    if (model.spec.include_bias)
        for (double& v : sum) v += model.bias;
    return sum;
}

}  // namespace regnet
