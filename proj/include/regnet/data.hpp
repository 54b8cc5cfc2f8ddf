#pragma once

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "regnet/model.hpp"

namespace regnet {

enum class ColumnRole { Continuous, Categorical, Target, Ignored };
enum class CatEncoding { Auto, OneHot, Ordinal };

struct ColumnConfig {
    ColumnRole role = ColumnRole::Continuous;
    CatEncoding encoding = CatEncoding::Auto;
};

// Declares how to type every CSV column. Undeclared columns are an error,
// not a guess.
struct SchemaConfig {
    TaskKind task = TaskKind::Regression;
    std::string target;
    std::map<std::string, ColumnConfig> columns;
    int one_hot_max_cardinality = 16;
    bool standardize_target = true;  // regression only

    static SchemaConfig from_json(const nlohmann::json& j);
    static SchemaConfig load(const std::string& path);
};

struct RawColumn {
    std::string name;
    bool is_numeric = true;
    Vector nums;                 // numeric values when is_numeric
    std::vector<std::string> cats;  // raw category strings otherwise
    size_t size() const { return is_numeric ? nums.size() : cats.size(); }
};

// Typed, rectangular, missing-free table. Rows with missing or unparseable
// cells were dropped at load time and counted.
struct RawDataset {
    std::vector<RawColumn> features;  // file order, target/ignored excluded
    std::string target_name;
    Vector target;
    TaskKind task = TaskKind::Regression;
    size_t dropped_rows = 0;

    size_t n_rows() const { return target.size(); }
    const RawColumn& feature(const std::string& name) const {
        for (const auto& c : features)
            if (c.name == name) return c;
        throw std::invalid_argument("no such feature column: " + name);
    }
};

namespace detail {

inline bool parse_double(const std::string& s, double& out) {
    const char* b = s.data();
    const char* e = b + s.size();
    while (b < e && (*b == ' ' || *b == '\t')) ++b;
    while (e > b && (*(e - 1) == ' ' || *(e - 1) == '\t')) --e;
    if (b == e) return false;
    auto [p, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && p == e && std::isfinite(out);
}

// RFC-4180-style record splitting: quoted fields may contain commas,
// doubled quotes, and newlines.
inline std::vector<std::vector<std::string>> parse_csv(std::istream& in) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> rec;
    std::string field;
    bool quoted = false;
    bool any = false;
    char c;
    auto end_field = [&] {
        rec.push_back(field);
        field.clear();
    };
    auto end_record = [&] {
        end_field();
        records.push_back(rec);
        rec.clear();
        any = false;
    };
    while (in.get(c)) {
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field += '"';
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"': quoted = true; any = true; break;
            case ',': end_field(); any = true; break;
            case '\r': break;
            case '\n':
                if (any || !field.empty() || !rec.empty()) end_record();
                break;
            default: field += c; any = true;
        }
    }
    if (any || !field.empty() || !rec.empty()) end_record();
    return records;
}

}  // namespace detail

inline SchemaConfig SchemaConfig::from_json(const nlohmann::json& j) {
    SchemaConfig cfg;
    std::string task = j.value("task", "regression");
    if (task == "regression") cfg.task = TaskKind::Regression;
    else if (task == "binary_classification") cfg.task = TaskKind::BinaryClassification;
    else throw std::invalid_argument("schema config: unknown task '" + task + "'");
    if (j.contains("target")) cfg.target = j.at("target").get<std::string>();
    cfg.one_hot_max_cardinality = j.value("one_hot_max_cardinality", 16);
    if (!j.contains("columns")) throw std::invalid_argument("schema config: missing 'columns'");
    for (const auto& [name, spec] : j.at("columns").items()) {
        ColumnConfig cc;
        std::string type;
        if (spec.is_string()) {
            type = spec.get<std::string>();
        } else {
            type = spec.value("type", "continuous");
            std::string enc = spec.value("encoding", "auto");
            if (enc == "one_hot") cc.encoding = CatEncoding::OneHot;
            else if (enc == "ordinal") cc.encoding = CatEncoding::Ordinal;
            else if (enc == "auto") cc.encoding = CatEncoding::Auto;
            else throw std::invalid_argument("schema config: unknown encoding '" + enc + "'");
        }
        if (type == "continuous") cc.role = ColumnRole::Continuous;
        else if (type == "categorical") cc.role = ColumnRole::Categorical;
        else if (type == "ignored") cc.role = ColumnRole::Ignored;
        else if (type == "target") {
            // alternative to the top-level "target" key
            if (!cfg.target.empty() && cfg.target != name)
                throw std::invalid_argument("schema config: conflicting target declarations");
            cfg.target = name;
            cc.role = ColumnRole::Target;
        } else {
            throw std::invalid_argument("schema config: unknown column type '" + type + "'");
        }
        cfg.columns[name] = cc;
    }
    if (cfg.target.empty()) throw std::invalid_argument("schema config: missing 'target'");
    cfg.standardize_target = j.value("standardize_target", cfg.task == TaskKind::Regression);
    return cfg;
}

inline SchemaConfig SchemaConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open schema config: " + path);
    nlohmann::json j = nlohmann::json::parse(in);
    // dataset sidecars embed their schema under a "schema" key
    return from_json(j.is_object() && j.contains("schema") ? j.at("schema") : j);
}

// CSV ingestion with a typed schema. Header row required; rows with missing
// or unparseable cells are dropped and counted; row order is file order.
inline RawDataset load_csv(const std::string& path, const SchemaConfig& cfg) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open CSV file: " + path);
    auto records = detail::parse_csv(in);
    if (records.empty()) throw std::runtime_error("empty CSV file: " + path);

    const auto& header = records.front();
    std::vector<ColumnRole> roles(header.size());
    int target_idx = -1;
    for (size_t c = 0; c < header.size(); ++c) {
        if (header[c] == cfg.target) {
            roles[c] = ColumnRole::Target;
            target_idx = static_cast<int>(c);
            continue;
        }
        auto it = cfg.columns.find(header[c]);
        if (it == cfg.columns.end())
            throw std::runtime_error("CSV column '" + header[c] + "' not declared in schema config");
        if (it->second.role == ColumnRole::Target)
            throw std::runtime_error("column '" + header[c] + "' conflicts with target '" +
                                     cfg.target + "'");
        roles[c] = it->second.role;
    }
    if (target_idx < 0)
        throw std::runtime_error("target column '" + cfg.target + "' not present in " + path);

    RawDataset raw;
    raw.task = cfg.task;
    raw.target_name = cfg.target;
    for (size_t c = 0; c < header.size(); ++c) {
        if (roles[c] == ColumnRole::Target || roles[c] == ColumnRole::Ignored) continue;
        RawColumn col;
        col.name = header[c];
        col.is_numeric = roles[c] == ColumnRole::Continuous;
        raw.features.push_back(std::move(col));
    }

    for (size_t r = 1; r < records.size(); ++r) {
        const auto& rec = records[r];
        if (rec.size() != header.size()) {
            ++raw.dropped_rows;
            continue;
        }
        double tgt = 0.0;
        std::vector<double> nums;
        std::vector<std::string> cats;
        bool ok = detail::parse_double(rec[target_idx], tgt);
        for (size_t c = 0; ok && c < rec.size(); ++c) {
            if (roles[c] == ColumnRole::Continuous) {
                double v;
                ok = detail::parse_double(rec[c], v);
                nums.push_back(v);
            } else if (roles[c] == ColumnRole::Categorical) {
                if (rec[c].empty()) ok = false;
                cats.push_back(rec[c]);
            }
        }
        if (!ok) {
            ++raw.dropped_rows;
            continue;
        }
        size_t ni = 0, ci = 0;
        for (auto& col : raw.features) {
            if (col.is_numeric) col.nums.push_back(nums[ni++]);
            else col.cats.push_back(cats[ci++]);
        }
        raw.target.push_back(tgt);
    }
    if (raw.n_rows() == 0) throw std::runtime_error("no usable rows in " + path);
    return raw;
}

// Seeded 80/20-style holdout split: permute, take round(n * fraction) rows
// for validation, rest for training. Disjoint and exhaustive.
inline std::pair<RawDataset, RawDataset> split(const RawDataset& raw, double val_fraction,
                                               uint64_t seed) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0))
        throw std::invalid_argument("split: val_fraction must be in (0,1)");
    size_t n = raw.n_rows();
    if (n < 2) throw std::invalid_argument("split: need at least 2 rows");
    Rng rng(mix64(seed, 0x53504c54ULL));  // "SPLT"
    auto perm = shuffled_indices(rng, n);
    auto n_val = static_cast<size_t>(std::llround(static_cast<double>(n) * val_fraction));
    n_val = std::clamp<size_t>(n_val, 1, n - 1);
    std::vector<size_t> vi(perm.begin(), perm.begin() + n_val);
    std::vector<size_t> ti(perm.begin() + n_val, perm.end());
    auto take = [&](const std::vector<size_t>& idx) {
        RawDataset part;
        part.task = raw.task;
        part.target_name = raw.target_name;
        part.dropped_rows = 0;
        part.target = gather(raw.target, idx);
        for (const auto& col : raw.features) {
            RawColumn pc;
            pc.name = col.name;
            pc.is_numeric = col.is_numeric;
            if (col.is_numeric) pc.nums = gather(col.nums, idx);
            else pc.cats = gather(col.cats, idx);
            part.features.push_back(std::move(pc));
        }
        return part;
    };
    return {take(ti), take(vi)};
}

struct ContinuousStats {
    double mean = 0.0, sd = 1.0, min = 0.0, max = 0.0;
};

struct CategoricalVocab {
    std::vector<std::string> categories;  // sorted
    bool one_hot = true;

    int index_of(const std::string& cat) const {
        auto it = std::lower_bound(categories.begin(), categories.end(), cat);
        if (it == categories.end() || *it != cat)
            throw std::invalid_argument("unseen category '" + cat + "'");
        return static_cast<int>(it - categories.begin());
    }
};

// Column statistics fitted on the training split only. Population (divide
// by n) standard deviation, floored at 1e-8 for constant columns.
struct Preprocessor {
    TaskKind task = TaskKind::Regression;
    std::string target_name;
    bool standardize_target = false;
    double target_mean = 0.0, target_sd = 1.0;
    std::vector<std::string> feature_names;
    std::map<std::string, ContinuousStats> continuous;
    std::map<std::string, CategoricalVocab> categorical;

    double transform_target(double y) const {
        return standardize_target ? (y - target_mean) / target_sd : y;
    }
    double inverse_target(double t) const {
        return standardize_target ? t * target_sd + target_mean : t;
    }

    // Schema config equivalent to this fit, so archived models can re-ingest
    // CSVs without the original config file.
    SchemaConfig schema_config() const {
        SchemaConfig cfg;
        cfg.task = task;
        cfg.target = target_name;
        cfg.standardize_target = standardize_target;
        for (const auto& name : feature_names) {
            ColumnConfig cc;
            if (continuous.count(name)) {
                cc.role = ColumnRole::Continuous;
            } else {
                cc.role = ColumnRole::Categorical;
                cc.encoding = categorical.at(name).one_hot ? CatEncoding::OneHot : CatEncoding::Ordinal;
            }
            cfg.columns[name] = cc;
        }
        return cfg;
    }

    std::vector<FeatureGroup> schema() const {
        std::vector<FeatureGroup> groups;
        int col = 0;
        for (const auto& name : feature_names) {
            FeatureGroup g;
            g.name = name;
            g.col_start = col;
            if (auto it = continuous.find(name); it != continuous.end()) {
                g.kind = FeatureGroup::Kind::Continuous;
            } else {
                const auto& vocab = categorical.at(name);
                g.kind = vocab.one_hot ? FeatureGroup::Kind::CategoricalOneHot
                                       : FeatureGroup::Kind::CategoricalOrdinal;
                g.cardinality = static_cast<int>(vocab.categories.size());
            }
            col += g.span();
            groups.push_back(std::move(g));
        }
        return groups;
    }
};

inline Preprocessor fit_preprocessor(const RawDataset& train, const SchemaConfig& cfg) {
    if (train.n_rows() == 0) throw std::invalid_argument("fit_preprocessor: empty training split");
    Preprocessor pre;
    pre.task = train.task;
    pre.target_name = train.target_name;
    pre.standardize_target = train.task == TaskKind::Regression && cfg.standardize_target;
    if (pre.standardize_target) {
        pre.target_mean = population_mean(train.target);
        pre.target_sd = std::max(population_sd(train.target), 1e-8);
    }
    for (const auto& col : train.features) {
        pre.feature_names.push_back(col.name);
        if (col.is_numeric) {
            ContinuousStats st;
            st.mean = population_mean(col.nums);
            st.sd = std::max(population_sd(col.nums), 1e-8);
            st.min = *std::min_element(col.nums.begin(), col.nums.end());
            st.max = *std::max_element(col.nums.begin(), col.nums.end());
            pre.continuous[col.name] = st;
        } else {
            CategoricalVocab vocab;
            vocab.categories = col.cats;
            std::sort(vocab.categories.begin(), vocab.categories.end());
            vocab.categories.erase(std::unique(vocab.categories.begin(), vocab.categories.end()),
                                   vocab.categories.end());
            CatEncoding enc = CatEncoding::Auto;
            if (auto it = cfg.columns.find(col.name); it != cfg.columns.end())
                enc = it->second.encoding;
            int cardinality = static_cast<int>(vocab.categories.size());
            vocab.one_hot = enc == CatEncoding::OneHot ||
                            (enc == CatEncoding::Auto && cardinality <= cfg.one_hot_max_cardinality);
            pre.categorical[col.name] = std::move(vocab);
        }
    }
    return pre;
}

// Encoded feature matrix plus the group schema describing its columns.
struct Dataset {
    Matrix x;
    std::vector<FeatureGroup> schema;
    Vector y;
    TaskKind task = TaskKind::Regression;

    size_t n_rows() const { return y.size(); }
};

inline Dataset apply_preprocessor(const Preprocessor& pre, const RawDataset& raw) {
    Dataset ds;
    ds.task = raw.task;
    ds.schema = pre.schema();
    int width = 0;
    for (const auto& g : ds.schema) width += g.span();
    size_t n = raw.n_rows();
    ds.x = Matrix(static_cast<int>(n), width);
    for (size_t fi = 0; fi < pre.feature_names.size(); ++fi) {
        const auto& name = pre.feature_names[fi];
        const RawColumn& col = raw.feature(name);
        const FeatureGroup& g = ds.schema[fi];
        if (g.kind == FeatureGroup::Kind::Continuous) {
            if (!col.is_numeric)
                throw std::invalid_argument("column '" + name + "' is not numeric");
            const auto& st = pre.continuous.at(name);
            for (size_t r = 0; r < n; ++r)
                ds.x(static_cast<int>(r), g.col_start) = (col.nums[r] - st.mean) / st.sd;
        } else {
            if (col.is_numeric)
                throw std::invalid_argument("column '" + name + "' is not categorical");
            const auto& vocab = pre.categorical.at(name);
            for (size_t r = 0; r < n; ++r) {
                int idx = vocab.index_of(col.cats[r]);
                if (g.kind == FeatureGroup::Kind::CategoricalOneHot)
                    ds.x(static_cast<int>(r), g.col_start + idx) = 1.0;
                else
                    ds.x(static_cast<int>(r), g.col_start) = static_cast<double>(idx);
            }
        }
    }
    ds.y.resize(n);
    for (size_t r = 0; r < n; ++r) ds.y[r] = pre.transform_target(raw.target[r]);
    return ds;
}

}  // namespace regnet
