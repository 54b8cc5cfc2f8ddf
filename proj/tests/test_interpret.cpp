#include <doctest.h>

#include <filesystem>

#include "regnet/interpret.hpp"

using namespace regnet;
namespace fs = std::filesystem;

namespace {

struct TrainedAdd {
    Preprocessor pre;
    Dataset train, val;
    RegressionNetwork model;
    TrainHistory hist;
};

// small K1+2 model trained on z = x + y with a standardized target
TrainedAdd trained_add(int k_max, int rows = 3000, int max_epochs = 512, double min_delta = 0.005) {
    TrainedAdd t;
    RawDataset raw = generate({SyntheticName::Add, rows, 7});
    SchemaConfig cfg = synthetic_schema(SyntheticName::Add);
    cfg.standardize_target = true;
    auto [tr, va] = split(raw, 0.2, 7);
    t.pre = fit_preprocessor(tr, cfg);
    t.train = apply_preprocessor(t.pre, tr);
    t.val = apply_preprocessor(t.pre, va);
    ModelSpec spec;
    spec.k_max = k_max;
    t.model = build_model(t.train.schema, spec, TaskKind::Regression, 3);
    TrainConfig tc;
    tc.seed = 3;
    tc.max_epochs = max_epochs;
    tc.min_delta = min_delta;
    t.hist = train_stepwise(t.model, t.train, t.val, tc);
    return t;
}

fs::path temp_file(const std::string& stem) {
    return fs::temp_directory_path() / ("regnet_interpret_" + stem + ".json");
}

}  // namespace

TEST_SUITE("interpret") {

TEST_CASE("1D grid of a model trained on an additive target is affine") {
    TrainedAdd t = trained_add(1, 6000, 512, 0.0);
    FunctionGrid grid = grid_1d(t.model, t.pre, "x", 128);
    REQUIRE(grid.values.size() == 128);
    REQUIRE(grid.axes[0].values.size() == 128);

    // least-squares affine fit over the grid; deviation should be tiny on
    // z = x + y where the true shape function is a straight line
    double n = 128.0, sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < 128; ++i) {
        double x = grid.axes[0].values[i], y = grid.values[i];
        sx += x; sy += y; sxx += x * x; sxy += x * y;
    }
    double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    double icept = (sy - slope * sx) / n;
    double worst = 0.0;
    for (size_t i = 0; i < 128; ++i)
        worst = std::max(worst, std::abs(grid.values[i] - (slope * grid.axes[0].values[i] + icept)));
    CHECK(worst < 0.05);

    // axis endpoints are the raw-unit training min/max
    CHECK(grid.axes[0].values.front() == t.pre.continuous.at("x").min);
    CHECK(grid.axes[0].values.back() == t.pre.continuous.at("x").max);
}

TEST_CASE("grids agree with decompose on synthesized inputs") {
    TrainedAdd t = trained_add(2, 1200, 24);
    FunctionGrid grid = grid_1d(t.model, t.pre, "x", 33);
    const auto& st = t.pre.continuous.at("x");
    for (size_t i = 0; i < grid.values.size(); ++i) {
        Matrix row(1, t.model.total_width());
        row(0, 0) = (grid.axes[0].values[i] - st.mean) / st.sd;
        row(0, 1) = -1.2345;  // anything: locality makes it irrelevant
        Decomposition dec = decompose(t.model, row);
        CHECK(std::abs(dec.parts.at(FeatureSubset{0})[0] - grid.values[i]) <= 1e-12);
    }

    // raw-unit axes: encode then decode is the identity
    for (double v : grid.axes[0].values) {
        double enc = (v - st.mean) / st.sd;
        CHECK(enc * st.sd + st.mean == doctest::Approx(v).epsilon(1e-9));
    }
}

TEST_CASE("zero model gives a zero grid; categorical axes enumerate levels") {
    RawDataset raw = generate({SyntheticName::Categorical, 400, 4});
    SchemaConfig cfg = synthetic_schema(SyntheticName::Categorical);
    Preprocessor pre = fit_preprocessor(raw, cfg);
    Dataset ds = apply_preprocessor(pre, raw);
    ModelSpec spec;
    spec.k_max = 2;
    RegressionNetwork model = build_model(ds.schema, spec, TaskKind::Regression, 4);
    for (auto& [s, p] : model.subnets) {
        for (auto& w : p.weights) std::fill(w.data.begin(), w.data.end(), 0.0);
        for (auto& b : p.biases) std::fill(b.begin(), b.end(), 0.0);
    }
    FunctionGrid ga = grid_1d(model, pre, "a");
    CHECK(ga.values.size() == 4);
    CHECK(ga.axes[0].labels == std::vector<std::string>{"0", "1", "2", "3"});
    for (double v : ga.values) CHECK(v == 0.0);

    FunctionGrid gab = grid_2d(model, pre, "a", "b");
    CHECK(gab.values.size() == 8);
    CHECK(gab.axes[0].labels.size() == 4);
    CHECK(gab.axes[1].labels.size() == 2);

    CHECK_THROWS_AS(grid_1d(model, pre, "nope"), std::invalid_argument);
    CHECK_THROWS_AS(grid_2d(model, pre, "a", "a"), std::invalid_argument);

    // ordinal-encoded axes enumerate the same category labels
    SchemaConfig ordinal_cfg = synthetic_schema(SyntheticName::Categorical);
    ordinal_cfg.columns["a"].encoding = CatEncoding::Ordinal;
    Preprocessor pre2 = fit_preprocessor(raw, ordinal_cfg);
    Dataset ds2 = apply_preprocessor(pre2, raw);
    RegressionNetwork model2 = build_model(ds2.schema, spec, TaskKind::Regression, 4);
    FunctionGrid ga2 = grid_1d(model2, pre2, "a");
    CHECK(ga2.values.size() == 4);
    CHECK(ga2.axes[0].labels == std::vector<std::string>{"0", "1", "2", "3"});
}

TEST_CASE("combined 2D grid adds the two level-1 grids exactly") {
    TrainedAdd t = trained_add(2, 1200, 16);
    FunctionGrid pair = grid_2d(t.model, t.pre, "x", "y", 17);
    FunctionGrid combined = grid_2d(t.model, t.pre, "x", "y", 17, true);
    FunctionGrid fx = grid_1d(t.model, t.pre, "x", 17);
    FunctionGrid fy = grid_1d(t.model, t.pre, "y", 17);
    for (size_t i = 0; i < 17; ++i)
        for (size_t j = 0; j < 17; ++j)
            CHECK(combined.at(i, j) == (pair.at(i, j) + fx.values[i]) + fy.values[j]);
}

TEST_CASE("grid exports") {
    TrainedAdd t = trained_add(2, 800, 8);
    FunctionGrid grid = grid_1d(t.model, t.pre, "x", 5);
    std::string csv = grid_to_csv(grid);
    CHECK(csv.rfind("x,value\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 6);

    nlohmann::json j = grid_to_json(grid);
    CHECK(j.at("axes").size() == 1);
    CHECK(j.at("values").size() == 5);

    FunctionGrid pair = grid_2d(t.model, t.pre, "x", "y", 3);
    std::string csv2 = grid_to_csv(pair);
    CHECK(csv2.rfind("x,y,value\n", 0) == 0);
    CHECK(std::count(csv2.begin(), csv2.end(), '\n') == 10);
}

TEST_CASE("model archive round trip") {
    TrainedAdd t = trained_add(2, 1000, 12);
    TrainedModel tm{t.model, t.pre, t.hist, 7, 0.2};
    fs::path path = temp_file("roundtrip");
    save_model(tm, path.string());
    TrainedModel loaded = load_model(path.string());

    // bit-identical predictions on random inputs
    Rng rng(55);
    Matrix batch(100, t.model.total_width());
    for (double& v : batch.data) v = rng.normal();
    CHECK(predict(loaded.model, batch) == predict(t.model, batch));

    // re-archiving the loaded model is byte-identical
    std::string first = model_to_json(tm).dump(1);
    std::string second = model_to_json(loaded).dump(1);
    CHECK(first == second);

    CHECK(loaded.split_seed == 7);
    CHECK(loaded.preprocessor.target_name == "z");
    CHECK(loaded.history.phases.size() == t.hist.phases.size());
    fs::remove(path);
}

TEST_CASE("archive subset inventory matches the enumeration") {
    RawDataset raw = generate({SyntheticName::Complex, 300, 3});
    SchemaConfig cfg = synthetic_schema(SyntheticName::Complex);
    auto [tr, va] = split(raw, 0.2, 3);
    Preprocessor pre = fit_preprocessor(tr, cfg);
    Dataset ds = apply_preprocessor(pre, tr);
    ModelSpec spec;
    spec.k_max = 2;
    RegressionNetwork model = build_model(ds.schema, spec, TaskKind::Regression, 1);
    TrainedModel tm{model, pre, {}, 3, 0.2};
    nlohmann::json j = model_to_json(tm);
    CHECK(j.at("subnets").size() == 6);  // 3 singles + 3 pairs
}

TEST_CASE("corrupt and mismatched archives are rejected") {
    TrainedAdd t = trained_add(1, 600, 4);
    TrainedModel tm{t.model, t.pre, t.hist, 7, 0.2};
    fs::path path = temp_file("corrupt");
    save_model(tm, path.string());

    std::ifstream in(path);
    std::string contents((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    in.close();
    write_file(path.string(), contents.substr(0, contents.size() / 2));
    CHECK_THROWS_AS(load_model(path.string()), std::runtime_error);

    nlohmann::json j = model_to_json(tm);
    j["format_version"] = 999;
    write_file(path.string(), j.dump());
    CHECK_THROWS_AS(load_model(path.string()), std::runtime_error);

    CHECK_THROWS_AS(load_model("/nonexistent/model.json"), std::runtime_error);
    fs::remove(path);
}

}  // TEST_SUITE
