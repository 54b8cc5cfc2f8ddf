#include <doctest.h>

#include "regnet/mlp.hpp"

using namespace regnet;

namespace {

Matrix random_batch(Rng& rng, int rows, int cols) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = rng.normal();
    return m;
}

Vector random_targets(Rng& rng, int n, LossKind kind) {
    Vector t(n);
    for (double& v : t) v = kind == LossKind::MeanSquaredError ? rng.normal() : double(rng.below(2));
    return t;
}

}  // namespace

TEST_SUITE("mlp") {

TEST_CASE("init is deterministic and fan-in bounded") {
    MlpSpec spec{{2, 4, 1}, Activation::ELU};
    ParamSet a = init_mlp(spec, 7);
    ParamSet b = init_mlp(spec, 7);
    CHECK(a.byte_image() == b.byte_image());
    CHECK(init_mlp(spec, 8).byte_image() != a.byte_image());

    ParamSet tiny = init_mlp(MlpSpec{{1, 1}}, 0);
    CHECK(tiny.weights.size() == 1);
    CHECK(tiny.weights[0].rows == 1);
    CHECK(tiny.weights[0].cols == 1);
    CHECK(tiny.biases[0][0] == 0.0);

    ParamSet deep = init_mlp(MlpSpec{{3, 8, 8, 1}}, 1);
    for (size_t l = 0; l < deep.weights.size(); ++l) {
        double bound = std::sqrt(6.0 / deep.weights[l].cols);
        for (double w : deep.weights[l].data) CHECK(std::abs(w) <= bound);
        for (double b : deep.biases[l]) CHECK(b == 0.0);
    }
}

TEST_CASE("init rejects invalid specs") {
    CHECK_THROWS_AS(init_mlp(MlpSpec{{}}, 0), std::invalid_argument);
    CHECK_THROWS_AS(init_mlp(MlpSpec{{3}}, 0), std::invalid_argument);
    CHECK_THROWS_AS(init_mlp(MlpSpec{{3, 0, 1}}, 0), std::invalid_argument);
    CHECK_THROWS_AS(init_mlp(MlpSpec{{3, 4, 2}}, 0), std::invalid_argument);
}

TEST_CASE("forward hand cases") {
    // all-zero parameters give all-zero outputs
    ParamSet z = init_mlp(MlpSpec{{2, 3, 1}}, 0);
    for (auto& w : z.weights) std::fill(w.data.begin(), w.data.end(), 0.0);
    Rng rng(3);
    Matrix batch = random_batch(rng, 5, 2);
    for (double v : forward(z, batch)) CHECK(v == 0.0);

    // [1,1] is the affine map w*x + b
    ParamSet affine = init_mlp(MlpSpec{{1, 1}}, 0);
    affine.weights[0](0, 0) = 2.0;
    affine.biases[0][0] = 3.0;
    Matrix x(1, 1);
    x(0, 0) = 5.0;
    CHECK(forward(affine, x)[0] == 13.0);

    // hand-set ReLU net: max(0,-x) + max(0,x) = |x|
    ParamSet relu = init_mlp(MlpSpec{{1, 2, 1}, Activation::ReLU}, 0);
    relu.weights[0](0, 0) = 1.0;
    relu.weights[0](1, 0) = -1.0;
    relu.biases[0] = {0.0, 0.0};
    relu.weights[1](0, 0) = 1.0;
    relu.weights[1](0, 1) = 1.0;
    relu.biases[1][0] = 0.0;
    Matrix neg(1, 1);
    neg(0, 0) = -2.0;
    CHECK(forward(relu, neg)[0] == 2.0);

    Matrix wrong(1, 3);
    CHECK_THROWS_AS(forward(relu, wrong), std::invalid_argument);
}

TEST_CASE("[d,1] spec is exactly affine in the input") {
    ParamSet p = init_mlp(MlpSpec{{4, 1}}, 11);
    Rng rng(5);
    for (int rep = 0; rep < 20; ++rep) {
        Matrix a = random_batch(rng, 1, 4);
        Matrix b = random_batch(rng, 1, 4);
        Matrix sum(1, 4), zero(1, 4);
        for (int c = 0; c < 4; ++c) sum(0, c) = a(0, c) + b(0, c);
        double lhs = forward(p, sum)[0];
        double rhs = forward(p, a)[0] + forward(p, b)[0] - forward(p, zero)[0];
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("loss values") {
    CHECK(loss({1.0, -2.0, 0.5}, {1.0, -2.0, 0.5}, LossKind::MeanSquaredError) == 0.0);
    CHECK(loss({0.0}, {1.0}, LossKind::BinaryCrossEntropyFromLogits) ==
          doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(loss({0.0, 2.0}, {0.0, 0.0}, LossKind::MeanSquaredError, {1.0, 3.0}) == 3.0);

    CHECK_THROWS_AS(loss({std::nan("")}, {0.0}, LossKind::MeanSquaredError), std::invalid_argument);
    CHECK_THROWS_AS(loss({0.0}, {0.5}, LossKind::BinaryCrossEntropyFromLogits),
                    std::invalid_argument);
    CHECK_THROWS_AS(loss({0.0, 1.0}, {0.0}, LossKind::MeanSquaredError), std::invalid_argument);
}

TEST_CASE("loss is non-negative") {
    Rng rng(17);
    for (int rep = 0; rep < 50; ++rep) {
        int n = 1 + static_cast<int>(rng.below(10));
        Vector pred = random_targets(rng, n, LossKind::MeanSquaredError);
        CHECK(loss(pred, random_targets(rng, n, LossKind::MeanSquaredError),
                   LossKind::MeanSquaredError) >= 0.0);
        CHECK(loss(pred, random_targets(rng, n, LossKind::BinaryCrossEntropyFromLogits),
                   LossKind::BinaryCrossEntropyFromLogits) >= 0.0);
    }
}

TEST_CASE("uniform sample weights match absent weights") {
    Rng rng(23);
    MlpSpec spec{{3, 6, 1}, Activation::ELU};
    ParamSet p = init_mlp(spec, 2);
    Matrix batch = random_batch(rng, 8, 3);
    Vector target = random_targets(rng, 8, LossKind::MeanSquaredError);
    Vector ones(8, 1.0);

    double plain = loss(forward(p, batch), target, LossKind::MeanSquaredError);
    double weighted = loss(forward(p, batch), target, LossKind::MeanSquaredError, ones);
    CHECK(weighted == doctest::Approx(plain).epsilon(1e-12));

    ParamSet g0 = grad(p, batch, target, LossKind::MeanSquaredError);
    ParamSet g1 = grad(p, batch, target, LossKind::MeanSquaredError, ones);
    for (size_t l = 0; l < g0.weights.size(); ++l)
        for (size_t i = 0; i < g0.weights[l].data.size(); ++i)
            CHECK(g1.weights[l].data[i] ==
                  doctest::Approx(g0.weights[l].data[i]).epsilon(1e-12));
}

TEST_CASE("gradient hand cases") {
    // pred == target: stationary point of MSE
    ParamSet p = init_mlp(MlpSpec{{1, 1}}, 0);
    p.weights[0](0, 0) = 1.0;
    p.biases[0][0] = 0.0;
    Matrix x(1, 1);
    x(0, 0) = 1.0;
    ParamSet g = grad(p, x, {1.0}, LossKind::MeanSquaredError);
    CHECK(g.weights[0](0, 0) == 0.0);
    CHECK(g.biases[0][0] == 0.0);

    // d/dw (w*1 + b)^2 at w=1,b=0, target 0
    g = grad(p, x, {0.0}, LossKind::MeanSquaredError);
    CHECK(g.weights[0](0, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(g.biases[0][0] == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("gradient matches central finite differences") {
    Rng rng(29);
    int checked = 0;
    for (int rep = 0; rep < 120; ++rep) {
        int din = 1 + static_cast<int>(rng.below(4));
        int h1 = 2 + static_cast<int>(rng.below(6));
        int h2 = 2 + static_cast<int>(rng.below(6));
        MlpSpec spec{{din, h1, h2, 1}, Activation::ELU};
        ParamSet p = init_mlp(spec, rng.next());
        Matrix batch = random_batch(rng, 4 + static_cast<int>(rng.below(5)), din);
        LossKind kind = rng.below(2) ? LossKind::MeanSquaredError
                                     : LossKind::BinaryCrossEntropyFromLogits;
        Vector target = random_targets(rng, batch.rows, kind);
        Vector weights;
        if (rng.below(3) == 0) {
            weights.resize(batch.rows);
            for (double& w : weights) w = 0.25 + rng.uniform();
        }
        CHECK(finite_diff_check(p, batch, target, kind, weights) < 1e-4);
        ++checked;
    }
    CHECK(checked >= 100);
}

TEST_CASE("finite_diff_check flags a corrupted gradient") {
    Rng rng(31);
    MlpSpec spec{{2, 4, 1}, Activation::ELU};
    ParamSet p = init_mlp(spec, 4);
    Matrix batch = random_batch(rng, 6, 2);
    Vector target = random_targets(rng, 6, LossKind::MeanSquaredError);
    CHECK(finite_diff_check(p, batch, target, LossKind::MeanSquaredError) < 1e-4);

    // same probe computed against a gradient with one weight off by +0.1
    ParamSet analytic = grad(p, batch, target, LossKind::MeanSquaredError);
    analytic.weights[0](0, 0) += 0.1;
    double h = 1e-5;
    double saved = p.weights[0](0, 0);
    p.weights[0](0, 0) = saved + h;
    double up = loss(forward(p, batch), target, LossKind::MeanSquaredError);
    p.weights[0](0, 0) = saved - h;
    double down = loss(forward(p, batch), target, LossKind::MeanSquaredError);
    p.weights[0](0, 0) = saved;
    double gf = (up - down) / (2.0 * h);
    double ga = analytic.weights[0](0, 0);
    double rel = std::abs(ga - gf) / std::max(std::abs(ga) + std::abs(gf), 1e-8);
    CHECK(rel > 1e-2);
}

TEST_CASE("finite_diff_check near a zero-loss configuration") {
    // all-zero weights, zero targets: loss identically 0 around the origin
    ParamSet p = init_mlp(MlpSpec{{2, 3, 1}}, 0);
    for (auto& w : p.weights) std::fill(w.data.begin(), w.data.end(), 0.0);
    Matrix batch(4, 2);
    Vector target(4, 0.0);
    CHECK(finite_diff_check(p, batch, target, LossKind::MeanSquaredError) ==
          doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("adam update") {
    ParamSet p = init_mlp(MlpSpec{{1, 1}}, 0);
    p.weights[0](0, 0) = 0.0;
    p.biases[0][0] = 0.0;
    AdamState s = AdamState::for_params(p);

    // zero gradient: parameters unchanged, t incremented
    adam_update(p, p.zeros_like(), s);
    CHECK(p.weights[0](0, 0) == 0.0);
    CHECK(s.t == 1);

    // first step against unit gradient moves by about -lr
    ParamSet q = init_mlp(MlpSpec{{1, 1}}, 0);
    q.weights[0](0, 0) = 0.0;
    q.biases[0][0] = 0.0;
    AdamState s2 = AdamState::for_params(q);
    ParamSet g = q.zeros_like();
    g.weights[0](0, 0) = 1.0;
    adam_update(q, g, s2);
    CHECK(q.weights[0](0, 0) == doctest::Approx(-0.001).epsilon(1e-6));
    CHECK(s2.t == 1);

    // identical calls from identical states give identical results
    ParamSet a = init_mlp(MlpSpec{{2, 3, 1}}, 9);
    ParamSet b = a;
    AdamState sa = AdamState::for_params(a);
    AdamState sb = AdamState::for_params(b);
    Rng rng(41);
    ParamSet ga = a.zeros_like();
    for (auto& w : ga.weights)
        for (double& v : w.data) v = rng.normal();
    adam_update(a, ga, sa);
    adam_update(b, ga, sb);
    CHECK(a.byte_image() == b.byte_image());

    ParamSet mismatched = init_mlp(MlpSpec{{3, 3, 1}}, 0);
    CHECK_THROWS_AS(adam_update(a, mismatched, sa), std::invalid_argument);
}

TEST_CASE("full chain is deterministic per seed") {
    auto run = [](uint64_t seed) {
        Rng rng(seed);
        MlpSpec spec{{3, 5, 1}, Activation::ELU};
        ParamSet p = init_mlp(spec, seed);
        AdamState s = AdamState::for_params(p);
        Matrix batch = random_batch(rng, 6, 3);
        Vector target = random_targets(rng, 6, LossKind::MeanSquaredError);
        for (int i = 0; i < 10; ++i)
            adam_update(p, grad(p, batch, target, LossKind::MeanSquaredError), s);
        return p.byte_image();
    };
    CHECK(run(77) == run(77));
    CHECK(run(77) != run(78));
}

}  // TEST_SUITE
