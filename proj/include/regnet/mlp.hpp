#pragma once

#include <algorithm>
#include <cmath>
#include <cstring>

#include "regnet/core.hpp"

namespace regnet {

enum class Activation { ReLU, ELU };

// Loss over raw model outputs. Binary cross-entropy consumes logits and
// computes the probability internally in a numerically stable form.
enum class LossKind { MeanSquaredError, BinaryCrossEntropyFromLogits };

// Layer sizes of one multilayer perceptron: input dim, hidden dims..., and a
// single linear output unit. The activation applies to hidden layers only.
struct MlpSpec {
    std::vector<int> layer_sizes;
    Activation activation = Activation::ELU;

    int input_dim() const { return layer_sizes.front(); }
    int n_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }

    void validate() const {
        if (layer_sizes.size() < 2)
            throw std::invalid_argument("MlpSpec: need at least input and output sizes");
        for (int s : layer_sizes)
            if (s < 1) throw std::invalid_argument("MlpSpec: layer sizes must be positive");
        if (layer_sizes.back() != 1)
            throw std::invalid_argument("MlpSpec: output dimension must be 1");
    }

    bool operator==(const MlpSpec&) const = default;
};

// All weights and biases of one subnetwork. weights[l] is out x in for the
// l-th affine layer; the same shape doubles as gradient storage.
struct ParamSet {
    MlpSpec spec;
    std::vector<Matrix> weights;
    std::vector<Vector> biases;

    size_t n_params() const {
        size_t n = 0;
        for (const auto& w : weights) n += w.data.size();
        for (const auto& b : biases) n += b.size();
        return n;
    }

    ParamSet zeros_like() const {
        ParamSet z;
        z.spec = spec;
        for (const auto& w : weights) z.weights.emplace_back(w.rows, w.cols);
        for (const auto& b : biases) z.biases.emplace_back(b.size(), 0.0);
        return z;
    }

    // exact byte image of all parameters, for freeze-invariance checks
    std::vector<std::byte> byte_image() const {
        std::vector<std::byte> out;
        auto append = [&out](const double* p, size_t n) {
            const auto* raw = reinterpret_cast<const std::byte*>(p);
            out.insert(out.end(), raw, raw + n * sizeof(double));
        };
        for (const auto& w : weights) append(w.data.data(), w.data.size());
        for (const auto& b : biases) append(b.data(), b.size());
        return out;
    }

    bool operator==(const ParamSet&) const = default;
};

// Adam accumulators shaped like the ParamSet they update.
struct AdamState {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int64_t t = 0;
    std::vector<Matrix> m_weights, v_weights;
    std::vector<Vector> m_biases, v_biases;

    static AdamState for_params(const ParamSet& p, double lr = 1e-3, double b1 = 0.9,
                                double b2 = 0.999, double eps = 1e-8) {
        AdamState s;
        s.learning_rate = lr;
        s.beta1 = b1;
        s.beta2 = b2;
        s.epsilon = eps;
        for (const auto& w : p.weights) {
            s.m_weights.emplace_back(w.rows, w.cols);
            s.v_weights.emplace_back(w.rows, w.cols);
        }
        for (const auto& b : p.biases) {
            s.m_biases.emplace_back(b.size(), 0.0);
            s.v_biases.emplace_back(b.size(), 0.0);
        }
        return s;
    }
};

// Fan-in scaled uniform init, biases zero: w ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)).
// Deterministic for a fixed (spec, seed).
inline ParamSet init_mlp(const MlpSpec& spec, uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    ParamSet p;
    p.spec = spec;
    for (int l = 0; l < spec.n_layers(); ++l) {
        int in = spec.layer_sizes[l];
        int out = spec.layer_sizes[l + 1];
        double bound = std::sqrt(6.0 / static_cast<double>(in));
        Matrix w(out, in);
        for (double& x : w.data) x = rng.uniform(-bound, bound);
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(out, 0.0);
    }
    return p;
}

inline double activate(Activation a, double x) {
    if (a == Activation::ReLU) return x > 0.0 ? x : 0.0;
    return x > 0.0 ? x : std::expm1(x);  // ELU, alpha = 1
}

inline double activate_derivative(Activation a, double pre) {
    if (a == Activation::ReLU) return pre > 0.0 ? 1.0 : 0.0;
    return pre > 0.0 ? 1.0 : std::exp(pre);
}

namespace detail {

// One affine layer over a batch: out = X * W^T + b.
inline Matrix affine(const Matrix& x, const Matrix& w, const Vector& b) {
    Matrix out(x.rows, w.rows);
    for (int r = 0; r < x.rows; ++r) {
        const double* xi = x.row(r);
        double* oi = out.row(r);
        for (int j = 0; j < w.rows; ++j) {
            const double* wj = w.row(j);
            double acc = b[j];
            for (int c = 0; c < x.cols; ++c) acc += wj[c] * xi[c];
            oi[j] = acc;
        }
    }
    return out;
}

struct ForwardTrace {
    // post[0] is the input batch; post[l+1] = activation(pre[l]) except the
    // final layer which stays linear.
    std::vector<Matrix> pre;
    std::vector<Matrix> post;
};

inline ForwardTrace forward_trace(const ParamSet& p, const Matrix& batch) {
    if (batch.cols != p.spec.input_dim())
        throw std::invalid_argument("forward: batch width does not match spec input dim");
    ForwardTrace t;
    t.post.push_back(batch);
    for (int l = 0; l < p.spec.n_layers(); ++l) {
        Matrix z = affine(t.post.back(), p.weights[l], p.biases[l]);
        bool last = (l == p.spec.n_layers() - 1);
        if (last) {
            t.pre.push_back(z);
            t.post.push_back(t.pre.back());
        } else {
            Matrix a(z.rows, z.cols);
            for (size_t i = 0; i < z.data.size(); ++i)
                a.data[i] = activate(p.spec.activation, z.data[i]);
            t.pre.push_back(std::move(z));
            t.post.push_back(std::move(a));
        }
    }
    return t;
}

}  // namespace detail

// Batched forward pass; pure function of (params, batch).
inline Vector forward(const ParamSet& p, const Matrix& batch) {
    if (batch.cols != p.spec.input_dim())
        throw std::invalid_argument("forward: batch width does not match spec input dim");
    Matrix cur = batch;
    for (int l = 0; l < p.spec.n_layers(); ++l) {
        cur = detail::affine(cur, p.weights[l], p.biases[l]);
        if (l != p.spec.n_layers() - 1)
            for (double& x : cur.data) x = activate(p.spec.activation, x);
    }
    return cur.data;  // n x 1
}

namespace detail {

inline void check_loss_inputs(const Vector& pred, const Vector& target, LossKind kind,
                              const Vector& weights) {
    if (pred.size() != target.size())
        throw std::invalid_argument("loss: pred/target length mismatch");
    if (!weights.empty() && weights.size() != pred.size())
        throw std::invalid_argument("loss: sample_weights length mismatch");
    for (size_t i = 0; i < pred.size(); ++i) {
        if (std::isnan(pred[i]) || std::isnan(target[i]))
            throw std::invalid_argument("loss: NaN input");
        if (kind == LossKind::BinaryCrossEntropyFromLogits && target[i] != 0.0 && target[i] != 1.0)
            throw std::invalid_argument("loss: BCE target outside {0,1}");
    }
}

inline double weight_sum(const Vector& weights, size_t n) {
    if (weights.empty()) return static_cast<double>(n);
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
}

// stable per-sample BCE from a logit z: max(z,0) - z*y + log(1 + exp(-|z|))
inline double bce_logit(double z, double y) {
    return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace detail

// Weighted mean loss; weights default to 1 and are normalized by their sum.
inline double loss(const Vector& pred, const Vector& target, LossKind kind,
                   const Vector& sample_weights = {}) {
    detail::check_loss_inputs(pred, target, kind, sample_weights);
    double acc = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        double li = kind == LossKind::MeanSquaredError
                        ? (pred[i] - target[i]) * (pred[i] - target[i])
                        : detail::bce_logit(pred[i], target[i]);
        acc += sample_weights.empty() ? li : sample_weights[i] * li;
    }
    return acc / detail::weight_sum(sample_weights, pred.size());
}

// dLoss/dPred, the starting point for backprop.
inline Vector loss_gradient(const Vector& pred, const Vector& target, LossKind kind,
                            const Vector& sample_weights = {}) {
    detail::check_loss_inputs(pred, target, kind, sample_weights);
    double wsum = detail::weight_sum(sample_weights, pred.size());
    Vector g(pred.size());
    for (size_t i = 0; i < pred.size(); ++i) {
        double d = kind == LossKind::MeanSquaredError
                       ? 2.0 * (pred[i] - target[i])
                       : detail::sigmoid(pred[i]) - target[i];
        g[i] = (sample_weights.empty() ? d : sample_weights[i] * d) / wsum;
    }
    return g;
}

// Exact reverse-mode gradient of an arbitrary scalar-per-sample signal
// d_pred = dL/d(output_i). Returns gradients shaped like the ParamSet.
inline ParamSet backprop(const ParamSet& p, const Matrix& batch, const Vector& d_pred) {
    detail::ForwardTrace t = detail::forward_trace(p, batch);
    ParamSet g = p.zeros_like();
    int L = p.spec.n_layers();
    // delta of the current layer's pre-activation, batch x layer_width
    Matrix delta(batch.rows, 1);
    for (int r = 0; r < batch.rows; ++r) delta(r, 0) = d_pred[r];
    for (int l = L - 1; l >= 0; --l) {
        const Matrix& a_in = t.post[l];
        Matrix& gw = g.weights[l];
        Vector& gb = g.biases[l];
        for (int r = 0; r < delta.rows; ++r) {
            const double* dr = delta.row(r);
            const double* ar = a_in.row(r);
            for (int j = 0; j < gw.rows; ++j) {
                double dj = dr[j];
                gb[j] += dj;
                double* gwj = gw.row(j);
                for (int c = 0; c < gw.cols; ++c) gwj[c] += dj * ar[c];
            }
        }
        if (l == 0) break;
        const Matrix& w = p.weights[l];
        const Matrix& pre_prev = t.pre[l - 1];
        Matrix next(delta.rows, w.cols);
        for (int r = 0; r < delta.rows; ++r) {
            const double* dr = delta.row(r);
            double* nr = next.row(r);
            for (int c = 0; c < w.cols; ++c) nr[c] = 0.0;
            for (int j = 0; j < w.rows; ++j) {
                double dj = dr[j];
                const double* wj = w.row(j);
                for (int c = 0; c < w.cols; ++c) nr[c] += dj * wj[c];
            }
            const double* pr = pre_prev.row(r);
            for (int c = 0; c < w.cols; ++c)
                nr[c] *= activate_derivative(p.spec.activation, pr[c]);
        }
        delta = std::move(next);
    }
    return g;
}

// Gradient of loss(forward(params, batch), target) w.r.t. every parameter.
inline ParamSet grad(const ParamSet& p, const Matrix& batch, const Vector& target, LossKind kind,
                     const Vector& sample_weights = {}) {
    Vector pred = forward(p, batch);
    return backprop(p, batch, loss_gradient(pred, target, kind, sample_weights));
}

// Standard Adam with bias correction, in place; t increments by exactly 1.
inline void adam_update(ParamSet& p, const ParamSet& grads, AdamState& s) {
    if (grads.weights.size() != p.weights.size())
        throw std::invalid_argument("adam_update: gradient shape mismatch");
    s.t += 1;
    double bc1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
    double bc2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
    auto step = [&](double& param, double g, double& m, double& v) {
        m = s.beta1 * m + (1.0 - s.beta1) * g;
        v = s.beta2 * v + (1.0 - s.beta2) * g * g;
        param -= s.learning_rate * (m / bc1) / (std::sqrt(v / bc2) + s.epsilon);
    };
    for (size_t l = 0; l < p.weights.size(); ++l) {
        if (grads.weights[l].rows != p.weights[l].rows || grads.weights[l].cols != p.weights[l].cols)
            throw std::invalid_argument("adam_update: gradient shape mismatch");
        for (size_t i = 0; i < p.weights[l].data.size(); ++i)
            step(p.weights[l].data[i], grads.weights[l].data[i], s.m_weights[l].data[i],
                 s.v_weights[l].data[i]);
        for (size_t i = 0; i < p.biases[l].size(); ++i)
            step(p.biases[l][i], grads.biases[l][i], s.m_biases[l][i], s.v_biases[l][i]);
    }
}

// Central-difference oracle: worst relative error between analytic and
// numeric gradients over all parameters, with a 1e-8 floor in the denominator.
inline double finite_diff_check(const ParamSet& params, const Matrix& batch, const Vector& target,
                                LossKind kind, const Vector& sample_weights = {},
                                double h = 1e-5) {
    ParamSet p = params;
    ParamSet analytic = grad(p, batch, target, kind, sample_weights);
    double worst = 0.0;
    auto probe = [&](double& slot, double ga) {
        double saved = slot;
        slot = saved + h;
        double up = loss(forward(p, batch), target, kind, sample_weights);
        slot = saved - h;
        double down = loss(forward(p, batch), target, kind, sample_weights);
        slot = saved;
        double gf = (up - down) / (2.0 * h);
        double rel = std::abs(ga - gf) / std::max(std::abs(ga) + std::abs(gf), 1e-8);
        worst = std::max(worst, rel);
    };
    for (size_t l = 0; l < p.weights.size(); ++l) {
        for (size_t i = 0; i < p.weights[l].data.size(); ++i)
            probe(p.weights[l].data[i], analytic.weights[l].data[i]);
        for (size_t i = 0; i < p.biases[l].size(); ++i)
            probe(p.biases[l][i], analytic.biases[l][i]);
    }
    return worst;
}

}  // namespace regnet
