#pragma once

#include <functional>

#include "regnet/data.hpp"

namespace regnet {

enum class TrainMode { StepWise, AllAtOnce };

struct TrainConfig {
    int max_epochs = 512;
    int patience = 32;
    double min_delta = 0.005;
    int batch_size = 256;  // full batch when the training split is smaller
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    TrainMode mode = TrainMode::StepWise;
    bool class_balancing = true;  // classification only
    uint64_t seed = 42;

    void validate() const {
        if (max_epochs < 1) throw std::invalid_argument("TrainConfig: max_epochs must be >= 1");
        if (patience < 1) throw std::invalid_argument("TrainConfig: patience must be >= 1");
        if (min_delta < 0.0) throw std::invalid_argument("TrainConfig: min_delta must be >= 0");
        if (batch_size < 1) throw std::invalid_argument("TrainConfig: batch_size must be >= 1");
    }
};

// Inverse-frequency class weights, w_c = n_total / (2 * n_c).
inline std::pair<double, double> class_weights(const Vector& targets) {
    double n0 = 0.0, n1 = 0.0;
    for (double t : targets) {
        if (t == 0.0) n0 += 1.0;
        else if (t == 1.0) n1 += 1.0;
        else throw std::invalid_argument("class_weights: target outside {0,1}");
    }
    if (n0 == 0.0 || n1 == 0.0)
        throw std::invalid_argument("class_weights: both classes must be present");
    double n = n0 + n1;
    return {n / (2.0 * n0), n / (2.0 * n1)};
}

enum class StopDecision { Continue, Stop };

// Patience-gated early stopping. The counter resets only on improvements
// larger than min_delta; the parameter snapshot tracks every strict
// improvement so the restored weights achieve the minimum validation loss
// observed in the phase.
struct EarlyStopping {
    double min_delta = 0.005;
    int patience = 32;

    double best_val_loss = std::numeric_limits<double>::infinity();  // min_delta-gated
    double best_observed = std::numeric_limits<double>::infinity();
    int best_epoch = 0;
    int epochs_since_improvement = 0;
    bool nan_abort = false;
    std::vector<ParamSet> snapshot;

    EarlyStopping(double delta, int pat) : min_delta(delta), patience(pat) {}

    StopDecision update(int epoch, double val_loss, const std::vector<ParamSet*>& params) {
        if (std::isnan(val_loss)) {
            nan_abort = true;
            return StopDecision::Stop;
        }
        if (val_loss < best_observed) {
            best_observed = val_loss;
            best_epoch = epoch;
            snapshot.clear();
            snapshot.reserve(params.size());
            for (const ParamSet* p : params) snapshot.push_back(*p);
        }
        if (val_loss < best_val_loss - min_delta) {
            best_val_loss = val_loss;
            epochs_since_improvement = 0;
            return StopDecision::Continue;
        }
        ++epochs_since_improvement;
        return epochs_since_improvement >= patience ? StopDecision::Stop : StopDecision::Continue;
    }

    void restore(const std::vector<ParamSet*>& params) const {
        if (snapshot.empty()) return;
        for (size_t i = 0; i < params.size(); ++i) *params[i] = snapshot[i];
    }
};

struct EpochRecord {
    int epoch;
    double train_loss;
    double val_loss;
};

struct PhaseHistory {
    std::string phase;
    std::vector<EpochRecord> epochs;
    int best_epoch = 0;
    double best_val_loss = std::numeric_limits<double>::infinity();
    bool stopped_early = false;
    bool nan_abort = false;
};

struct TrainHistory {
    std::vector<PhaseHistory> phases;
    double final_val_loss = std::numeric_limits<double>::quiet_NaN();

    // minimum validation loss observed at any epoch of any phase
    double min_val_loss() const {
        double m = std::numeric_limits<double>::infinity();
        for (const auto& p : phases) m = std::min(m, p.best_val_loss);
        return m;
    }
};

// Which parameters a phase updates: the subnets of these levels, plus the
// residual network when selected. Everything else stays frozen.
struct PhaseSelection {
    std::set<int> levels;
    bool residual = false;

    std::string label() const {
        if (levels.empty() && residual) return "residual";
        std::string s;
        for (int k : levels) s += (s.empty() ? "level-" : "+") + std::to_string(k);
        if (residual) s += "+residual";
        return s;
    }
};

inline uint64_t phase_tag(const PhaseSelection& sel) {
    uint64_t t = 0x5048ULL;
    for (int k : sel.levels) t = mix64(t, static_cast<uint64_t>(k));
    if (sel.residual) t = mix64(t, 0x524553ULL);
    return t;
}

// Each phase draws its mini-batch shuffles from its own seeded stream.
inline uint64_t phase_seed(uint64_t seed, const PhaseSelection& sel) {
    return mix64(seed, phase_tag(sel));
}

using EpochObserver = std::function<void(const std::string& phase, int epoch, double train_loss,
                                         double val_loss, const RegressionNetwork& model)>;

namespace detail {

// Sum of every frozen component over a batch: the constant part of the
// forward pass during one phase.
inline Vector frozen_offset(const RegressionNetwork& model, const Matrix& x,
                            const PhaseSelection& sel) {
    Vector off(x.rows, 0.0);
    for (const auto& [s, params] : model.subnets) {
        if (sel.levels.count(s.level())) continue;
        Vector part = forward(params, gather_columns(x, model.subset_columns(s)));
        for (size_t i = 0; i < off.size(); ++i) off[i] += part[i];
    }
    if (model.residual && !sel.residual) {
        Vector part = forward(*model.residual, x);
        for (size_t i = 0; i < off.size(); ++i) off[i] += part[i];
    }
    if (model.spec.include_bias)
        for (double& v : off) v += model.bias;
    return off;
}

}  // namespace detail

// Trains the selected level(s) (and/or residual) while all other parameters
// stay bit-identical; frozen components still contribute to the forward
// pass, so the trained parts fit what the lower levels left unexplained.
inline PhaseHistory train_level(RegressionNetwork& model, const PhaseSelection& sel,
                                const Dataset& train, const Dataset& val, const TrainConfig& cfg,
                                const EpochObserver& observer = {}) {
    cfg.validate();
    if (sel.levels.empty() && !sel.residual)
        throw std::invalid_argument("train_level: empty phase selection");
    if (sel.residual && !model.residual)
        throw std::invalid_argument("train_level: model has no residual network");
    if (train.x.cols != model.total_width() || val.x.cols != model.total_width())
        throw std::invalid_argument("train_level: data width does not match model schema");

    std::vector<ParamSet*> nets;
    std::vector<Matrix> x_train, x_val;
    for (auto& [s, params] : model.subnets) {
        if (!sel.levels.count(s.level())) continue;
        nets.push_back(&params);
        auto cols = model.subset_columns(s);
        x_train.push_back(gather_columns(train.x, cols));
        x_val.push_back(gather_columns(val.x, cols));
    }
    if (sel.residual) {
        nets.push_back(&*model.residual);
        x_train.push_back(train.x);
        x_val.push_back(val.x);
    }
    if (nets.empty())
        throw std::invalid_argument("train_level: no subnetworks at the selected level(s)");

    LossKind kind = loss_for_task(model.task);
    Vector train_weights;
    if (model.task == TaskKind::BinaryClassification && cfg.class_balancing) {
        auto [w0, w1] = class_weights(train.y);
        train_weights.reserve(train.y.size());
        for (double t : train.y) train_weights.push_back(t == 1.0 ? w1 : w0);
    }

    Vector off_train = detail::frozen_offset(model, train.x, sel);
    Vector off_val = detail::frozen_offset(model, val.x, sel);

    std::vector<AdamState> states;
    states.reserve(nets.size());
    for (ParamSet* p : nets)
        states.push_back(AdamState::for_params(*p, cfg.learning_rate, cfg.beta1, cfg.beta2,
                                               cfg.epsilon));

    size_t n = train.y.size();
    auto batch_size = static_cast<size_t>(cfg.batch_size);
    Rng rng(phase_seed(cfg.seed, sel));
    EarlyStopping stop(cfg.min_delta, cfg.patience);

    PhaseHistory hist;
    hist.phase = sel.label();
    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        auto perm = shuffled_indices(rng, n);
        double loss_acc = 0.0;
        bool diverged = false;
        for (size_t start = 0; start < n && !diverged; start += batch_size) {
            size_t end = std::min(n, start + batch_size);
            std::vector<size_t> idx(perm.begin() + start, perm.begin() + end);
            Vector pred = gather(off_train, idx);
            std::vector<Matrix> bx;
            bx.reserve(nets.size());
            for (size_t k = 0; k < nets.size(); ++k) {
                bx.push_back(gather_rows(x_train[k], idx));
                Vector out = forward(*nets[k], bx[k]);
                for (size_t i = 0; i < pred.size(); ++i) pred[i] += out[i];
            }
            if (!all_finite(pred)) {
                diverged = true;
                break;
            }
            Vector yb = gather(train.y, idx);
            Vector wb = train_weights.empty() ? Vector{} : gather(train_weights, idx);
            loss_acc += loss(pred, yb, kind, wb) * static_cast<double>(idx.size());
            Vector dpred = loss_gradient(pred, yb, kind, wb);
            for (size_t k = 0; k < nets.size(); ++k)
                adam_update(*nets[k], backprop(*nets[k], bx[k], dpred), states[k]);
        }
        double train_loss = diverged ? std::numeric_limits<double>::quiet_NaN()
                                     : loss_acc / static_cast<double>(n);

        Vector val_pred = off_val;
        for (size_t k = 0; k < nets.size(); ++k) {
            Vector out = forward(*nets[k], x_val[k]);
            for (size_t i = 0; i < val_pred.size(); ++i) val_pred[i] += out[i];
        }
        // a non-finite validation pass stops the phase with the error flag
        double val_loss = all_finite(val_pred) && !diverged
                              ? loss(val_pred, val.y, kind)
                              : std::numeric_limits<double>::quiet_NaN();

        hist.epochs.push_back({epoch, train_loss, val_loss});
        if (observer) observer(hist.phase, epoch, train_loss, val_loss, model);
        if (stop.update(epoch, val_loss, nets) == StopDecision::Stop) {
            hist.stopped_early = !stop.nan_abort;
            hist.nan_abort = stop.nan_abort;
            break;
        }
    }
    stop.restore(nets);
    hist.best_epoch = stop.best_epoch;
    hist.best_val_loss = stop.best_observed;
    return hist;
}

namespace detail {

// Closed-form level-0 fit: the constant minimizing the training loss. The
// mean for squared error, the log-odds of the class rate for cross-entropy.
inline void fit_bias(RegressionNetwork& model, const Dataset& train) {
    if (!model.spec.include_bias) return;
    if (model.task == TaskKind::Regression) {
        model.bias = population_mean(train.y);
    } else {
        double n1 = 0.0;
        for (double t : train.y) n1 += t;
        double n0 = static_cast<double>(train.y.size()) - n1;
        model.bias = std::log(std::max(n1, 0.5) / std::max(n0, 0.5));
    }
}

}  // namespace detail

// Step-wise procedure: train level-1 functions, freeze them, train level-2,
// ..., then the residual network last. Lower levels explain as much as they
// can because later phases only fit what is left.
inline TrainHistory train_stepwise(RegressionNetwork& model, const Dataset& train,
                                   const Dataset& val, const TrainConfig& cfg,
                                   const EpochObserver& observer = {}) {
    if (cfg.mode != TrainMode::StepWise)
        throw std::invalid_argument("train_stepwise: config mode is not StepWise");
    detail::fit_bias(model, train);
    TrainHistory hist;
    for (int k : model.levels_present()) {
        PhaseSelection sel;
        sel.levels.insert(k);
        hist.phases.push_back(train_level(model, sel, train, val, cfg, observer));
    }
    if (model.residual) {
        PhaseSelection sel;
        sel.residual = true;
        hist.phases.push_back(train_level(model, sel, train, val, cfg, observer));
    }
    if (hist.phases.empty())
        throw std::invalid_argument("train_stepwise: model has nothing to train");
    hist.final_val_loss = hist.phases.back().best_val_loss;
    return hist;
}

// Single phase that updates every subnetwork and the residual at once.
inline TrainHistory train_all_at_once(RegressionNetwork& model, const Dataset& train,
                                      const Dataset& val, const TrainConfig& cfg,
                                      const EpochObserver& observer = {}) {
    if (cfg.mode != TrainMode::AllAtOnce)
        throw std::invalid_argument("train_all_at_once: config mode is not AllAtOnce");
    detail::fit_bias(model, train);
    PhaseSelection sel;
    sel.levels = model.levels_present();
    sel.residual = model.residual.has_value();
    PhaseHistory phase = train_level(model, sel, train, val, cfg, observer);
    phase.phase = "all";
    TrainHistory hist;
    hist.phases.push_back(std::move(phase));
    hist.final_val_loss = hist.phases.back().best_val_loss;
    return hist;
}

inline TrainHistory train(RegressionNetwork& model, const Dataset& train_data, const Dataset& val,
                          const TrainConfig& cfg, const EpochObserver& observer = {}) {
    return cfg.mode == TrainMode::StepWise ? train_stepwise(model, train_data, val, cfg, observer)
                                           : train_all_at_once(model, train_data, val, cfg, observer);
}

// Exact linear (or logistic) regression baseline: one affine unit per
// feature group, trained with the same loop as every other model.
inline std::pair<RegressionNetwork, TrainHistory> train_baseline_regression(
    const Dataset& train_data, const Dataset& val, const TrainConfig& cfg,
    const EpochObserver& observer = {}) {
    ModelSpec spec;
    spec.k_max = 1;
    spec.include_residual = false;
    spec.default_template = SubnetTemplate{{}, Activation::ELU};  // [d_S, 1]: pure affine
    RegressionNetwork model = build_model(train_data.schema, spec, train_data.task, cfg.seed);
    TrainConfig c = cfg;
    c.mode = TrainMode::StepWise;
    TrainHistory hist = train_stepwise(model, train_data, val, c, observer);
    return {std::move(model), std::move(hist)};
}

// Effective affine form of a hidden-layer-free model: per-encoded-column
// weights plus the summed intercept.
inline std::pair<Vector, double> linear_coefficients(const RegressionNetwork& model) {
    Vector w(model.total_width(), 0.0);
    double intercept = model.spec.include_bias ? model.bias : 0.0;
    for (const auto& [s, params] : model.subnets) {
        if (params.spec.n_layers() != 1)
            throw std::invalid_argument("linear_coefficients: subnetwork has hidden layers");
        auto cols = model.subset_columns(s);
        for (size_t c = 0; c < cols.size(); ++c) w[cols[c]] += params.weights[0](0, static_cast<int>(c));
        intercept += params.biases[0][0];
    }
    return {std::move(w), intercept};
}

}  // namespace regnet
