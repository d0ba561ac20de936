// Optimization loop: weighted BCE objective, Adam updates, per-epoch
// shuffling and validation, best-checkpoint retention, early stopping, and a
// resumable training state with bit-exact serialization.

#ifndef RADDET_TRAIN_HPP
#define RADDET_TRAIN_HPP

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "raddet/autodiff.hpp"
#include "raddet/common.hpp"
#include "raddet/datagen.hpp"
#include "raddet/eval.hpp"
#include "raddet/model.hpp"
#include "raddet/serialize.hpp"

namespace raddet {

struct TrainConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps_adam = 1e-8;
    int epochs = 50;
    int batch_size = 16;
    double pos_weight_fixed = -1.0;  // <= 0 selects auto mode
    double pos_weight_max = 1000.0;
    uint64_t seed = 0;
    int patience = 10;
    double val_tau = 0.5;

    void validate() const {
        require(lr > 0.0, "TrainConfig: learning rate must be > 0");
        require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0,
                "TrainConfig: betas must lie in [0,1)");
        require(eps_adam > 0.0, "TrainConfig: eps must be > 0");
        require(epochs >= 1 && batch_size >= 1, "TrainConfig: epochs and batch_size must be >= 1");
        require(patience >= 1, "TrainConfig: patience must be >= 1");
    }
};

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    double val_pd = 0.0;
    double val_pf = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> records;
    int best_epoch = -1;
};

// ---------------------------------------------------------------------------
// Loss

// Weighted BCE on plain values (same clamp as the taped op).
inline double bce_loss_value(const std::vector<double>& probs, const std::vector<double>& labels,
                             double pos_weight) {
    require(probs.size() == labels.size() && !probs.empty(), "loss: shape mismatch");
    const double lo = 1e-7, hi = 1.0 - 1e-7;
    double acc = 0.0;
    for (size_t i = 0; i < probs.size(); ++i) {
        double p = std::min(hi, std::max(lo, probs[i]));
        acc += pos_weight * labels[i] * std::log(p) + (1.0 - labels[i]) * std::log(1.0 - p);
    }
    return -acc / static_cast<double>(probs.size());
}

// Auto mode: background/target cell ratio over the batch, clamped to
// [1, pos_weight_max]; batches without target cells fall back to 1.
inline double batch_pos_weight(const std::vector<const DetectionMask*>& masks,
                               const TrainConfig& cfg) {
    if (cfg.pos_weight_fixed > 0.0) return cfg.pos_weight_fixed;
    long targets = 0, total = 0;
    for (const DetectionMask* m : masks) {
        targets += m->count();
        total += m->size();
    }
    if (targets == 0) return 1.0;
    double w = static_cast<double>(total - targets) / static_cast<double>(targets);
    return std::min(cfg.pos_weight_max, std::max(1.0, w));
}

// Mask flattened in the model's sequence order (range fastest).
inline std::vector<double> flatten_labels(const DetectionMask& mask) {
    std::vector<double> out(static_cast<size_t>(mask.rows) * mask.cols);
    size_t i = 0;
    for (int c = 0; c < mask.cols; ++c)
        for (int r = 0; r < mask.rows; ++r) out[i++] = mask.at(r, c);
    return out;
}

// ---------------------------------------------------------------------------
// Adam

struct AdamState {
    std::vector<std::vector<double>> m, v;
    long t = 0;

    static AdamState for_model(DetectorModel& model) {
        AdamState st;
        for (auto& [name, p] : model.params()) {
            st.m.emplace_back(p->size(), 0.0);
            st.v.emplace_back(p->size(), 0.0);
        }
        return st;
    }
};

inline void adam_step(std::vector<std::pair<std::string, ad::Tensor*>> params,
                      const std::vector<std::vector<double>>& grads, AdamState& st,
                      const TrainConfig& cfg) {
    require(params.size() == grads.size() && params.size() == st.m.size(),
            "adam_step: registry mismatch");
    st.t += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
    double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi].second->v;
        const auto& g = grads[pi];
        require(g.size() == p.size(), "adam_step: gradient size mismatch");
        for (size_t i = 0; i < p.size(); ++i) {
            if (!std::isfinite(g[i]))
                throw NumericError("adam_step: non-finite gradient in " + params[pi].first);
            st.m[pi][i] = cfg.beta1 * st.m[pi][i] + (1.0 - cfg.beta1) * g[i];
            st.v[pi][i] = cfg.beta2 * st.v[pi][i] + (1.0 - cfg.beta2) * g[i] * g[i];
            double mhat = st.m[pi][i] / bc1;
            double vhat = st.v[pi][i] / bc2;
            p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps_adam);
        }
    }
}

// ---------------------------------------------------------------------------
// Gradient of the loss on one sample

struct SampleGrad {
    double loss = 0.0;
    std::vector<std::vector<double>> grads;  // registry order
};

inline SampleGrad sample_gradient(DetectorModel& model, const LabeledSample& sample,
                                  double pos_weight) {
    check_frame(model, sample.frame);
    SampleGrad out;
    ad::Tape tape;
    TapeForward fwd = forward_on_tape(model, tape, standardize_frame(sample.frame));
    ad::Var labels = tape.constant({model.cfg.L}, flatten_labels(sample.mask));
    ad::Var loss = tape.bce_loss(fwd.probs, labels, pos_weight);
    out.loss = tape.val(loss)[0];
    tape.backward(loss);
    for (ad::Var leaf : fwd.leaves) out.grads.push_back(tape.grad(leaf));
    return out;
}

// One optimizer step on a batch. Tapes for the batch members are built
// concurrently; gradients reduce in fixed sample order.
inline double train_step(DetectorModel& model, const std::vector<const LabeledSample*>& batch,
                         AdamState& adam, const TrainConfig& cfg) {
    require(!batch.empty(), "train_step: empty batch");
    std::vector<const DetectionMask*> masks;
    for (const LabeledSample* s : batch) masks.push_back(&s->mask);
    double w = batch_pos_weight(masks, cfg);

    std::vector<SampleGrad> per_sample(batch.size());
    parallel_for(static_cast<long>(batch.size()),
                 [&](long i) { per_sample[i] = sample_gradient(model, *batch[i], w); });

    auto registry = model.params();
    std::vector<std::vector<double>> grads;
    for (auto& [name, p] : registry) grads.emplace_back(p->size(), 0.0);
    double loss = 0.0;
    double inv_b = 1.0 / static_cast<double>(batch.size());
    for (const SampleGrad& sg : per_sample) {
        loss += sg.loss * inv_b;
        for (size_t pi = 0; pi < grads.size(); ++pi)
            for (size_t k = 0; k < grads[pi].size(); ++k) grads[pi][k] += sg.grads[pi][k] * inv_b;
    }
    adam_step(registry, grads, adam, cfg);
    return loss;
}

// ---------------------------------------------------------------------------
// Training state and loop

struct TrainState {
    DetectorModel model;
    AdamState adam;
    int next_epoch = 0;
    double best_val = kInf;
    int best_epoch = -1;
    std::vector<std::vector<double>> best_params;
    int bad_epochs = 0;
    bool stopped = false;
    TrainReport report;
};

inline TrainState init_train_state(DetectorModel model) {
    TrainState st;
    st.adam = AdamState::for_model(model);
    st.model = std::move(model);
    return st;
}

inline DetectorModel best_model(const TrainState& st) {
    DetectorModel out = st.model;
    if (!st.best_params.empty()) {
        auto registry = out.params();
        for (size_t i = 0; i < registry.size(); ++i) registry[i].second->v = st.best_params[i];
    }
    return out;
}

namespace detail {

struct ValScore {
    double loss = 0.0, pd = 0.0, pf = 0.0;
};

inline ValScore validate_split(const DetectorModel& model,
                               const std::vector<const LabeledSample*>& samples, double pos_weight,
                               double tau) {
    ValScore out;
    MetricCounts counts;
    for (const LabeledSample* s : samples) {
        std::vector<double> probs = forward(model, s->frame);
        out.loss += bce_loss_value(probs, flatten_labels(s->mask), pos_weight);
        counts.add(predict_mask(probs, tau, s->frame.rows, s->frame.cols), s->mask,
                   ValidRegion::full(s->frame.rows, s->frame.cols));
    }
    out.loss /= static_cast<double>(samples.size());
    MetricResult m = counts.finalize();
    out.pd = m.pd;
    out.pf = m.pf;
    return out;
}

}  // namespace detail

// Advances the state by up to `max_epochs_this_call` epochs (all remaining if
// negative). Stops early after `patience` epochs without validation
// improvement. Deterministic in (seed, dataset, config, state).
inline void run_epochs(TrainState& st, const Dataset& ds, const TrainConfig& cfg,
                       int max_epochs_this_call = -1) {
    cfg.validate();
    require(!ds.samples.empty(), "train: empty dataset");
    std::vector<int> train_idx = ds.indices_of(kTrain);
    std::vector<int> val_idx = ds.indices_of(kVal);
    require(!train_idx.empty(), "train: empty training split");
    if (val_idx.empty()) val_idx = train_idx;  // fall back: validate on train

    std::vector<const LabeledSample*> val_samples;
    for (int i : val_idx) val_samples.push_back(&ds.samples[i]);
    std::vector<const DetectionMask*> val_masks;
    for (const LabeledSample* s : val_samples) val_masks.push_back(&s->mask);
    double w_val = batch_pos_weight(val_masks, cfg);

    int ran = 0;
    while (!st.stopped && st.next_epoch < cfg.epochs &&
           (max_epochs_this_call < 0 || ran < max_epochs_this_call)) {
        int epoch = st.next_epoch;
        std::vector<int> order = train_idx;
        std::mt19937_64 rng = rng_for(cfg.seed, 0xe70c0000ULL + static_cast<uint64_t>(epoch));
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0.0;
        long seen = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            size_t end = std::min(order.size(), start + cfg.batch_size);
            std::vector<const LabeledSample*> batch;
            for (size_t i = start; i < end; ++i) batch.push_back(&ds.samples[order[i]]);
            double batch_loss = train_step(st.model, batch, st.adam, cfg);
            loss_sum += batch_loss * static_cast<double>(batch.size());
            seen += static_cast<long>(batch.size());
        }

        detail::ValScore val = detail::validate_split(st.model, val_samples, w_val, cfg.val_tau);
        EpochRecord rec{epoch, loss_sum / static_cast<double>(seen), val.loss, val.pd, val.pf};
        st.report.records.push_back(rec);

        if (val.loss < st.best_val) {
            st.best_val = val.loss;
            st.best_epoch = epoch;
            st.report.best_epoch = epoch;
            st.best_params.clear();
            for (auto& [name, p] : st.model.params()) st.best_params.push_back(p->v);
            st.bad_epochs = 0;
        } else {
            st.bad_epochs += 1;
            if (st.bad_epochs >= cfg.patience) st.stopped = true;
        }
        st.next_epoch += 1;
        ran += 1;
    }
}

// Trains to completion and returns the best model with the report.
inline std::pair<DetectorModel, TrainReport> train(const DetectorModel& model, const Dataset& ds,
                                                   const TrainConfig& cfg) {
    TrainState st = init_train_state(model);
    run_epochs(st, ds, cfg);
    return {best_model(st), st.report};
}

// ---------------------------------------------------------------------------
// Report CSV

inline std::string report_csv(const TrainReport& report) {
    std::ostringstream out;
    out << "epoch,train_loss,val_loss,val_pd,val_pf\n";
    for (const EpochRecord& r : report.records)
        out << r.epoch << "," << format_double(r.train_loss) << "," << format_double(r.val_loss)
            << "," << format_double(r.val_pd) << "," << format_double(r.val_pf) << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Resumable state serialization (bit-exact, reuses the checkpoint container)

inline void save_train_state(const TrainState& st, const std::string& path) {
    std::vector<ExtraArray> extras;
    auto params = const_cast<TrainState&>(st).model.params();
    for (size_t i = 0; i < params.size(); ++i) {
        extras.push_back({"adam.m." + params[i].first, st.adam.m[i]});
        extras.push_back({"adam.v." + params[i].first, st.adam.v[i]});
    }
    if (!st.best_params.empty()) {
        for (size_t i = 0; i < params.size(); ++i)
            extras.push_back({"best." + params[i].first, st.best_params[i]});
    }
    extras.push_back({"state.scalars",
                      {static_cast<double>(st.adam.t), static_cast<double>(st.next_epoch),
                       st.best_val, static_cast<double>(st.best_epoch),
                       static_cast<double>(st.bad_epochs), st.stopped ? 1.0 : 0.0,
                       static_cast<double>(st.report.best_epoch)}});
    std::vector<double> rep;
    for (const EpochRecord& r : st.report.records) {
        rep.push_back(static_cast<double>(r.epoch));
        rep.push_back(r.train_loss);
        rep.push_back(r.val_loss);
        rep.push_back(r.val_pd);
        rep.push_back(r.val_pf);
    }
    extras.push_back({"state.report", rep});
    save_checkpoint(st.model, path, extras);
}

inline TrainState load_train_state(const std::string& path) {
    Checkpoint ck = load_checkpoint(path);
    TrainState st = init_train_state(std::move(ck.model));
    auto params = st.model.params();
    auto find = [&](const std::string& name) -> const std::vector<double>* {
        for (const auto& e : ck.extras)
            if (e.name == name) return &e.data;
        return nullptr;
    };
    for (size_t i = 0; i < params.size(); ++i) {
        if (const auto* m = find("adam.m." + params[i].first)) st.adam.m[i] = *m;
        if (const auto* v = find("adam.v." + params[i].first)) st.adam.v[i] = *v;
    }
    bool has_best = find("best." + params[0].first) != nullptr;
    if (has_best) {
        for (size_t i = 0; i < params.size(); ++i)
            st.best_params.push_back(*find("best." + params[i].first));
    }
    if (const auto* s = find("state.scalars")) {
        st.adam.t = static_cast<long>((*s)[0]);
        st.next_epoch = static_cast<int>((*s)[1]);
        st.best_val = (*s)[2];
        st.best_epoch = static_cast<int>((*s)[3]);
        st.bad_epochs = static_cast<int>((*s)[4]);
        st.stopped = (*s)[5] != 0.0;
        st.report.best_epoch = static_cast<int>((*s)[6]);
    }
    if (const auto* rep = find("state.report")) {
        for (size_t i = 0; i + 5 <= rep->size(); i += 5)
            st.report.records.push_back({static_cast<int>((*rep)[i]), (*rep)[i + 1], (*rep)[i + 2],
                                         (*rep)[i + 3], (*rep)[i + 4]});
    }
    return st;
}

}  // namespace raddet

#endif  // RADDET_TRAIN_HPP
