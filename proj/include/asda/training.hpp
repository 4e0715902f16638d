#ifndef ASDA_TRAINING_HPP
#define ASDA_TRAINING_HPP

#include "asda/core.hpp"
#include "asda/image.hpp"
#include "asda/loss.hpp"
#include "asda/model.hpp"
#include "asda/records.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace asda {

/// Indices into a view list: one query, one matching positive, N non-matching
/// negatives.
struct TrainingTuple {
    Index query = 0;
    Index positive = 0;
    std::vector<Index> negatives;
};

/// Seeded tuple mining over instance labels: positives share the query's
/// instance, negatives never do.
inline std::vector<TrainingTuple> build_tuples(const std::vector<int>& labels, std::uint64_t seed,
                                               Index count, Index n_negatives) {
    require(n_negatives >= 1, "build_tuples: need at least one negative per tuple");
    std::map<int, std::vector<Index>> by_instance;
    for (std::size_t i = 0; i < labels.size(); ++i)
        by_instance[labels[i]].push_back(static_cast<Index>(i));
    std::vector<int> usable;  // instances with >= 2 views can serve as query
    for (const auto& [inst, views] : by_instance)
        if (views.size() >= 2) usable.push_back(inst);
    require(by_instance.size() >= 2 && usable.size() >= 2,
            "build_tuples: need at least 2 instances with 2 views each");
    Rng rng(mix_seed(seed, 0x7a91e5ULL));
    std::vector<TrainingTuple> tuples;
    tuples.reserve(static_cast<std::size_t>(count));
    for (Index t = 0; t < count; ++t) {
        const int inst = usable[static_cast<std::size_t>(
            rng.uniform_int(0, static_cast<std::int64_t>(usable.size()) - 1))];
        const auto& views = by_instance[inst];
        const Index qi = static_cast<Index>(rng.uniform_int(0, static_cast<std::int64_t>(views.size()) - 1));
        Index pi = qi;
        while (pi == qi)
            pi = static_cast<Index>(rng.uniform_int(0, static_cast<std::int64_t>(views.size()) - 1));
        TrainingTuple tup;
        tup.query = views[static_cast<std::size_t>(qi)];
        tup.positive = views[static_cast<std::size_t>(pi)];
        while (static_cast<Index>(tup.negatives.size()) < n_negatives) {
            const Index cand = static_cast<Index>(
                rng.uniform_int(0, static_cast<std::int64_t>(labels.size()) - 1));
            if (labels[static_cast<std::size_t>(cand)] != inst) tup.negatives.push_back(cand);
        }
        tuples.push_back(std::move(tup));
    }
    return tuples;
}

struct OptimizerConfig {
    double learning_rate = 1e-6;  // lr at epoch 0
    double decay_rate = 0.1;      // lr_i = lr0 * exp(-decay_rate * i)
    double beta1 = 0.9;           // "momentum" in Adam's first moment
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 5e-4;
    double tau = 0.75;            // contrastive margin
    Index batch_tuples = 5;
    Index n_negatives = 5;
    Index tuples_per_epoch = 25;

    void validate() const {
        require(learning_rate > 0, "optimizer: learning rate must be positive");
        require(tau > 0, "optimizer: margin must be positive");
        require(batch_tuples >= 1 && n_negatives >= 1 && tuples_per_epoch >= 1,
                "optimizer: batch/tuple counts must be positive");
    }
};

inline double epoch_learning_rate(const OptimizerConfig& cfg, Index epoch) {
    return cfg.learning_rate * std::exp(-cfg.decay_rate * static_cast<double>(epoch));
}

template <typename Scalar>
struct AdamState {
    Vector<Scalar> m;
    Vector<Scalar> v;
    Index t = 0;

    static AdamState zeros(Index n) {
        AdamState s;
        s.m = Vector<Scalar>::Zero(n);
        s.v = Vector<Scalar>::Zero(n);
        return s;
    }
};

/// One Adam update with L2 weight decay folded into the gradient.
template <typename Scalar>
void adam_step(Vector<Scalar>& params, const Vector<Scalar>& grads, AdamState<Scalar>& state,
               Scalar lr, const OptimizerConfig& cfg) {
    require(params.size() == grads.size() && params.size() == state.m.size(),
            "adam_step: size mismatch");
    const Vector<Scalar> g = grads + static_cast<Scalar>(cfg.weight_decay) * params;
    state.t += 1;
    const Scalar b1 = static_cast<Scalar>(cfg.beta1), b2 = static_cast<Scalar>(cfg.beta2);
    state.m = b1 * state.m + (Scalar(1) - b1) * g;
    state.v = b2 * state.v + (Scalar(1) - b2) * g.cwiseProduct(g);
    const Scalar corr1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(state.t));
    const Scalar corr2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(state.t));
    const Vector<Scalar> mhat = state.m / corr1;
    const Vector<Scalar> vhat = state.v / corr2;
    params -= lr * (mhat.array() / (vhat.array().sqrt() + static_cast<Scalar>(cfg.epsilon)))
                       .matrix();
}

/// Mean tuple loss over a batch, forward only.
template <typename Scalar>
Scalar batch_loss(const Model<Scalar>& model, const std::vector<ImageTensor<Scalar>>& images,
                  const std::vector<TrainingTuple>& tuples, Scalar tau,
                  ForwardSignature* sig = nullptr) {
    require(!tuples.empty(), "batch_loss: empty batch");
    ModelCache<Scalar>* no_cache = nullptr;
    Scalar total = Scalar(0);
    for (const auto& tup : tuples) {
        const Descriptor<Scalar> dq =
            model_forward_image(model, images[static_cast<std::size_t>(tup.query)], no_cache, sig);
        const Descriptor<Scalar> dp =
            model_forward_image(model, images[static_cast<std::size_t>(tup.positive)], no_cache, sig);
        std::vector<Descriptor<Scalar>> dn;
        dn.reserve(tup.negatives.size());
        for (Index n : tup.negatives)
            dn.push_back(model_forward_image(model, images[static_cast<std::size_t>(n)], no_cache, sig));
        total += contrastive_loss(dq, dp, dn, tau, sig);
    }
    return total / static_cast<Scalar>(tuples.size());
}

/// Exact gradients of the mean batch loss w.r.t. every trainable parameter.
/// The erasing masks are detached constants, matching the forward pass.
template <typename Scalar>
Scalar compute_gradients(const Model<Scalar>& model, const std::vector<ImageTensor<Scalar>>& images,
                         const std::vector<TrainingTuple>& tuples, Scalar tau,
                         ModelGrads<Scalar>& grads, ForwardSignature* sig = nullptr) {
    require(!tuples.empty(), "compute_gradients: empty batch");
    const Scalar inv_batch = Scalar(1) / static_cast<Scalar>(tuples.size());
    Scalar total = Scalar(0);
    for (const auto& tup : tuples) {
        ModelCache<Scalar> cq, cp;
        const Descriptor<Scalar> dq =
            model_forward_image(model, images[static_cast<std::size_t>(tup.query)], &cq, sig);
        const Descriptor<Scalar> dp =
            model_forward_image(model, images[static_cast<std::size_t>(tup.positive)], &cp, sig);
        std::vector<ModelCache<Scalar>> cn(tup.negatives.size());
        std::vector<Descriptor<Scalar>> dn;
        dn.reserve(tup.negatives.size());
        for (std::size_t i = 0; i < tup.negatives.size(); ++i)
            dn.push_back(model_forward_image(
                model, images[static_cast<std::size_t>(tup.negatives[i])], &cn[i], sig));
        const ContrastiveGrads<Scalar> lg = contrastive_loss_backward(dq, dp, dn, tau, sig);
        total += lg.loss;
        model_backward(model, cq, (inv_batch * lg.d_query).eval(), grads);
        model_backward(model, cp, (inv_batch * lg.d_positive).eval(), grads);
        for (std::size_t i = 0; i < tup.negatives.size(); ++i)
            model_backward(model, cn[i], (inv_batch * lg.d_negatives[i]).eval(), grads);
    }
    return total * inv_batch;
}

struct EpochMetrics {
    Index epoch = 0;
    double learning_rate = 0;
    double train_loss = 0;
    double val_loss = 0;
};

template <typename Scalar>
struct TrainResult {
    std::vector<EpochMetrics> epochs;
    bool diverged = false;
};

/// Adam training loop over seeded tuple streams; emits one metrics row per
/// epoch and invokes `on_epoch_end` (checkpointing) after each. On a
/// non-finite loss the loop halts with the last finished epoch's parameters.
template <typename Scalar>
TrainResult<Scalar> train(Model<Scalar>& model, const std::vector<ImageTensor<Scalar>>& images,
                          const std::vector<int>& labels,
                          const std::vector<ImageTensor<Scalar>>& val_images,
                          const std::vector<int>& val_labels, const OptimizerConfig& cfg,
                          Index epochs, std::uint64_t seed, AdamState<Scalar>* adam_io = nullptr,
                          Index start_epoch = 0,
                          const std::function<void(const Model<Scalar>&, const AdamState<Scalar>&,
                                                   Index, const EpochMetrics&)>& on_epoch_end = {}) {
    cfg.validate();
    require(epochs >= 0, "train: epoch count must be non-negative");
    TrainResult<Scalar> result;
    AdamState<Scalar> local = AdamState<Scalar>::zeros(model_param_count(model));
    AdamState<Scalar>& adam = adam_io ? *adam_io : local;
    if (adam.m.size() != model_param_count(model)) adam = AdamState<Scalar>::zeros(model_param_count(model));
    std::vector<TrainingTuple> val_tuples;
    if (!val_images.empty())
        val_tuples = build_tuples(val_labels, mix_seed(seed, 0xa11da7aULL),
                                  std::max<Index>(4, cfg.batch_tuples), cfg.n_negatives);
    Vector<Scalar> params = pack_parameters(model);
    Vector<Scalar> backup = params;
    for (Index e = start_epoch; e < start_epoch + epochs; ++e) {
        const Scalar lr = static_cast<Scalar>(epoch_learning_rate(cfg, e));
        const std::vector<TrainingTuple> tuples =
            build_tuples(labels, mix_seed(seed, static_cast<std::uint64_t>(e)),
                         cfg.tuples_per_epoch, cfg.n_negatives);
        backup = pack_parameters(model);
        double epoch_loss = 0;
        Index batches = 0;
        bool bad = false;
        for (std::size_t off = 0; off < tuples.size(); off += static_cast<std::size_t>(cfg.batch_tuples)) {
            const std::size_t end = std::min(tuples.size(), off + static_cast<std::size_t>(cfg.batch_tuples));
            const std::vector<TrainingTuple> batch(tuples.begin() + static_cast<std::ptrdiff_t>(off),
                                                   tuples.begin() + static_cast<std::ptrdiff_t>(end));
            ModelGrads<Scalar> grads = ModelGrads<Scalar>::zeros_like(model);
            Scalar loss;
            try {
                loss = compute_gradients(model, images, batch, static_cast<Scalar>(cfg.tau), grads);
            } catch (const numeric_error&) {
                bad = true;
                break;
            }
            if (!std::isfinite(static_cast<double>(loss))) {
                bad = true;
                break;
            }
            epoch_loss += static_cast<double>(loss);
            ++batches;
            params = pack_parameters(model);
            adam_step(params, pack_gradients(model, grads), adam, lr, cfg);
            unpack_parameters(model, params);
        }
        if (bad) {
            unpack_parameters(model, backup);  // keep the last good state
            result.diverged = true;
            break;
        }
        EpochMetrics row;
        row.epoch = e;
        row.learning_rate = static_cast<double>(lr);
        row.train_loss = batches ? epoch_loss / static_cast<double>(batches) : 0.0;
        row.val_loss = val_tuples.empty()
                           ? 0.0
                           : static_cast<double>(batch_loss(model, val_images, val_tuples,
                                                            static_cast<Scalar>(cfg.tau)));
        result.epochs.push_back(row);
        if (on_epoch_end) on_epoch_end(model, adam, e, row);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Checkpointing: every parameter tensor, the optimizer moments, the epoch
// counter and the config hash.

template <typename Scalar>
RecordFile model_to_records(const Model<Scalar>& model, const AdamState<Scalar>* adam = nullptr) {
    RecordFile file;
    for (std::size_t b = 0; b < model.backbone.kernels.size(); ++b) {
        Matrix<Scalar> flat(static_cast<Index>(model.backbone.kernels[b].size()), 9);
        for (std::size_t k = 0; k < model.backbone.kernels[b].size(); ++k)
            for (Index y = 0; y < 3; ++y)
                for (Index x = 0; x < 3; ++x)
                    flat(static_cast<Index>(k), y * 3 + x) = model.backbone.kernels[b][k](y, x);
        file.add_matrix("backbone.kernels." + std::to_string(b), flat);
        file.add_vector("backbone.biases." + std::to_string(b), model.backbone.biases[b]);
    }
    file.add_scalar("backbone.blocks", static_cast<double>(model.backbone.config.blocks));
    file.add_scalar("backbone.channels", static_cast<double>(model.backbone.config.channels));
    file.add_scalar("backbone.stride", static_cast<double>(model.backbone.config.stride));
    file.add_matrix("detector.weights", model.detector.weights);
    file.add_vector("detector.biases", model.detector.biases);
    file.add_scalar("detector.theta", static_cast<double>(model.detector.theta));
    file.add_scalar("detector.steps", static_cast<double>(model.detector.steps()));
    file.add_matrix("reduction.projection", model.reduction.projection);
    file.add_vector("reduction.bias", model.reduction.bias);
    if (adam) {
        file.add_vector("adam.m", adam->m);
        file.add_vector("adam.v", adam->v);
        file.add_scalar("adam.t", static_cast<double>(adam->t));
    }
    return file;
}

template <typename Scalar>
void model_from_records(Model<Scalar>& model, const RecordFile& file,
                        AdamState<Scalar>* adam = nullptr) {
    require(static_cast<Index>(file.scalar("backbone.blocks")) == model.backbone.config.blocks &&
                static_cast<Index>(file.scalar("backbone.channels")) == model.backbone.config.channels &&
                static_cast<Index>(file.scalar("detector.steps")) == model.detector.steps(),
            "checkpoint: model shape does not match configuration");
    for (std::size_t b = 0; b < model.backbone.kernels.size(); ++b) {
        const Matrix<Scalar> flat =
            file.matrix<Scalar>("backbone.kernels." + std::to_string(b));
        require(flat.rows() == static_cast<Index>(model.backbone.kernels[b].size()),
                "checkpoint: kernel tensor shape mismatch");
        for (std::size_t k = 0; k < model.backbone.kernels[b].size(); ++k)
            for (Index y = 0; y < 3; ++y)
                for (Index x = 0; x < 3; ++x)
                    model.backbone.kernels[b][k](y, x) = flat(static_cast<Index>(k), y * 3 + x);
        model.backbone.biases[b] = file.vector<Scalar>("backbone.biases." + std::to_string(b));
    }
    model.detector.weights = file.matrix<Scalar>("detector.weights");
    model.detector.biases = file.vector<Scalar>("detector.biases");
    model.detector.theta = static_cast<Scalar>(file.scalar("detector.theta"));
    model.reduction.projection = file.matrix<Scalar>("reduction.projection");
    model.reduction.bias = file.vector<Scalar>("reduction.bias");
    if (adam && file.has("adam.m")) {
        adam->m = file.vector<Scalar>("adam.m");
        adam->v = file.vector<Scalar>("adam.v");
        adam->t = static_cast<Index>(file.scalar("adam.t"));
    }
}

}  // namespace asda

#endif
