#ifndef ASDA_MODEL_HPP
#define ASDA_MODEL_HPP

#include "asda/aggregation.hpp"
#include "asda/backbone.hpp"
#include "asda/core.hpp"
#include "asda/detector.hpp"
#include "asda/feature_map.hpp"
#include "asda/image.hpp"
#include "asda/regions.hpp"

#include <stdexcept>
#include <string>
#include <vector>

namespace asda {

template <typename Scalar>
struct ModelSpec {
    BackboneConfig backbone;
    bool backbone_trainable = true;
    Index steps = 4;                 // K semantic maps
    Scalar theta = Scalar(0.7);      // adversarial threshold
    Index scale_count = 4;           // L sliding-window scales
    Pooling pooling = Pooling::Mac;
    Scalar gem_p = Scalar(3);
    Index descriptor_dim = 512;      // capped at K*C
    ProposalMode proposal_mode = ProposalMode::Soft;
};

/// End-to-end trainable pipeline: backbone -> adversarial detector ->
/// soft-region pooling -> per-step aggregation -> reduction.
template <typename Scalar>
struct Model {
    ModelSpec<Scalar> spec;
    Backbone<Scalar> backbone;
    DetectorStack<Scalar> detector;
    ReductionParams<Scalar> reduction;

    Index channels() const { return backbone.config.channels; }
    Index descriptor_dim() const { return reduction.output_dim(); }
};

template <typename Scalar>
Model<Scalar> build_model(const ModelSpec<Scalar>& spec, std::uint64_t seed) {
    require(spec.scale_count >= 0 && spec.scale_count <= 5, "model: L must lie in 0..5");
    Model<Scalar> m;
    m.spec = spec;
    m.backbone = build_backbone<Scalar>(spec.backbone, seed);
    m.backbone.trainable = spec.backbone_trainable;
    m.detector = init_detector_stack<Scalar>(spec.backbone.channels, spec.steps, spec.theta,
                                             mix_seed(seed, 1));
    const Index concat_dim = spec.steps * spec.backbone.channels;
    const Index d = std::min(spec.descriptor_dim, concat_dim);
    m.reduction = init_reduction_params<Scalar>(concat_dim, d, mix_seed(seed, 2));
    return m;
}


template <typename Scalar>
struct ModelCache {
    bool has_backbone = false;
    BackboneCache<Scalar> bb;
    FeatureMap<Scalar> fmap;
    SemanticMaps<Scalar> sm;
    RegionSet regions;
    std::vector<Matrix<Scalar>> weighted;                 // per step: (H*W) x C
    std::vector<std::vector<Vector<Scalar>>> reps;        // step x region
    std::vector<std::vector<std::vector<Index>>> argmax;  // step x region x channel (MAC)
    std::vector<Vector<Scalar>> sums;                     // per step, pre-normalization
    std::vector<Vector<Scalar>> per_step;                 // per step, normalized g_k
    Vector<Scalar> concat;
    Vector<Scalar> reduced;  // pre-normalization projection output
    Descriptor<Scalar> descriptor;
};

/// Forward pass from a feature map (the efficient weight-once path), with
/// optional cache and signature capture.
template <typename Scalar>
Descriptor<Scalar> model_forward_map(const Model<Scalar>& model, const FeatureMap<Scalar>& f,
                                     ModelCache<Scalar>* cache = nullptr,
                                     ForwardSignature* sig = nullptr) {
    ModelCache<Scalar> local;
    ModelCache<Scalar>& c = cache ? *cache : local;
    c.fmap = f;
    c.sm = compute_semantic_maps(f, model.detector, sig);
    c.regions = generate_candidate_regions(f.height, f.width, model.spec.scale_count);
    const Index K = c.sm.steps();
    const std::size_t R = c.regions.regions.size();
    c.weighted.resize(static_cast<std::size_t>(K));
    c.reps.assign(static_cast<std::size_t>(K), {});
    c.argmax.assign(static_cast<std::size_t>(K), {});
    c.sums.resize(static_cast<std::size_t>(K));
    c.per_step.resize(static_cast<std::size_t>(K));
    for (Index k = 0; k < K; ++k) {
        auto& wk = c.weighted[static_cast<std::size_t>(k)];
        if (model.spec.proposal_mode == ProposalMode::Soft)
            wk = f.values.array().colwise() * c.sm.maps.col(k).array();
        else
            wk = f.values;
        auto& reps_k = c.reps[static_cast<std::size_t>(k)];
        auto& arg_k = c.argmax[static_cast<std::size_t>(k)];
        reps_k.resize(R);
        arg_k.resize(R);
        Vector<Scalar> sum = Vector<Scalar>::Zero(f.channels());
        for (std::size_t i = 0; i < R; ++i) {
            const Matrix<Scalar> crop =
                crop_rows(wk, f.height, f.width, c.regions.regions[i]);
            reps_k[i] = pool_weighted(crop, model.spec.pooling, model.spec.gem_p, &arg_k[i], sig);
            check_finite_stage(all_finite(reps_k[i]), "regional pooling");
            sum += reps_k[i];
        }
        c.sums[static_cast<std::size_t>(k)] = sum;
        c.per_step[static_cast<std::size_t>(k)] = l2_normalize(sum);
    }
    const Index C = f.channels();
    c.concat.resize(K * C);
    for (Index k = 0; k < K; ++k)
        c.concat.segment(k * C, C) = c.per_step[static_cast<std::size_t>(k)];
    c.reduced = model.reduction.projection * c.concat + model.reduction.bias;
    check_finite_stage(all_finite(c.reduced), "reduction");
    c.descriptor = l2_normalize(c.reduced);
    return c.descriptor;
}

/// Forward pass from an image through the backbone.
template <typename Scalar>
Descriptor<Scalar> model_forward_image(const Model<Scalar>& model, const ImageTensor<Scalar>& image,
                                       ModelCache<Scalar>* cache = nullptr,
                                       ForwardSignature* sig = nullptr) {
    ModelCache<Scalar> local;
    ModelCache<Scalar>& c = cache ? *cache : local;
    c.has_backbone = true;
    const FeatureMap<Scalar> f = backbone_forward(model.backbone, image, cache ? &c.bb : nullptr, sig);
    return model_forward_map(model, f, &c == &local ? nullptr : &c, sig);
}

template <typename Scalar>
struct ModelGrads {
    BackboneGrads<Scalar> backbone;
    DetectorGrads<Scalar> detector;
    Matrix<Scalar> reduction_projection;
    Vector<Scalar> reduction_bias;

    static ModelGrads zeros_like(const Model<Scalar>& m) {
        ModelGrads g;
        g.backbone = BackboneGrads<Scalar>::zeros_like(m.backbone);
        g.detector = DetectorGrads<Scalar>::zeros_like(m.detector);
        g.reduction_projection =
            Matrix<Scalar>::Zero(m.reduction.projection.rows(), m.reduction.projection.cols());
        g.reduction_bias = Vector<Scalar>::Zero(m.reduction.bias.size());
        return g;
    }
};

/// Gradient of the logistic normalization y = v / |v| applied to dLoss/dy.
template <typename Scalar>
Vector<Scalar> normalize_backward(const Vector<Scalar>& pre_norm, const Vector<Scalar>& normalized,
                                  const Vector<Scalar>& dy) {
    const Scalar n = pre_norm.norm();
    if (n == Scalar(0)) return Vector<Scalar>::Zero(pre_norm.size());
    return (dy - normalized * normalized.dot(dy)) / n;
}

/// Reverse pass for one image, accumulating parameter gradients. The erasing
/// masks and pooling argmaxes recorded in the cache are treated as constants.
template <typename Scalar>
void model_backward(const Model<Scalar>& model, const ModelCache<Scalar>& cache,
                    const Vector<Scalar>& d_descriptor, ModelGrads<Scalar>& grads) {
    const FeatureMap<Scalar>& f = cache.fmap;
    const Index K = cache.sm.steps();
    const Index C = f.channels();
    const Vector<Scalar> du =
        normalize_backward(cache.reduced, cache.descriptor, d_descriptor);
    grads.reduction_projection.noalias() += du * cache.concat.transpose();
    grads.reduction_bias += du;
    const Vector<Scalar> dconcat = model.reduction.projection.transpose() * du;

    Matrix<Scalar> d_maps = Matrix<Scalar>::Zero(f.positions(), K);
    Matrix<Scalar> d_feature = Matrix<Scalar>::Zero(f.positions(), C);
    for (Index k = 0; k < K; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        const Vector<Scalar> dg = dconcat.segment(k * C, C);
        const Vector<Scalar> ds =
            normalize_backward(cache.sums[ku], cache.per_step[ku], dg);
        Matrix<Scalar> d_weighted = Matrix<Scalar>::Zero(f.positions(), C);
        for (std::size_t i = 0; i < cache.regions.regions.size(); ++i) {
            const CandidateRegion& r = cache.regions.regions[i];
            const Matrix<Scalar> crop = crop_rows(cache.weighted[ku], f.height, f.width, r);
            Matrix<Scalar> d_crop = Matrix<Scalar>::Zero(crop.rows(), crop.cols());
            pool_backward(crop, cache.reps[ku][i], model.spec.pooling, model.spec.gem_p, ds,
                          cache.argmax[ku][i], d_crop);
            const std::vector<Index> rows = region_rows(r, f.height, f.width);
            for (std::size_t q = 0; q < rows.size(); ++q)
                d_weighted.row(rows[q]) += d_crop.row(static_cast<Index>(q));
        }
        if (model.spec.proposal_mode == ProposalMode::Soft) {
            d_maps.col(k) +=
                (d_weighted.array() * f.values.array()).rowwise().sum().matrix();
            d_feature.array() += d_weighted.array().colwise() * cache.sm.maps.col(k).array();
        } else {
            d_feature += d_weighted;
        }
    }
    detector_backward(model.detector, f, cache.sm, d_maps, grads.detector, d_feature);
    if (cache.has_backbone && model.backbone.trainable)
        backbone_backward(model.backbone, cache.bb, d_feature, grads.backbone);
}

// ---------------------------------------------------------------------------
// Flat parameter views (optimizer and finite-difference checks).

template <typename Scalar>
Index model_param_count(const Model<Scalar>& m) {
    Index n = 0;
    if (m.backbone.trainable) n += m.backbone.parameter_count();
    n += m.detector.weights.size() + m.detector.biases.size();
    n += m.reduction.projection.size() + m.reduction.bias.size();
    return n;
}

namespace detail {

template <typename Scalar, typename FK, typename FB, typename FD, typename FDB, typename FR,
          typename FRB>
void visit_params(const Model<Scalar>& m, FK&& on_kernel, FB&& on_bias, FD&& on_det_w,
                  FDB&& on_det_b, FR&& on_red, FRB&& on_red_b) {
    if (m.backbone.trainable) {
        for (std::size_t b = 0; b < m.backbone.kernels.size(); ++b) {
            for (std::size_t k = 0; k < m.backbone.kernels[b].size(); ++k)
                for (Index y = 0; y < 3; ++y)
                    for (Index x = 0; x < 3; ++x) on_kernel(b, k, y, x);
            for (Index i = 0; i < m.backbone.biases[b].size(); ++i) on_bias(b, i);
        }
    }
    for (Index k = 0; k < m.detector.weights.rows(); ++k)
        for (Index c = 0; c < m.detector.weights.cols(); ++c) on_det_w(k, c);
    for (Index k = 0; k < m.detector.biases.size(); ++k) on_det_b(k);
    for (Index r = 0; r < m.reduction.projection.rows(); ++r)
        for (Index c = 0; c < m.reduction.projection.cols(); ++c) on_red(r, c);
    for (Index r = 0; r < m.reduction.bias.size(); ++r) on_red_b(r);
}

}  // namespace detail

template <typename Scalar>
Vector<Scalar> pack_parameters(const Model<Scalar>& m) {
    Vector<Scalar> flat(model_param_count(m));
    Index i = 0;
    detail::visit_params(
        m, [&](std::size_t b, std::size_t k, Index y, Index x) { flat(i++) = m.backbone.kernels[b][k](y, x); },
        [&](std::size_t b, Index j) { flat(i++) = m.backbone.biases[b](j); },
        [&](Index k, Index c) { flat(i++) = m.detector.weights(k, c); },
        [&](Index k) { flat(i++) = m.detector.biases(k); },
        [&](Index r, Index c) { flat(i++) = m.reduction.projection(r, c); },
        [&](Index r) { flat(i++) = m.reduction.bias(r); });
    return flat;
}

template <typename Scalar>
void unpack_parameters(Model<Scalar>& m, const Vector<Scalar>& flat) {
    require(flat.size() == model_param_count(m), "unpack_parameters: size mismatch");
    Index i = 0;
    detail::visit_params(
        m, [&](std::size_t b, std::size_t k, Index y, Index x) { m.backbone.kernels[b][k](y, x) = flat(i++); },
        [&](std::size_t b, Index j) { m.backbone.biases[b](j) = flat(i++); },
        [&](Index k, Index c) { m.detector.weights(k, c) = flat(i++); },
        [&](Index k) { m.detector.biases(k) = flat(i++); },
        [&](Index r, Index c) { m.reduction.projection(r, c) = flat(i++); },
        [&](Index r) { m.reduction.bias(r) = flat(i++); });
}

template <typename Scalar>
Vector<Scalar> pack_gradients(const Model<Scalar>& m, const ModelGrads<Scalar>& g) {
    Vector<Scalar> flat(model_param_count(m));
    Index i = 0;
    detail::visit_params(
        m, [&](std::size_t b, std::size_t k, Index y, Index x) { flat(i++) = g.backbone.kernels[b][k](y, x); },
        [&](std::size_t b, Index j) { flat(i++) = g.backbone.biases[b](j); },
        [&](Index k, Index c) { flat(i++) = g.detector.weights(k, c); },
        [&](Index k) { flat(i++) = g.detector.biases(k); },
        [&](Index r, Index c) { flat(i++) = g.reduction_projection(r, c); },
        [&](Index r) { flat(i++) = g.reduction_bias(r); });
    return flat;
}

}  // namespace asda

#endif
