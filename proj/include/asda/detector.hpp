#ifndef ASDA_DETECTOR_HPP
#define ASDA_DETECTOR_HPP

#include "asda/backbone.hpp"
#include "asda/core.hpp"
#include "asda/feature_map.hpp"

#include <string>
#include <vector>

namespace asda {

/// K per-step 1x1 detectors. Step k scores every position of its (partially
/// erased) input stream with a sigmoid over a channel dot product; positions
/// already claimed by an earlier map (value >= theta) are zeroed out of the
/// next step's stream.
template <typename Scalar>
struct DetectorStack {
    Matrix<Scalar> weights;  // K x C, row k is the step-k 1x1 kernel
    Vector<Scalar> biases;   // K
    Scalar theta = Scalar(0.7);

    Index steps() const { return weights.rows(); }
    Index channels() const { return weights.cols(); }
};

template <typename Scalar>
DetectorStack<Scalar> init_detector_stack(Index channels, Index steps, Scalar theta,
                                          std::uint64_t seed) {
    require(steps >= 1, "detector stack: K must be >= 1");
    require(theta > Scalar(0) && theta < Scalar(1), "detector stack: theta must lie in (0,1)");
    require(channels >= 1, "detector stack: channel count must be >= 1");
    DetectorStack<Scalar> stack;
    stack.theta = theta;
    stack.weights.resize(steps, channels);
    stack.biases = Vector<Scalar>::Zero(steps);
    Rng rng(mix_seed(seed, 0xde7ec7ULL));
    const Scalar scale = Scalar(1) / static_cast<Scalar>(std::sqrt(static_cast<double>(channels)));
    for (Index k = 0; k < steps; ++k)
        for (Index c = 0; c < channels; ++c)
            stack.weights(k, c) = static_cast<Scalar>(rng.normal()) * scale;
    return stack;
}

/// Binary residual mask: 1 exactly where the map value is strictly below
/// theta.
template <typename Scalar>
Vector<Scalar> residual_mask(const Vector<Scalar>& semantic_map, Scalar theta) {
    require((semantic_map.array() >= Scalar(0)).all() &&
                (semantic_map.array() <= Scalar(1)).all(),
            "residual_mask: semantic map values must lie in [0,1]");
    return (semantic_map.array() < theta).template cast<Scalar>();
}

/// Forward state of the detector stack over one feature map. `maps` holds the
/// K semantic maps column-wise; `cum_mask` column k is the product of the
/// residual masks applied to the step-k input stream (all ones for k = 0).
template <typename Scalar>
struct SemanticMaps {
    Index height = 0, width = 0;
    Matrix<Scalar> maps;      // (H*W) x K, values in (0,1)
    Matrix<Scalar> cum_mask;  // (H*W) x K, values in {0,1}

    Index steps() const { return maps.cols(); }
    /// The erased input stream f_k at step k (0-based), i.e. cum_mask_k (.) f.
    Matrix<Scalar> erased_stream(const FeatureMap<Scalar>& f, Index k) const {
        return f.values.array().colwise() * cum_mask.col(k).array();
    }
};

/// Runs the K detector steps (m_k = sigmoid(w_k . f_k + b_k), with
/// f_k = r_k (.) f_{k-1}). The threshold comparison is a detached constant:
/// no gradient flows through the mask.
template <typename Scalar>
SemanticMaps<Scalar> compute_semantic_maps(const FeatureMap<Scalar>& f,
                                           const DetectorStack<Scalar>& stack,
                                           ForwardSignature* sig = nullptr) {
    require(f.channels() == stack.channels(),
            "compute_semantic_maps: feature map has " + std::to_string(f.channels()) +
                " channels but the detector stack expects " + std::to_string(stack.channels()));
    const Index P = f.positions();
    const Index K = stack.steps();
    SemanticMaps<Scalar> out;
    out.height = f.height;
    out.width = f.width;
    out.maps.resize(P, K);
    out.cum_mask.resize(P, K);
    // The mask scales whole positions, so the dot products can be taken once
    // against the unmasked map and scaled per step.
    const Matrix<Scalar> raw = f.values * stack.weights.transpose();  // P x K
    Vector<Scalar> mask = Vector<Scalar>::Ones(P);
    for (Index k = 0; k < K; ++k) {
        out.cum_mask.col(k) = mask;
        for (Index p = 0; p < P; ++p) {
            const Scalar z = mask(p) * raw(p, k) + stack.biases(k);
            out.maps(p, k) = sigmoid(z);
        }
        if (k + 1 < K) {
            for (Index p = 0; p < P; ++p) {
                const bool survives = out.maps(p, k) < stack.theta;
                if (sig) {
                    sig->note_bit(survives);
                    sig->note_margin(static_cast<double>(out.maps(p, k) - stack.theta));
                }
                mask(p) *= survives ? Scalar(1) : Scalar(0);
            }
        }
    }
    check_finite_stage(all_finite(out.maps), "semantic maps");
    return out;
}

template <typename Scalar>
struct DetectorGrads {
    Matrix<Scalar> weights;  // K x C
    Vector<Scalar> biases;   // K

    static DetectorGrads zeros_like(const DetectorStack<Scalar>& stack) {
        DetectorGrads g;
        g.weights = Matrix<Scalar>::Zero(stack.steps(), stack.channels());
        g.biases = Vector<Scalar>::Zero(stack.steps());
        return g;
    }
};

/// Backward through the detector given dLoss/dMaps ((H*W) x K). Accumulates
/// parameter gradients and adds the feature-map contribution into
/// `d_feature_values`. Masks are constants, matching the forward pass.
template <typename Scalar>
void detector_backward(const DetectorStack<Scalar>& stack, const FeatureMap<Scalar>& f,
                       const SemanticMaps<Scalar>& sm, const Matrix<Scalar>& d_maps,
                       DetectorGrads<Scalar>& grads, Matrix<Scalar>& d_feature_values) {
    // dz = dm * m * (1 - m), then z_k(p) = cm_k(p) * (f(p,:) . w_k) + b_k
    const Matrix<Scalar> dz =
        d_maps.array() * sm.maps.array() * (Scalar(1) - sm.maps.array());
    const Matrix<Scalar> dz_masked = dz.array() * sm.cum_mask.array();  // P x K
    grads.weights.noalias() += dz_masked.transpose() * f.values;        // K x C
    grads.biases.noalias() += dz.colwise().sum().transpose();
    d_feature_values.noalias() += dz_masked * stack.weights;            // P x C
}

}  // namespace asda

#endif
