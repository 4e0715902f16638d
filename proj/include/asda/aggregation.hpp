#ifndef ASDA_AGGREGATION_HPP
#define ASDA_AGGREGATION_HPP

#include "asda/core.hpp"
#include "asda/detector.hpp"
#include "asda/feature_map.hpp"
#include "asda/regions.hpp"

#include <string>
#include <vector>

namespace asda {

enum class Pooling { Mac, Avg, Gem };

inline std::string pooling_name(Pooling p) {
    switch (p) {
        case Pooling::Mac: return "mac";
        case Pooling::Avg: return "avg";
        case Pooling::Gem: return "gem";
    }
    return "?";
}

inline Pooling parse_pooling(const std::string& s) {
    if (s == "mac" || s == "MAC") return Pooling::Mac;
    if (s == "avg" || s == "AVG") return Pooling::Avg;
    if (s == "gem" || s == "GEM" || s == "GeM") return Pooling::Gem;
    throw std::invalid_argument("unknown pooling strategy: " + s + " (expected mac|avg|gem)");
}

/// Soft proposals weight the pooled crop by the semantic map; hard proposals
/// use uniform all-ones weights over the same rectangles.
enum class ProposalMode { Soft, Hard };

/// Per-channel pooling of an already weighted (cells x C) crop. For MAC the
/// winning cell per channel can be captured for the backward pass.
template <typename Scalar>
Vector<Scalar> pool_weighted(const Matrix<Scalar>& weighted, Pooling kind, Scalar gem_p,
                             std::vector<Index>* argmax = nullptr,
                             ForwardSignature* sig = nullptr) {
    require(weighted.rows() >= 1, "pool: empty crop");
    const Index C = weighted.cols();
    Vector<Scalar> out(C);
    switch (kind) {
        case Pooling::Mac: {
            if (argmax) argmax->assign(static_cast<std::size_t>(C), 0);
            for (Index c = 0; c < C; ++c) {
                Index idx = 0;
                out(c) = weighted.col(c).maxCoeff(&idx);
                if (argmax) (*argmax)[static_cast<std::size_t>(c)] = idx;
                if (sig) {
                    sig->note_choice(static_cast<std::uint64_t>(idx));
                    if (weighted.rows() >= 2) {
                        Scalar second = -std::numeric_limits<Scalar>::infinity();
                        for (Index r = 0; r < weighted.rows(); ++r)
                            if (r != idx) second = std::max(second, weighted(r, c));
                        sig->note_margin(static_cast<double>(out(c) - second));
                    }
                }
            }
            break;
        }
        case Pooling::Avg:
            out = weighted.colwise().mean().transpose();
            break;
        case Pooling::Gem: {
            require(gem_p >= Scalar(1), "GeM exponent must be >= 1");
            // inputs are non-negative by construction (non-negative activations
            // times [0,1] proposals)
            out = weighted.array()
                      .pow(gem_p)
                      .colwise()
                      .mean()
                      .pow(Scalar(1) / gem_p)
                      .matrix()
                      .transpose();
            break;
        }
    }
    return out;
}

/// Regional representation of one (proposal, crop) pair: pool the crop
/// weighted cell-wise by the proposal.
template <typename Scalar>
Vector<Scalar> pool_region(const Vector<Scalar>& proposal, const Matrix<Scalar>& crop,
                           Pooling kind, Scalar gem_p = Scalar(3)) {
    require(proposal.size() == crop.rows(),
            "pool_region: proposal and crop spatial sizes differ");
    const Matrix<Scalar> weighted = crop.array().colwise() * proposal.array();
    return pool_weighted(weighted, kind, gem_p);
}

/// Sum of the regional representations for one semantic map, l2-normalized.
/// An all-zero sum stays the zero vector.
template <typename Scalar>
Vector<Scalar> aggregate_regional(const std::vector<Vector<Scalar>>& reps) {
    require(!reps.empty(), "aggregate_regional: no regional representations");
    Vector<Scalar> sum = Vector<Scalar>::Zero(reps.front().size());
    for (const auto& r : reps) {
        require(r.size() == sum.size(), "aggregate_regional: mixed channel counts");
        sum += r;
    }
    return l2_normalize(sum);
}

/// Trainable fully connected reduction from the concatenated K*C vector down
/// to D dimensions.
template <typename Scalar>
struct ReductionParams {
    Matrix<Scalar> projection;  // D x (K*C)
    Vector<Scalar> bias;        // D

    Index input_dim() const { return projection.cols(); }
    Index output_dim() const { return projection.rows(); }
};

/// Seeded random projection with orthonormal rows and zero bias.
template <typename Scalar>
ReductionParams<Scalar> init_reduction_params(Index input_dim, Index output_dim,
                                              std::uint64_t seed) {
    require(output_dim >= 1 && output_dim <= input_dim,
            "reduction: output dim must lie in [1, input dim]");
    Rng rng(mix_seed(seed, 0x4ed0c7ULL));
    Matrix<Scalar> g(input_dim, output_dim);
    for (Index i = 0; i < input_dim; ++i)
        for (Index j = 0; j < output_dim; ++j) g(i, j) = static_cast<Scalar>(rng.normal());
    Eigen::HouseholderQR<Matrix<Scalar>> qr(g);
    Matrix<Scalar> q = qr.householderQ() * Matrix<Scalar>::Identity(input_dim, output_dim);
    ReductionParams<Scalar> params;
    params.projection = q.transpose();
    params.bias = Vector<Scalar>::Zero(output_dim);
    return params;
}

/// rep = l2(RD(g)): concatenate the per-step vectors, apply the reduction,
/// renormalize.
template <typename Scalar>
Descriptor<Scalar> concat_and_reduce(const std::vector<Vector<Scalar>>& per_step,
                                     const ReductionParams<Scalar>& params) {
    require(!per_step.empty(), "concat_and_reduce: no per-step vectors");
    const Index C = per_step.front().size();
    for (const auto& g : per_step)
        require(g.size() == C, "concat_and_reduce: mixed channel counts");
    const Index total = C * static_cast<Index>(per_step.size());
    require(params.input_dim() == total,
            "concat_and_reduce: reduction expects input dim " +
                std::to_string(params.input_dim()) + " but got " + std::to_string(total));
    Vector<Scalar> g(total);
    for (std::size_t k = 0; k < per_step.size(); ++k)
        g.segment(static_cast<Index>(k) * C, C) = per_step[k];
    return l2_normalize<Scalar>(params.projection * g + params.bias);
}

/// Reference pipeline: per (region, step), crop the semantic map and the
/// feature map separately, weight inside the region, pool, aggregate, reduce.
template <typename Scalar>
Descriptor<Scalar> describe(const FeatureMap<Scalar>& f, const DetectorStack<Scalar>& stack,
                            const RegionSet& regions, Pooling kind, Scalar gem_p,
                            const ReductionParams<Scalar>& params,
                            ProposalMode mode = ProposalMode::Soft) {
    const SemanticMaps<Scalar> sm = compute_semantic_maps(f, stack);
    std::vector<Vector<Scalar>> per_step;
    per_step.reserve(static_cast<std::size_t>(sm.steps()));
    for (Index k = 0; k < sm.steps(); ++k) {
        std::vector<Vector<Scalar>> reps;
        reps.reserve(regions.regions.size());
        const Vector<Scalar> map_k = sm.maps.col(k);
        for (const auto& r : regions.regions) {
            const SoftRegionProposal<Scalar> srp =
                crop_soft_region_proposal(map_k, f.height, f.width, r, k);
            const Matrix<Scalar> crop = crop_rows(f.values, f.height, f.width, r);
            const Vector<Scalar> proposal =
                mode == ProposalMode::Soft ? srp.values
                                           : Vector<Scalar>::Ones(srp.values.size()).eval();
            reps.push_back(pool_region(proposal, crop, kind, gem_p));
        }
        per_step.push_back(aggregate_regional(reps));
    }
    return concat_and_reduce(per_step, params);
}

/// Efficient pipeline: weight the whole feature map by each semantic map
/// once, then crop the weighted map per region. Equal to describe() because
/// the proposal values are exactly the semantic map restricted to the region.
template <typename Scalar>
Descriptor<Scalar> describe_efficient(const FeatureMap<Scalar>& f,
                                      const DetectorStack<Scalar>& stack,
                                      const RegionSet& regions, Pooling kind, Scalar gem_p,
                                      const ReductionParams<Scalar>& params,
                                      ProposalMode mode = ProposalMode::Soft) {
    const SemanticMaps<Scalar> sm = compute_semantic_maps(f, stack);
    std::vector<Vector<Scalar>> per_step;
    per_step.reserve(static_cast<std::size_t>(sm.steps()));
    for (Index k = 0; k < sm.steps(); ++k) {
        Matrix<Scalar> weighted;
        if (mode == ProposalMode::Soft)
            weighted = f.values.array().colwise() * sm.maps.col(k).array();
        else
            weighted = f.values;
        std::vector<Vector<Scalar>> reps;
        reps.reserve(regions.regions.size());
        for (const auto& r : regions.regions)
            reps.push_back(
                pool_weighted(crop_rows(weighted, f.height, f.width, r), kind, gem_p));
        per_step.push_back(aggregate_regional(reps));
    }
    return concat_and_reduce(per_step, params);
}

// ---------------------------------------------------------------------------
// Backward helpers (used by the model-level training path).

/// d(pool)/d(weighted): scatters d_out back onto the weighted crop.
template <typename Scalar>
void pool_backward(const Matrix<Scalar>& weighted, const Vector<Scalar>& out, Pooling kind,
                   Scalar gem_p, const Vector<Scalar>& d_out, const std::vector<Index>& argmax,
                   Matrix<Scalar>& d_weighted) {
    const Index n = weighted.rows(), C = weighted.cols();
    switch (kind) {
        case Pooling::Mac:
            for (Index c = 0; c < C; ++c)
                d_weighted(argmax[static_cast<std::size_t>(c)], c) += d_out(c);
            break;
        case Pooling::Avg:
            d_weighted.noalias() +=
                Vector<Scalar>::Constant(n, Scalar(1) / static_cast<Scalar>(n)) *
                d_out.transpose();
            break;
        case Pooling::Gem:
            for (Index c = 0; c < C; ++c) {
                if (out(c) <= Scalar(0)) continue;  // all-zero column, flat at 0
                for (Index r = 0; r < n; ++r) {
                    const Scalar w = weighted(r, c);
                    if (w <= Scalar(0)) continue;
                    d_weighted(r, c) += d_out(c) *
                                        std::pow(w / out(c), gem_p - Scalar(1)) /
                                        static_cast<Scalar>(n);
                }
            }
            break;
    }
}

}  // namespace asda

#endif
