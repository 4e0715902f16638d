#ifndef ASDA_POSTPROCESS_HPP
#define ASDA_POSTPROCESS_HPP

#include "asda/core.hpp"
#include "asda/image.hpp"
#include "asda/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace asda {

inline std::vector<double> default_scales() { return {1.0, 1.0 / std::sqrt(2.0), 0.5}; }

/// Multi-scale descriptor: resize the image by each ratio, describe each
/// independently, average and renormalize. Ratios that would undershoot the
/// backbone's minimum input are skipped with a warning; skipping all of them
/// is an error.
template <typename Scalar>
Descriptor<Scalar> multiscale_descriptor(const Model<Scalar>& model,
                                         const ImageTensor<Scalar>& image,
                                         const std::vector<double>& scales,
                                         std::vector<std::string>* warnings = nullptr) {
    require(!scales.empty(), "multiscale_descriptor: no scales given");
    const Index min_side = model.backbone.min_input_side();
    Vector<Scalar> acc;
    Index used = 0;
    for (double s : scales) {
        require(s > 0, "multiscale_descriptor: scale ratios must be positive");
        const Index th = static_cast<Index>(std::lround(static_cast<double>(image.height()) * s));
        const Index tw = static_cast<Index>(std::lround(static_cast<double>(image.width()) * s));
        if (th < min_side || tw < min_side) {
            if (warnings)
                warnings->push_back("scale " + std::to_string(s) + " gives " + std::to_string(th) +
                                    "x" + std::to_string(tw) + ", below the backbone minimum " +
                                    std::to_string(min_side) + "; skipped");
            continue;
        }
        const ImageTensor<Scalar> scaled =
            (th == image.height() && tw == image.width()) ? image
                                                          : resize_bilinear(image, th, tw);
        const Descriptor<Scalar> d = model_forward_image(model, scaled);
        if (used == 0)
            acc = d;
        else
            acc += d;
        ++used;
    }
    require(used > 0, "multiscale_descriptor: every scale was below the minimum input size");
    return l2_normalize<Scalar>((acc / static_cast<Scalar>(used)).eval());
}

/// Discriminative whitening learned from matched descriptor pairs: whiten the
/// intra-pair scatter, then rotate onto the principal directions of the
/// whitened total scatter, keeping the top output_dim of them.
template <typename Scalar>
struct WhiteningProjection {
    Vector<Scalar> mean;        // D
    Matrix<Scalar> projection;  // D' x D
    Index floored_eigenvalues = 0;

    Index input_dim() const { return projection.cols(); }
    Index output_dim() const { return projection.rows(); }
};

template <typename Scalar>
WhiteningProjection<Scalar> fit_whitening(
    const std::vector<std::pair<Descriptor<Scalar>, Descriptor<Scalar>>>& matched_pairs,
    const std::vector<Descriptor<Scalar>>& all_descriptors, Index output_dim) {
    require(!all_descriptors.empty(), "fit_whitening: no descriptors");
    const Index D = all_descriptors.front().size();
    require(output_dim >= 1 && output_dim <= D,
            "fit_whitening: output dim must lie in [1, descriptor dim]");
    require(static_cast<Index>(matched_pairs.size()) >= D,
            "fit_whitening: need at least D matched pairs");

    Vector<Scalar> mu = Vector<Scalar>::Zero(D);
    for (const auto& d : all_descriptors) {
        require(d.size() == D, "fit_whitening: mixed descriptor dims");
        mu += d;
    }
    mu /= static_cast<Scalar>(all_descriptors.size());

    Matrix<Scalar> cs = Matrix<Scalar>::Zero(D, D);
    for (const auto& [a, b] : matched_pairs) {
        require(a.size() == D && b.size() == D, "fit_whitening: mixed descriptor dims");
        const Vector<Scalar> diff = a - b;
        cs.noalias() += diff * diff.transpose();
    }
    cs /= static_cast<Scalar>(matched_pairs.size());

    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es(cs);
    require(es.info() == Eigen::Success, "fit_whitening: eigendecomposition failed");
    const Scalar floor =
        static_cast<Scalar>(1e-10) * cs.trace() / static_cast<Scalar>(D);
    Vector<Scalar> inv_sqrt(D);
    Index floored = 0;
    for (Index i = 0; i < D; ++i) {
        Scalar lambda = es.eigenvalues()(i);
        if (lambda < floor) {
            lambda = floor;
            ++floored;
        }
        inv_sqrt(i) = Scalar(1) / std::sqrt(lambda);
    }
    const Matrix<Scalar> w =
        es.eigenvectors() * inv_sqrt.asDiagonal() * es.eigenvectors().transpose();

    Matrix<Scalar> cd = Matrix<Scalar>::Zero(D, D);
    for (const auto& d : all_descriptors) {
        const Vector<Scalar> c = d - mu;
        cd.noalias() += c * c.transpose();
    }
    cd /= static_cast<Scalar>(all_descriptors.size());

    Matrix<Scalar> rotated = w * cd * w;
    rotated = ((rotated + rotated.transpose()) / Scalar(2)).eval();  // enforce symmetry
    Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> es2(rotated);
    require(es2.info() == Eigen::Success, "fit_whitening: eigendecomposition failed");

    // top output_dim eigenvectors: descending eigenvalue, ties broken by the
    // solver's original (ascending-index) order, sign fixed so the
    // largest-magnitude entry is positive
    std::vector<Index> order(static_cast<std::size_t>(D));
    for (Index i = 0; i < D; ++i) order[static_cast<std::size_t>(i)] = i;
    std::stable_sort(order.begin(), order.end(), [&es2](Index a, Index b) {
        return es2.eigenvalues()(a) > es2.eigenvalues()(b);
    });
    Matrix<Scalar> top(output_dim, D);
    for (Index r = 0; r < output_dim; ++r) {
        Vector<Scalar> e = es2.eigenvectors().col(order[static_cast<std::size_t>(r)]);
        Index imax = 0;
        e.cwiseAbs().maxCoeff(&imax);
        if (e(imax) < Scalar(0)) e = -e;
        top.row(r) = e.transpose();
    }

    WhiteningProjection<Scalar> proj;
    proj.mean = mu;
    proj.projection = top * w;
    proj.floored_eigenvalues = floored;
    return proj;
}

template <typename Scalar>
Descriptor<Scalar> apply_whitening(const Descriptor<Scalar>& d,
                                   const WhiteningProjection<Scalar>& proj) {
    require(d.size() == proj.input_dim(), "apply_whitening: descriptor dim mismatch");
    return l2_normalize<Scalar>((proj.projection * (d - proj.mean)).eval());
}

}  // namespace asda

#endif
