#ifndef ASDA_BACKBONE_HPP
#define ASDA_BACKBONE_HPP

#include "asda/core.hpp"
#include "asda/feature_map.hpp"
#include "asda/image.hpp"

#include <string>
#include <vector>

namespace asda {

/// Records the discrete decisions taken during a forward pass (ReLU signs,
/// erasing-mask bits, pooling argmaxes, hinge activity). Two evaluations with
/// equal signatures lie on the same smooth piece of the loss, which is what
/// a central-difference gradient check needs.
struct ForwardSignature {
    Fnv1a hash;
    double min_margin = std::numeric_limits<double>::infinity();
    std::uint64_t bit_buffer = 0;
    int bit_count = 0;

    void note_bit(bool b) {
        bit_buffer = (bit_buffer << 1) | (b ? 1u : 0u);
        if (++bit_count == 64) flush_bits();
    }
    void note_choice(std::uint64_t v) {
        flush_bits();
        hash.update_u64(v);
    }
    void note_margin(double m) { min_margin = std::min(min_margin, std::abs(m)); }
    void flush_bits() {
        if (bit_count > 0) {
            hash.update_u64(bit_buffer);
            bit_buffer = 0;
            bit_count = 0;
        }
    }
    std::uint64_t digest() {
        flush_bits();
        return hash.digest();
    }
};

struct BackboneConfig {
    Index blocks = 3;    // conv -> ReLU -> avg-pool stages
    Index channels = 32; // output channels of every block
    Index stride = 2;    // pooling factor per block
};

/// Small convolutional feature extractor: `blocks` stages of
/// 3x3 conv (replicate padding) -> ReLU -> stride x stride average pooling.
/// Stands in for a large pretrained network; spatial output is
/// floor(input / stride^blocks).
template <typename Scalar>
struct Backbone {
    BackboneConfig config;
    bool trainable = true;
    // kernels[b][co * in_ch + ci] is the 3x3 tap matrix for that channel pair
    std::vector<std::vector<Matrix<Scalar>>> kernels;
    std::vector<Vector<Scalar>> biases;

    Index in_channels(Index block) const { return block == 0 ? 3 : config.channels; }
    Index total_stride() const {
        Index s = 1;
        for (Index b = 0; b < config.blocks; ++b) s *= config.stride;
        return s;
    }
    Index min_input_side() const { return std::max<Index>(kMinImageSide, total_stride()); }

    Index parameter_count() const {
        Index n = 0;
        for (Index b = 0; b < config.blocks; ++b)
            n += config.channels * in_channels(b) * 9 + config.channels;
        return n;
    }
};

template <typename Scalar>
Backbone<Scalar> build_backbone(const BackboneConfig& config, std::uint64_t seed) {
    require(config.blocks >= 1, "backbone config: need at least one conv block");
    require(config.channels >= 4, "backbone config: channel count must be >= 4");
    require(config.stride >= 1, "backbone config: stride must be >= 1");
    Backbone<Scalar> bb;
    bb.config = config;
    Rng rng(mix_seed(seed, 0xbacb01eULL));
    bb.kernels.resize(config.blocks);
    bb.biases.resize(config.blocks);
    for (Index b = 0; b < config.blocks; ++b) {
        const Index cin = bb.in_channels(b);
        const Scalar scale = static_cast<Scalar>(std::sqrt(2.0 / (9.0 * static_cast<double>(cin))));
        bb.kernels[b].resize(static_cast<std::size_t>(config.channels * cin));
        for (Index co = 0; co < config.channels; ++co)
            for (Index ci = 0; ci < cin; ++ci) {
                Matrix<Scalar> k(3, 3);
                for (Index y = 0; y < 3; ++y)
                    for (Index x = 0; x < 3; ++x)
                        k(y, x) = static_cast<Scalar>(rng.normal()) * scale;
                bb.kernels[b][static_cast<std::size_t>(co * cin + ci)] = std::move(k);
            }
        bb.biases[b] = Vector<Scalar>::Zero(config.channels);
    }
    return bb;
}

template <typename Scalar>
struct BackboneCache {
    // per block: planes entering the conv, and the conv pre-activations
    std::vector<std::vector<Matrix<Scalar>>> inputs;
    std::vector<std::vector<Matrix<Scalar>>> preact;
    Index out_height = 0, out_width = 0;
};

template <typename Scalar>
struct BackboneGrads {
    std::vector<std::vector<Matrix<Scalar>>> kernels;
    std::vector<Vector<Scalar>> biases;

    static BackboneGrads zeros_like(const Backbone<Scalar>& bb) {
        BackboneGrads g;
        g.kernels.resize(bb.kernels.size());
        g.biases.resize(bb.biases.size());
        for (std::size_t b = 0; b < bb.kernels.size(); ++b) {
            g.kernels[b].assign(bb.kernels[b].size(), Matrix<Scalar>::Zero(3, 3));
            g.biases[b] = Vector<Scalar>::Zero(bb.biases[b].size());
        }
        return g;
    }
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> replicate_pad(const Matrix<Scalar>& in) {
    const Index h = in.rows(), w = in.cols();
    Matrix<Scalar> p(h + 2, w + 2);
    p.block(1, 1, h, w) = in;
    p.block(0, 1, 1, w) = in.row(0);
    p.block(h + 1, 1, 1, w) = in.row(h - 1);
    p.block(1, 0, h, 1) = in.col(0);
    p.block(1, w + 1, h, 1) = in.col(w - 1);
    p(0, 0) = in(0, 0);
    p(0, w + 1) = in(0, w - 1);
    p(h + 1, 0) = in(h - 1, 0);
    p(h + 1, w + 1) = in(h - 1, w - 1);
    return p;
}

/// Folds gradient on a padded buffer back onto the clamped source pixels.
template <typename Scalar>
Matrix<Scalar> fold_pad_gradient(const Matrix<Scalar>& dp) {
    const Index h = dp.rows() - 2, w = dp.cols() - 2;
    Matrix<Scalar> d = dp.block(1, 1, h, w);
    d.row(0) += dp.block(0, 1, 1, w);
    d.row(h - 1) += dp.block(h + 1, 1, 1, w);
    d.col(0) += dp.block(1, 0, h, 1);
    d.col(w - 1) += dp.block(1, w + 1, h, 1);
    d(0, 0) += dp(0, 0);
    d(0, w - 1) += dp(0, w + 1);
    d(h - 1, 0) += dp(h + 1, 0);
    d(h - 1, w - 1) += dp(h + 1, w + 1);
    return d;
}

template <typename Scalar>
Matrix<Scalar> avg_pool(const Matrix<Scalar>& in, Index s) {
    if (s == 1) return in;
    const Index oh = in.rows() / s, ow = in.cols() / s;
    Matrix<Scalar> out = Matrix<Scalar>::Zero(oh, ow);
    for (Index dy = 0; dy < s; ++dy)
        for (Index dx = 0; dx < s; ++dx)
            for (Index y = 0; y < oh; ++y)
                for (Index x = 0; x < ow; ++x) out(y, x) += in(y * s + dy, x * s + dx);
    return out / static_cast<Scalar>(s * s);
}

template <typename Scalar>
Matrix<Scalar> avg_unpool(const Matrix<Scalar>& dout, Index s, Index in_h, Index in_w) {
    if (s == 1) return dout;
    Matrix<Scalar> din = Matrix<Scalar>::Zero(in_h, in_w);
    const Scalar inv = Scalar(1) / static_cast<Scalar>(s * s);
    for (Index y = 0; y < dout.rows(); ++y)
        for (Index x = 0; x < dout.cols(); ++x)
            din.block(y * s, x * s, s, s).array() += dout(y, x) * inv;
    return din;
}

}  // namespace detail

/// Forward pass over image planes. If `cache` is given the intermediates
/// needed by backbone_backward are retained; `sig`, when non-null, absorbs
/// the ReLU activation pattern.
template <typename Scalar>
FeatureMap<Scalar> backbone_forward(const Backbone<Scalar>& bb,
                                    const ImageTensor<Scalar>& image,
                                    BackboneCache<Scalar>* cache = nullptr,
                                    ForwardSignature* sig = nullptr) {
    validate_image(image);
    require(image.height() >= bb.min_input_side() && image.width() >= bb.min_input_side(),
            "image " + std::to_string(image.height()) + "x" + std::to_string(image.width()) +
                " is below the backbone minimum input size of " +
                std::to_string(bb.min_input_side()) + "x" + std::to_string(bb.min_input_side()));
    std::vector<Matrix<Scalar>> planes = image.planes;
    if (cache) {
        cache->inputs.clear();
        cache->preact.clear();
    }
    for (Index b = 0; b < bb.config.blocks; ++b) {
        const Index cin = bb.in_channels(b);
        const Index cout = bb.config.channels;
        require(static_cast<Index>(planes.size()) == cin, "backbone: channel bookkeeping error");
        if (cache) cache->inputs.push_back(planes);
        std::vector<Matrix<Scalar>> padded(planes.size());
        for (std::size_t c = 0; c < planes.size(); ++c)
            padded[c] = detail::replicate_pad(planes[c]);
        const Index h = planes[0].rows(), w = planes[0].cols();
        std::vector<Matrix<Scalar>> z(static_cast<std::size_t>(cout));
        for (Index co = 0; co < cout; ++co) {
            Matrix<Scalar> acc = Matrix<Scalar>::Constant(h, w, bb.biases[b](co));
            for (Index ci = 0; ci < cin; ++ci) {
                const Matrix<Scalar>& k = bb.kernels[b][static_cast<std::size_t>(co * cin + ci)];
                for (Index ky = 0; ky < 3; ++ky)
                    for (Index kx = 0; kx < 3; ++kx)
                        acc.noalias() += k(ky, kx) * padded[ci].block(ky, kx, h, w);
            }
            z[static_cast<std::size_t>(co)] = std::move(acc);
        }
        if (cache) cache->preact.push_back(z);
        planes.resize(static_cast<std::size_t>(cout));
        for (Index co = 0; co < cout; ++co) {
            const Matrix<Scalar>& zc = z[static_cast<std::size_t>(co)];
            if (sig) {
                for (Index y = 0; y < zc.rows(); ++y)
                    for (Index x = 0; x < zc.cols(); ++x) {
                        sig->note_bit(zc(y, x) > Scalar(0));
                        sig->note_margin(static_cast<double>(zc(y, x)));
                    }
            }
            planes[static_cast<std::size_t>(co)] =
                detail::avg_pool<Scalar>(zc.cwiseMax(Scalar(0)), bb.config.stride);
        }
    }
    FeatureMap<Scalar> f;
    f.height = planes[0].rows();
    f.width = planes[0].cols();
    f.values.resize(f.height * f.width, static_cast<Index>(planes.size()));
    for (std::size_t c = 0; c < planes.size(); ++c)
        for (Index y = 0; y < f.height; ++y)
            for (Index x = 0; x < f.width; ++x)
                f.values(f.pos(y, x), static_cast<Index>(c)) = planes[c](y, x);
    if (cache) {
        cache->out_height = f.height;
        cache->out_width = f.width;
    }
    check_finite_stage(all_finite(f.values), "backbone output");
    return f;
}

template <typename Scalar>
FeatureMap<Scalar> extract_feature_map(const Backbone<Scalar>& bb, const ImageTensor<Scalar>& image) {
    return backbone_forward(bb, image);
}

/// Accumulates parameter gradients (and nothing else) for dLoss/dFeatureMap
/// expressed over the flattened (H*W) x C layout.
template <typename Scalar>
void backbone_backward(const Backbone<Scalar>& bb, const BackboneCache<Scalar>& cache,
                       const Matrix<Scalar>& d_feature_values, BackboneGrads<Scalar>& grads) {
    const Index cout = bb.config.channels;
    std::vector<Matrix<Scalar>> dplanes(static_cast<std::size_t>(cout));
    for (Index c = 0; c < cout; ++c) {
        Matrix<Scalar> d(cache.out_height, cache.out_width);
        for (Index y = 0; y < cache.out_height; ++y)
            for (Index x = 0; x < cache.out_width; ++x)
                d(y, x) = d_feature_values(y * cache.out_width + x, c);
        dplanes[static_cast<std::size_t>(c)] = std::move(d);
    }
    for (Index b = bb.config.blocks - 1; b >= 0; --b) {
        const Index cin = bb.in_channels(b);
        const auto& z = cache.preact[static_cast<std::size_t>(b)];
        const auto& in = cache.inputs[static_cast<std::size_t>(b)];
        const Index h = z[0].rows(), w = z[0].cols();
        std::vector<Matrix<Scalar>> padded_in(in.size());
        for (std::size_t c = 0; c < in.size(); ++c) padded_in[c] = detail::replicate_pad(in[c]);
        std::vector<Matrix<Scalar>> dpad(static_cast<std::size_t>(cin));
        for (Index ci = 0; ci < cin; ++ci)
            dpad[static_cast<std::size_t>(ci)] = Matrix<Scalar>::Zero(h + 2, w + 2);
        for (Index co = 0; co < bb.config.channels; ++co) {
            const Matrix<Scalar>& zc = z[static_cast<std::size_t>(co)];
            Matrix<Scalar> dz =
                detail::avg_unpool(dplanes[static_cast<std::size_t>(co)], bb.config.stride, h, w);
            dz = (zc.array() > Scalar(0)).select(dz, Matrix<Scalar>::Zero(h, w));
            grads.biases[static_cast<std::size_t>(b)](co) += dz.sum();
            for (Index ci = 0; ci < cin; ++ci) {
                Matrix<Scalar>& dk =
                    grads.kernels[static_cast<std::size_t>(b)][static_cast<std::size_t>(co * cin + ci)];
                const Matrix<Scalar>& k =
                    bb.kernels[static_cast<std::size_t>(b)][static_cast<std::size_t>(co * cin + ci)];
                Matrix<Scalar>& dp = dpad[static_cast<std::size_t>(ci)];
                const Matrix<Scalar>& pin = padded_in[static_cast<std::size_t>(ci)];
                for (Index ky = 0; ky < 3; ++ky)
                    for (Index kx = 0; kx < 3; ++kx) {
                        dk(ky, kx) += (dz.array() * pin.block(ky, kx, h, w).array()).sum();
                        dp.block(ky, kx, h, w).noalias() += k(ky, kx) * dz;
                    }
            }
        }
        dplanes.resize(static_cast<std::size_t>(cin));
        for (Index ci = 0; ci < cin; ++ci)
            dplanes[static_cast<std::size_t>(ci)] =
                detail::fold_pad_gradient(dpad[static_cast<std::size_t>(ci)]);
    }
}

}  // namespace asda

#endif
