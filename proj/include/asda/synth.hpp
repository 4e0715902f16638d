#ifndef ASDA_SYNTH_HPP
#define ASDA_SYNTH_HPP

#include "asda/core.hpp"
#include "asda/image.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace asda {

/// One rendered view of a synthetic instance.
template <typename Scalar>
struct SynthView {
    ImageTensor<Scalar> image;
    int instance = 0;
    int view = 0;
    double object_fraction = 0;  // measured from the rendered object mask
    std::string id;
};

template <typename Scalar>
struct SynthDataset {
    std::vector<SynthView<Scalar>> views;
    int n_instances = 0;
    int views_per_instance = 0;
    Index image_size = 0;
};

namespace detail {

/// Stable per-instance appearance: two body colors, a dot color, texture
/// frequency and orientations. Multi-part on purpose, so successive
/// adversarial steps have distinct content to claim.
struct SynthSignature {
    double c1[3], c2[3], c3[3];
    double tex_freq;
    double orient;
    double split_angle;
    double dot_angle;
};

inline SynthSignature make_signature(std::uint64_t seed, int instance) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(instance), 0x5160ULL));
    SynthSignature s{};
    auto saturated = [&rng](double* c) {
        const int hot = static_cast<int>(rng.uniform_int(0, 2));
        for (int i = 0; i < 3; ++i) c[i] = rng.uniform(0.05, 0.55);
        c[hot] = rng.uniform(0.7, 1.0);
    };
    saturated(s.c1);
    saturated(s.c2);
    saturated(s.c3);
    s.tex_freq = rng.uniform(2.5, 6.0);
    s.orient = rng.uniform(0.0, 2.0 * M_PI);
    s.split_angle = rng.uniform(0.0, 2.0 * M_PI);
    s.dot_angle = rng.uniform(0.0, 2.0 * M_PI);
    return s;
}

}  // namespace detail

/// Renders one view: cluttered background, a few distractor shapes, then the
/// instance object (a textured multi-part disk) at a random position and
/// scale. Pure function of (seed, instance, view).
template <typename Scalar>
SynthView<Scalar> generate_view(std::uint64_t seed, int instance, int view, Index image_size) {
    const detail::SynthSignature sig = detail::make_signature(seed, instance);
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(instance) * 1000003ULL +
                               static_cast<std::uint64_t>(view),
                     0x71e3ULL));
    const Index S = image_size;
    ImageTensor<Scalar> img = make_image<Scalar>(S, S);

    // background: muted base color plus a low-frequency wave and pixel noise
    double base[3], amp[3], kx[3], ky[3], phase[3];
    for (int c = 0; c < 3; ++c) {
        base[c] = rng.uniform(0.25, 0.55);
        amp[c] = rng.uniform(0.03, 0.10);
        kx[c] = rng.uniform(0.5, 2.0);
        ky[c] = rng.uniform(0.5, 2.0);
        phase[c] = rng.uniform(0.0, 2.0 * M_PI);
    }
    for (Index y = 0; y < S; ++y)
        for (Index x = 0; x < S; ++x)
            for (int c = 0; c < 3; ++c) {
                const double wave =
                    amp[c] * std::sin(2.0 * M_PI *
                                          (kx[c] * static_cast<double>(x) +
                                           ky[c] * static_cast<double>(y)) /
                                          static_cast<double>(S) +
                                      phase[c]);
                const double noise = rng.uniform(-0.02, 0.02);
                img.planes[c](y, x) =
                    static_cast<Scalar>(std::clamp(base[c] + wave + noise, 0.0, 1.0));
            }

    // small distractor shapes, drawn under the object
    const int n_distractors = static_cast<int>(rng.uniform_int(2, 4));
    for (int d = 0; d < n_distractors; ++d) {
        const bool disk = rng.uniform() < 0.5;
        const Index size = static_cast<Index>(rng.uniform_int(4, 10));
        const Index cx = static_cast<Index>(rng.uniform_int(0, S - 1));
        const Index cy = static_cast<Index>(rng.uniform_int(0, S - 1));
        double col[3];
        for (int c = 0; c < 3; ++c) col[c] = rng.uniform(0.1, 0.9);
        for (Index y = std::max<Index>(0, cy - size); y <= std::min(S - 1, cy + size); ++y)
            for (Index x = std::max<Index>(0, cx - size); x <= std::min(S - 1, cx + size); ++x) {
                const double dx = static_cast<double>(x - cx), dy = static_cast<double>(y - cy);
                const bool inside = disk ? (dx * dx + dy * dy <= static_cast<double>(size * size) / 4.0)
                                         : (std::abs(dx) <= size / 2 && std::abs(dy) <= size / 2);
                if (inside)
                    for (int c = 0; c < 3; ++c) img.planes[c](y, x) = static_cast<Scalar>(col[c]);
            }
    }

    // object: stratify every third view toward the small-object regime
    const double frac_target =
        (view % 3 == 0) ? rng.uniform(0.11, 0.24) : rng.uniform(0.11, 0.55);
    const double radius = static_cast<double>(S) * std::sqrt(frac_target / M_PI);
    const Index margin = static_cast<Index>(std::ceil(radius)) + 1;
    require(2 * margin < S, "image too small for the minimum object size");
    const Index cx = static_cast<Index>(rng.uniform_int(margin, S - 1 - margin));
    const Index cy = static_cast<Index>(rng.uniform_int(margin, S - 1 - margin));
    const double co = std::cos(sig.orient), so = std::sin(sig.orient);
    const double cs = std::cos(sig.split_angle), ss = std::sin(sig.split_angle);
    const double dot_x = 0.45 * radius * std::cos(sig.dot_angle);
    const double dot_y = 0.45 * radius * std::sin(sig.dot_angle);
    const double dot_r2 = 0.3 * radius * 0.3 * radius;
    Index mask_count = 0;
    for (Index y = std::max<Index>(0, cy - margin); y <= std::min(S - 1, cy + margin); ++y)
        for (Index x = std::max<Index>(0, cx - margin); x <= std::min(S - 1, cx + margin); ++x) {
            const double dx = static_cast<double>(x - cx), dy = static_cast<double>(y - cy);
            if (dx * dx + dy * dy > radius * radius) continue;
            ++mask_count;
            const double u = co * dx + so * dy;
            const double v = -so * dx + co * dy;
            const double* body = (u * cs + v * ss >= 0.0) ? sig.c1 : sig.c2;
            const double stripe =
                std::sin(2.0 * M_PI * sig.tex_freq * u / radius) > 0.0 ? 0.7 : 1.0;
            const bool in_dot = (dx - dot_x) * (dx - dot_x) + (dy - dot_y) * (dy - dot_y) <= dot_r2;
            for (int c = 0; c < 3; ++c) {
                const double val = in_dot ? sig.c3[c] : body[c] * stripe;
                img.planes[c](y, x) = static_cast<Scalar>(std::clamp(val, 0.0, 1.0));
            }
        }

    SynthView<Scalar> out;
    out.image = std::move(img);
    out.instance = instance;
    out.view = view;
    out.object_fraction =
        static_cast<double>(mask_count) / static_cast<double>(S * S);
    out.id = "i" + std::to_string(instance) + "_v" + std::to_string(view);
    return out;
}

template <typename Scalar>
SynthDataset<Scalar> generate_dataset(std::uint64_t seed, int n_instances, int views_per_instance,
                                      Index image_size) {
    require(n_instances >= 2, "generate_dataset: need at least 2 instances");
    require(views_per_instance >= 2, "generate_dataset: need at least 2 views per instance");
    require(image_size >= 32, "generate_dataset: image too small for the minimum object size");
    SynthDataset<Scalar> ds;
    ds.n_instances = n_instances;
    ds.views_per_instance = views_per_instance;
    ds.image_size = image_size;
    ds.views.reserve(static_cast<std::size_t>(n_instances) * static_cast<std::size_t>(views_per_instance));
    for (int i = 0; i < n_instances; ++i)
        for (int v = 0; v < views_per_instance; ++v)
            ds.views.push_back(generate_view<Scalar>(seed, i, v, image_size));
    return ds;
}

/// Instance-level split: no instance straddles train/validation/eval. The
/// eval side designates view 0 of each held-out instance as its query.
struct DatasetSplit {
    std::vector<int> train_instances;
    std::vector<int> val_instances;
    std::vector<int> eval_instances;
};

inline DatasetSplit split_instances(int n_instances, double holdout_fraction, std::uint64_t seed) {
    require(holdout_fraction > 0.0 && holdout_fraction < 1.0,
            "split: holdout fraction must lie in (0,1)");
    std::vector<int> order(static_cast<std::size_t>(n_instances));
    for (int i = 0; i < n_instances; ++i) order[static_cast<std::size_t>(i)] = i;
    Rng rng(mix_seed(seed, 0x5b117ULL));
    for (int i = n_instances - 1; i > 0; --i)
        std::swap(order[static_cast<std::size_t>(i)],
                  order[static_cast<std::size_t>(rng.uniform_int(0, i))]);
    const int eval_count = static_cast<int>(std::lround(holdout_fraction * n_instances));
    require(eval_count >= 2 && n_instances - eval_count >= 2,
            "split: fraction leaves fewer than 2 instances on one side");
    DatasetSplit s;
    s.eval_instances.assign(order.begin(), order.begin() + eval_count);
    const int remaining = n_instances - eval_count;
    int val_count = static_cast<int>(std::lround(holdout_fraction * remaining));
    if (remaining - val_count < 2) val_count = 0;  // keep the trainable side viable
    if (val_count < 2) val_count = 0;              // a 1-instance side cannot form tuples
    s.val_instances.assign(order.begin() + eval_count, order.begin() + eval_count + val_count);
    s.train_instances.assign(order.begin() + eval_count + val_count, order.end());
    std::sort(s.eval_instances.begin(), s.eval_instances.end());
    std::sort(s.val_instances.begin(), s.val_instances.end());
    std::sort(s.train_instances.begin(), s.train_instances.end());
    return s;
}

/// Gathers the views of the given instances, preserving dataset order.
template <typename Scalar>
void collect_views(const SynthDataset<Scalar>& ds, const std::vector<int>& instances,
                   std::vector<ImageTensor<Scalar>>& images, std::vector<int>& labels,
                   std::vector<std::string>* ids = nullptr) {
    std::set<int> want(instances.begin(), instances.end());
    for (const auto& v : ds.views)
        if (want.count(v.instance)) {
            images.push_back(v.image);
            labels.push_back(v.instance);
            if (ids) ids->push_back(v.id);
        }
}

inline std::string split_name_of(const DatasetSplit& split, int instance) {
    for (int i : split.train_instances)
        if (i == instance) return "train";
    for (int i : split.val_instances)
        if (i == instance) return "val";
    return "eval";
}

/// Manifest: one CSV row per view.
template <typename Scalar>
void write_manifest(const SynthDataset<Scalar>& ds, const DatasetSplit& split, std::ostream& out,
                    const std::vector<std::string>* paths = nullptr) {
    out << "id,path,instance,split,object_fraction\n";
    out.precision(6);
    for (std::size_t i = 0; i < ds.views.size(); ++i) {
        const auto& v = ds.views[i];
        out << v.id << "," << (paths ? (*paths)[i] : std::string()) << "," << v.instance << ","
            << split_name_of(split, v.instance) << "," << v.object_fraction << "\n";
    }
}

}  // namespace asda

#endif
