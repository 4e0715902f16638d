#ifndef ASDA_REGIONS_HPP
#define ASDA_REGIONS_HPP

#include "asda/core.hpp"
#include "asda/feature_map.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace asda {

/// Axis-aligned window on the feature-map grid, in cell units. Sliding-window
/// regions are square; the full-frame region used at L = 0 covers the whole
/// (possibly non-square) grid.
struct CandidateRegion {
    Index x0 = 0;
    Index y0 = 0;
    Index width = 0;
    Index height = 0;
    Index scale = 0;  // 0 = full frame, 1..L = sliding-window scale

    bool operator==(const CandidateRegion& o) const {
        return x0 == o.x0 && y0 == o.y0 && width == o.width && height == o.height;
    }
};

struct ScaleLayout {
    Index scale = 0;
    Index side = 0;
    Index long_count = 0;   // requested window count along the long axis
    Index short_count = 0;  // window count along the short axis after capping
    std::vector<Index> xs;  // distinct x0 values, ascending
    std::vector<Index> ys;  // distinct y0 values, ascending
};

struct RegionSet {
    std::vector<CandidateRegion> regions;
    std::vector<ScaleLayout> layouts;
    std::vector<std::string> overlap_warnings;
};

namespace detail {

inline std::vector<Index> spaced_positions(Index extent, Index side, Index count) {
    std::vector<Index> pos;
    if (extent <= side || count <= 1) {
        pos.push_back(0);
        return pos;
    }
    for (Index j = 0; j < count; ++j) {
        const double t = static_cast<double>(j) * static_cast<double>(extent - side) /
                         static_cast<double>(count - 1);
        const Index p = static_cast<Index>(std::lround(t));
        if (pos.empty() || pos.back() != p) pos.push_back(p);
    }
    return pos;
}

inline void check_overlaps(const ScaleLayout& l, std::vector<std::string>& warnings) {
    const double bound = 0.4 * static_cast<double>(l.side) + 1.0;
    auto check_axis = [&](const std::vector<Index>& pos, const char* axis) {
        for (std::size_t i = 1; i < pos.size(); ++i) {
            const double overlap = static_cast<double>(l.side - (pos[i] - pos[i - 1]));
            if (overlap > bound) {
                std::ostringstream os;
                os << "scale " << l.scale << ": adjacent windows along " << axis << " overlap by "
                   << overlap << " cells (bound " << bound << ")";
                warnings.push_back(os.str());
            }
        }
    };
    check_axis(l.xs, "x");
    check_axis(l.ys, "y");
}

}  // namespace detail

/// Multi-scale sliding windows. Scale l in 1..L places l+1 square windows of
/// side floor(2*min(H,W)/(l+1)) along the long axis, first at 0 and last
/// flush with the axis end; the short-axis count is proportional to its
/// length, capped so that neighbors stay within the 0.4*side+1 overlap bound.
/// L = 0 yields the single full-frame region. Output order is scale-major,
/// then row-major; duplicates are dropped. Overlap-bound violations (which
/// square grids produce at small scales) are reported in the result, never
/// silently accepted.
inline RegionSet generate_candidate_regions(Index height, Index width, Index scale_count) {
    require(height >= 1 && width >= 1, "generate_candidate_regions: grid must be non-empty");
    require(scale_count >= 0, "generate_candidate_regions: L must be non-negative");
    require(scale_count <= 5, "generate_candidate_regions: L > 5 is not defined");
    RegionSet out;
    if (scale_count == 0) {
        out.regions.push_back({0, 0, width, height, 0});
        return out;
    }
    const Index short_axis = std::min(height, width);
    const Index long_axis = std::max(height, width);
    const bool long_is_x = width >= height;
    std::set<std::array<Index, 4>> seen;
    for (Index l = 1; l <= scale_count; ++l) {
        ScaleLayout layout;
        layout.scale = l;
        layout.side = std::max<Index>(1, (2 * short_axis) / (l + 1));
        layout.side = std::min(layout.side, short_axis);
        layout.long_count = l + 1;
        std::vector<Index> long_pos =
            detail::spaced_positions(long_axis, layout.side, layout.long_count);
        Index m = 1;
        if (short_axis > layout.side) {
            // long_axis > side holds here because long_axis >= short_axis
            const double prop = static_cast<double>(short_axis - layout.side) /
                                static_cast<double>(long_axis - layout.side) *
                                static_cast<double>(layout.long_count - 1);
            m = static_cast<Index>(std::lround(prop)) + 1;
            const Index cap = 1 + static_cast<Index>(std::floor(
                                      static_cast<double>(short_axis - layout.side) /
                                      (0.6 * static_cast<double>(layout.side))));
            m = std::clamp<Index>(m, 1, std::max<Index>(1, cap));
        }
        layout.short_count = m;
        std::vector<Index> short_pos = detail::spaced_positions(short_axis, layout.side, m);
        layout.xs = long_is_x ? long_pos : short_pos;
        layout.ys = long_is_x ? short_pos : long_pos;
        detail::check_overlaps(layout, out.overlap_warnings);
        for (Index y : layout.ys)
            for (Index x : layout.xs) {
                CandidateRegion r{x, y, layout.side, layout.side, l};
                if (seen.insert({r.x0, r.y0, r.width, r.height}).second) out.regions.push_back(r);
            }
        out.layouts.push_back(std::move(layout));
    }
    return out;
}

inline void validate_region(const CandidateRegion& r, Index height, Index width,
                            const std::string& context = "region") {
    require(r.x0 >= 0 && r.y0 >= 0 && r.width >= 1 && r.height >= 1 &&
                r.x0 + r.width <= width && r.y0 + r.height <= height,
            context + ": region out of bounds");
}

/// Row indices of a region's cells in the flattened (H*W) layout, row-major
/// within the region.
inline std::vector<Index> region_rows(const CandidateRegion& r, Index height, Index width) {
    validate_region(r, height, width);
    std::vector<Index> rows;
    rows.reserve(static_cast<std::size_t>(r.width * r.height));
    for (Index y = r.y0; y < r.y0 + r.height; ++y)
        for (Index x = r.x0; x < r.x0 + r.width; ++x) rows.push_back(y * width + x);
    return rows;
}

/// Crop of one semantic map under a candidate region: an exact sub-grid copy,
/// no interpolation.
template <typename Scalar>
struct SoftRegionProposal {
    CandidateRegion region;
    Index step = 0;             // source semantic-map index k (0-based)
    Vector<Scalar> values;      // region.height * region.width, row-major
};

template <typename Scalar>
SoftRegionProposal<Scalar> crop_soft_region_proposal(const Vector<Scalar>& semantic_map,
                                                     Index height, Index width,
                                                     const CandidateRegion& r, Index step = 0) {
    require(semantic_map.size() == height * width,
            "crop_soft_region_proposal: map size does not match dims");
    validate_region(r, height, width, "crop_soft_region_proposal");
    SoftRegionProposal<Scalar> srp;
    srp.region = r;
    srp.step = step;
    srp.values.resize(r.width * r.height);
    Index i = 0;
    for (Index y = r.y0; y < r.y0 + r.height; ++y)
        for (Index x = r.x0; x < r.x0 + r.width; ++x) srp.values(i++) = semantic_map(y * width + x);
    return srp;
}

/// Gathers the region's rows of a (H*W) x C matrix into a dense
/// (region cells) x C block, row-major within the region.
template <typename Scalar>
Matrix<Scalar> crop_rows(const Matrix<Scalar>& values, Index height, Index width,
                         const CandidateRegion& r) {
    require(values.rows() == height * width, "crop_rows: value rows do not match dims");
    const std::vector<Index> rows = region_rows(r, height, width);
    Matrix<Scalar> out(static_cast<Index>(rows.size()), values.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Index>(i)) = values.row(rows[i]);
    return out;
}

/// Debug export, one row per region.
inline std::string region_list_csv(const RegionSet& set) {
    std::ostringstream os;
    os << "scale,x0,y0,width,height\n";
    for (const auto& r : set.regions)
        os << r.scale << "," << r.x0 << "," << r.y0 << "," << r.width << "," << r.height << "\n";
    return os.str();
}

}  // namespace asda

#endif
