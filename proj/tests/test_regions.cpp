#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "asda/regions.hpp"

#include <set>

using namespace asda;

TEST_CASE("L=0 yields the single full-frame region") {
    const auto set = generate_candidate_regions(8, 8, 0);
    REQUIRE(set.regions.size() == 1);
    CHECK(set.regions[0].x0 == 0);
    CHECK(set.regions[0].y0 == 0);
    CHECK(set.regions[0].width == 8);
    CHECK(set.regions[0].height == 8);

    // the full rectangle, not a clipped square, also on non-square grids
    const auto rect = generate_candidate_regions(6, 9, 0);
    REQUIRE(rect.regions.size() == 1);
    CHECK(rect.regions[0].width == 9);
    CHECK(rect.regions[0].height == 6);
}

TEST_CASE("8x16 at one scale places two flush windows") {
    const auto set = generate_candidate_regions(8, 16, 1);
    REQUIRE(set.regions.size() == 2);
    CHECK(set.regions[0].x0 == 0);
    CHECK(set.regions[0].y0 == 0);
    CHECK(set.regions[0].width == 8);
    CHECK(set.regions[1].x0 == 8);
    CHECK(set.regions[1].y0 == 0);
    // no overlap between the two neighbors
    CHECK(set.overlap_warnings.empty());
}

TEST_CASE("requested long-axis counts are 2..6 for scales 1..5") {
    const auto set = generate_candidate_regions(32, 32, 5);
    REQUIRE(set.layouts.size() == 5);
    for (Index l = 1; l <= 5; ++l) CHECK(set.layouts[static_cast<std::size_t>(l - 1)].long_count == l + 1);
}

TEST_CASE("32x64 realizes distinct long-axis placements of 2..6 windows") {
    const auto set = generate_candidate_regions(32, 64, 5);
    for (const auto& layout : set.layouts)
        CHECK(static_cast<Index>(layout.xs.size()) == layout.scale + 1);
    CHECK(set.overlap_warnings.empty());
}

TEST_CASE("long-axis coverage: first window at 0, last flush with the end") {
    for (auto [h, w] : {std::pair<Index, Index>{8, 8}, {16, 24}, {7, 31}, {32, 64}}) {
        const auto set = generate_candidate_regions(h, w, 5);
        for (const auto& layout : set.layouts) {
            const auto& positions = w >= h ? layout.xs : layout.ys;
            const Index long_axis = std::max(h, w);
            CHECK(positions.front() == 0);
            CHECK(positions.back() == long_axis - layout.side);
        }
    }
}

TEST_CASE("square grids violate the overlap bound and the violation is reported") {
    const auto set = generate_candidate_regions(32, 32, 2);
    CHECK(!set.overlap_warnings.empty());  // scale 2 on a square grid overlaps > 0.4*side+1
}

TEST_CASE("region list is deterministic and duplicate-free") {
    for (auto [h, w, l] : {std::tuple<Index, Index, Index>{8, 8, 4}, {16, 9, 5}, {3, 3, 5}, {1, 7, 3}}) {
        const auto a = generate_candidate_regions(h, w, l);
        const auto b = generate_candidate_regions(h, w, l);
        REQUIRE(a.regions.size() == b.regions.size());
        std::set<std::array<Index, 4>> seen;
        for (std::size_t i = 0; i < a.regions.size(); ++i) {
            CHECK(a.regions[i] == b.regions[i]);
            CHECK(seen.insert({a.regions[i].x0, a.regions[i].y0, a.regions[i].width,
                               a.regions[i].height})
                      .second);
            CHECK(a.regions[i].x0 + a.regions[i].width <= w);
            CHECK(a.regions[i].y0 + a.regions[i].height <= h);
        }
    }
}

TEST_CASE("scale counts outside 0..5 are rejected") {
    CHECK_THROWS_AS(generate_candidate_regions(8, 8, 6), std::invalid_argument);
    CHECK_THROWS_AS(generate_candidate_regions(8, 8, -1), std::invalid_argument);
    CHECK_THROWS_AS(generate_candidate_regions(0, 8, 1), std::invalid_argument);
}

TEST_CASE("full-frame crop is the identity") {
    Vector<double> m(12);
    for (Index i = 0; i < 12; ++i) m(i) = 0.01 * static_cast<double>(i);
    const CandidateRegion full{0, 0, 4, 3, 0};
    const auto srp = crop_soft_region_proposal(m, 3, 4, full);
    CHECK(srp.values == m);
}

TEST_CASE("crop copies the exact sub-grid") {
    Vector<double> m(9);
    m << 0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8;  // 3x3 row-major
    const CandidateRegion r{0, 0, 2, 2, 1};
    const auto srp = crop_soft_region_proposal(m, 3, 3, r, 0);
    REQUIRE(srp.values.size() == 4);
    CHECK(srp.values(0) == 0.0);
    CHECK(srp.values(1) == 0.1);
    CHECK(srp.values(2) == 0.3);
    CHECK(srp.values(3) == 0.4);
    CHECK((srp.values.array() >= 0.0).all());
    CHECK((srp.values.array() <= 1.0).all());
}

TEST_CASE("crop composed with embed is the identity on sub-grids") {
    Rng rng(60);
    for (int trial = 0; trial < 10; ++trial) {
        const Index h = 3 + rng.uniform_int(0, 5), w = 3 + rng.uniform_int(0, 5);
        Vector<double> m(h * w);
        for (Index i = 0; i < m.size(); ++i) m(i) = rng.uniform();
        const Index side = 1 + rng.uniform_int(0, std::min(h, w) - 1);
        const CandidateRegion r{rng.uniform_int(0, w - side), rng.uniform_int(0, h - side), side,
                                side, 1};
        const auto srp = crop_soft_region_proposal(m, h, w, r);
        Vector<double> embedded = Vector<double>::Zero(h * w);
        Index q = 0;
        for (Index y = r.y0; y < r.y0 + side; ++y)
            for (Index x = r.x0; x < r.x0 + side; ++x) embedded(y * w + x) = srp.values(q++);
        const auto again = crop_soft_region_proposal(embedded, h, w, r);
        CHECK(again.values == srp.values);
    }
}

TEST_CASE("out-of-bounds regions are rejected") {
    Vector<double> m = Vector<double>::Zero(16);
    CHECK_THROWS_AS(crop_soft_region_proposal(m, 4, 4, CandidateRegion{2, 2, 3, 3, 1}),
                    std::invalid_argument);
    CHECK_THROWS_AS(crop_soft_region_proposal(m, 4, 4, CandidateRegion{0, 0, 0, 1, 1}),
                    std::invalid_argument);
}

TEST_CASE("degenerate thin grids clamp the side and dedupe") {
    const auto set = generate_candidate_regions(1, 10, 3);
    for (const auto& r : set.regions) {
        CHECK(r.height == 1);
        CHECK(r.y0 == 0);
    }
}

TEST_CASE("CSV export lists scale and geometry per row") {
    const auto set = generate_candidate_regions(8, 16, 1);
    const std::string csv = region_list_csv(set);
    CHECK(csv == "scale,x0,y0,width,height\n1,0,0,8,8\n1,8,0,8,8\n");
}
