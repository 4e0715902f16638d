#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "asda/postprocess.hpp"
#include "asda/synth.hpp"

using namespace asda;

namespace {

Model<double> small_model(std::uint64_t seed) {
    ModelSpec<double> spec;
    spec.backbone = {3, 8, 2};
    spec.steps = 2;
    spec.scale_count = 2;
    spec.descriptor_dim = 16;
    return build_model(spec, seed);
}

}  // namespace

TEST_CASE("default scales are 1, 1/sqrt(2), 1/2") {
    const auto s = default_scales();
    REQUIRE(s.size() == 3);
    CHECK(s[0] == 1.0);
    CHECK(s[1] == doctest::Approx(0.70710678118654752).epsilon(1e-15));
    CHECK(s[2] == 0.5);
}

TEST_CASE("repeated unit scales reproduce the single-scale descriptor") {
    const auto model = small_model(1);
    const auto view = generate_view<double>(2, 0, 0, 64);
    const auto ss = model_forward_image(model, view.image);
    const auto ms = multiscale_descriptor(model, view.image, {1.0, 1.0, 1.0});
    CHECK((ms - ss).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("constant images give scale-invariant descriptors") {
    const auto model = small_model(3);
    const auto img = make_image<double>(64, 64, 0.37);
    const auto d1 = model_forward_image(model, img);
    for (double s : {1.0 / std::sqrt(2.0), 0.5}) {
        const Index side = static_cast<Index>(std::lround(64 * s));
        const auto d = model_forward_image(model, resize_bilinear(img, side, side));
        CHECK((d - d1).cwiseAbs().maxCoeff() < 1e-12);
    }
    const auto ms = multiscale_descriptor(model, img, default_scales());
    CHECK((ms - d1).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("multi-scale output is unit norm") {
    const auto model = small_model(4);
    const auto view = generate_view<double>(5, 1, 1, 64);
    const auto ms = multiscale_descriptor(model, view.image, default_scales());
    CHECK(std::abs(ms.norm() - 1.0) < 1e-9);
}

TEST_CASE("undersized scales are skipped with a warning; all-skipped errors") {
    const auto model = small_model(6);
    const auto view = generate_view<double>(7, 0, 0, 64);
    std::vector<std::string> warnings;
    const auto ms = multiscale_descriptor(model, view.image, {1.0, 0.1}, &warnings);
    CHECK(warnings.size() == 1);
    CHECK(std::abs(ms.norm() - 1.0) < 1e-9);
    CHECK_THROWS_AS(multiscale_descriptor(model, view.image, {0.1}), std::invalid_argument);
}

TEST_CASE("whitening of axis-aligned isotropic pairs gives scaled orthonormal rows") {
    const Index d = 8;
    const double sigma = 0.35;
    std::vector<std::pair<Descriptor<double>, Descriptor<double>>> pairs;
    for (Index i = 0; i < d; ++i) {
        Vector<double> diff = Vector<double>::Zero(d);
        diff(i) = sigma;
        pairs.emplace_back(diff, Vector<double>::Zero(d));  // C_S = sigma^2/d * I exactly
    }
    std::vector<Descriptor<double>> all;
    Rng rng(70);
    for (int i = 0; i < 40; ++i) {
        Vector<double> v(d);
        for (Index j = 0; j < d; ++j) v(j) = rng.normal();
        all.push_back(v);
    }
    const auto proj = fit_whitening(pairs, all, d);
    const Matrix<double> ppt = proj.projection * proj.projection.transpose();
    const double scale = ppt(0, 0);
    CHECK(scale == doctest::Approx(static_cast<double>(d) / (sigma * sigma)).epsilon(1e-6));
    CHECK((ppt - scale * Matrix<double>::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-6 * scale);
    CHECK(proj.floored_eigenvalues == 0);
}

TEST_CASE("projected matched pairs have identity difference covariance") {
    const Index d = 16;
    Rng rng(71);
    Matrix<double> distort(d, d);
    for (Index i = 0; i < d; ++i)
        for (Index j = 0; j < d; ++j) distort(i, j) = rng.normal() * (i == j ? 1.0 : 0.3);
    std::vector<std::pair<Descriptor<double>, Descriptor<double>>> pairs;
    std::vector<Descriptor<double>> all;
    for (int i = 0; i < 300; ++i) {
        Vector<double> center(d), noise(d);
        for (Index j = 0; j < d; ++j) {
            center(j) = rng.normal();
            noise(j) = rng.normal() * 0.2;
        }
        Vector<double> a = center + distort * noise;
        Vector<double> b = center - distort * noise;
        pairs.emplace_back(a, b);
        all.push_back(a);
        all.push_back(b);
    }
    const auto proj = fit_whitening(pairs, all, d);
    Matrix<double> cov = Matrix<double>::Zero(d, d);
    for (const auto& [a, b] : pairs) {
        const Vector<double> pd = proj.projection * (a - b);
        cov.noalias() += pd * pd.transpose();
    }
    cov /= static_cast<double>(pairs.size());
    CHECK((cov - Matrix<double>::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("identity scatters give the identity projection") {
    const Index d = 6;
    std::vector<std::pair<Descriptor<double>, Descriptor<double>>> pairs;
    for (Index i = 0; i < d; ++i) {
        Vector<double> diff = Vector<double>::Zero(d);
        diff(i) = std::sqrt(static_cast<double>(d));
        pairs.emplace_back(diff, Vector<double>::Zero(d));  // C_S = I exactly
    }
    std::vector<Descriptor<double>> all;
    for (Index i = 0; i < d; ++i) {
        Vector<double> v = Vector<double>::Zero(d);
        v(i) = std::sqrt(static_cast<double>(d));
        all.push_back(v);
        all.push_back(-v);  // C_D = I exactly, mean zero
    }
    const auto proj = fit_whitening(pairs, all, d);
    CHECK((proj.mean.cwiseAbs().maxCoeff()) < 1e-12);
    CHECK((proj.projection - Matrix<double>::Identity(d, d)).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("whitening is deterministic") {
    Rng rng(72);
    const Index d = 5;
    std::vector<std::pair<Descriptor<double>, Descriptor<double>>> pairs;
    std::vector<Descriptor<double>> all;
    for (int i = 0; i < 30; ++i) {
        Vector<double> a(d), b(d);
        for (Index j = 0; j < d; ++j) {
            a(j) = rng.normal();
            b(j) = a(j) + 0.1 * rng.normal();
        }
        pairs.emplace_back(a, b);
        all.push_back(a);
        all.push_back(b);
    }
    const auto p1 = fit_whitening(pairs, all, 3);
    const auto p2 = fit_whitening(pairs, all, 3);
    CHECK(p1.projection == p2.projection);
    CHECK(p1.mean == p2.mean);
}

TEST_CASE("degenerate pair scatter reports floored eigenvalues") {
    const Index d = 4;
    std::vector<std::pair<Descriptor<double>, Descriptor<double>>> pairs;
    for (Index i = 0; i < d; ++i) {
        Vector<double> diff = Vector<double>::Zero(d);
        diff(0) = 1.0;  // rank-1 scatter
        pairs.emplace_back(diff, Vector<double>::Zero(d));
    }
    std::vector<Descriptor<double>> all(8, Vector<double>::Ones(d));
    const auto proj = fit_whitening(pairs, all, d);
    CHECK(proj.floored_eigenvalues == d - 1);
}

TEST_CASE("whitening input validation") {
    std::vector<std::pair<Descriptor<double>, Descriptor<double>>> pairs;
    std::vector<Descriptor<double>> all = {Vector<double>::Ones(4)};
    CHECK_THROWS_AS(fit_whitening(pairs, all, 2), std::invalid_argument);  // too few pairs
    for (int i = 0; i < 4; ++i)
        pairs.emplace_back(Vector<double>::Ones(4), Vector<double>::Zero(4));
    CHECK_THROWS_AS(fit_whitening(pairs, all, 5), std::invalid_argument);  // D' > D
}

TEST_CASE("identity application leaves unit descriptors unchanged") {
    WhiteningProjection<double> proj;
    proj.mean = Vector<double>::Zero(4);
    proj.projection = Matrix<double>::Identity(4, 4);
    Vector<double> d(4);
    d << 0.5, 0.5, 0.5, 0.5;
    const auto out = apply_whitening(d, proj);
    CHECK((out - d).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(std::abs(out.norm() - 1.0) < 1e-12);
    CHECK_THROWS_AS(apply_whitening(Vector<double>::Ones(3).eval(), proj), std::invalid_argument);
}

TEST_CASE("whitening can change retrieval order (3-point case)") {
    // brute-force construction: an anisotropic pair scatter stretches one
    // axis, flipping which database point sits closer to the query
    const Index d = 2;
    std::vector<std::pair<Descriptor<double>, Descriptor<double>>> pairs;
    for (int i = 0; i < 3; ++i) {
        Vector<double> diff(2);
        diff << 1.0, 0.0;  // matched pairs vary along x only
        pairs.emplace_back(diff, Vector<double>::Zero(2));
    }
    Vector<double> small_y(2);
    small_y << 0.0, 0.05;
    pairs.emplace_back(small_y, Vector<double>::Zero(2));
    std::vector<Descriptor<double>> all;
    Rng rng(73);
    for (int i = 0; i < 20; ++i) {
        Vector<double> v(2);
        v << rng.normal(), rng.normal();
        all.push_back(v);
        all.push_back((-v).eval());  // symmetric set, zero mean
    }
    const auto proj = fit_whitening(pairs, all, d);
    Vector<double> qv(2), a(2), b(2);
    qv << 1.0, 0.1;    // mostly x, slightly +y
    a << 1.0, -0.08;   // agrees along x, opposite small y
    b << 0.2, 0.1;     // weak x, agreeing y
    const Vector<double> q = l2_normalize(qv);
    const Vector<double> qa = l2_normalize(a), qb = l2_normalize(b);
    const double pre_a = q.dot(qa), pre_b = q.dot(qb);
    const double post_a = apply_whitening(q, proj).dot(apply_whitening(qa, proj));
    const double post_b = apply_whitening(q, proj).dot(apply_whitening(qb, proj));
    CHECK(pre_a > pre_b);       // x-agreement wins before whitening
    CHECK(post_b > post_a);     // x is down-weighted as intra-pair variation after
}
