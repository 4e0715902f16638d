#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "asda/evaluation.hpp"

#include <sstream>

using namespace asda;

namespace {

Descriptor<double> basis(Index dim, Index axis) {
    Vector<double> v = Vector<double>::Zero(dim);
    v(axis) = 1.0;
    return v;
}

/// Independent oracle: build the full precision/recall step curve over the
/// cleaned ranking and integrate it.
double ap_step_curve(const std::vector<Index>& ranked, const std::set<Index>& positives,
                     const std::set<Index>& ignored) {
    std::vector<int> relevant;
    for (Index id : ranked) {
        if (ignored.count(id)) continue;
        relevant.push_back(positives.count(id) ? 1 : 0);
    }
    std::vector<double> precision(relevant.size()), recall(relevant.size());
    int hits = 0;
    for (std::size_t r = 0; r < relevant.size(); ++r) {
        hits += relevant[r];
        precision[r] = static_cast<double>(hits) / static_cast<double>(r + 1);
        recall[r] = static_cast<double>(hits) / static_cast<double>(positives.size());
    }
    double ap = 0, prev_recall = 0;
    for (std::size_t r = 0; r < relevant.size(); ++r) {
        ap += (recall[r] - prev_recall) * precision[r];
        prev_recall = recall[r];
    }
    return ap;
}

}  // namespace

TEST_CASE("an exact duplicate of the query ranks first with score 1") {
    const auto q = basis(4, 0);
    const std::vector<Descriptor<double>> db = {basis(4, 1), q, basis(4, 2)};
    const Ranking r = rank_database(q, db);
    CHECK(r.ids[0] == 1);
    CHECK(r.scores[0] == 1.0);
    CHECK(r.scores[1] == 0.0);  // orthogonal entries score zero
}

TEST_CASE("score ties break toward the lower id") {
    const auto q = basis(3, 0);
    const std::vector<Descriptor<double>> db = {basis(3, 1), basis(3, 2), basis(3, 1)};
    const Ranking r = rank_database(q, db);
    CHECK(r.ids == std::vector<Index>{0, 1, 2});
}

TEST_CASE("ranking input validation") {
    const auto q = basis(3, 0);
    CHECK_THROWS_AS(rank_database(q, {}), std::invalid_argument);
    Vector<double> not_unit = Vector<double>::Ones(3);
    CHECK_THROWS_AS(rank_database(q, {not_unit}), std::invalid_argument);
    CHECK_THROWS_AS(rank_database(q, {basis(4, 0)}), std::invalid_argument);
}

TEST_CASE("hand-evaluated AP with positives at cleaned ranks 1 and 3") {
    Ranking r;
    r.ids = {10, 11, 12, 13};
    CHECK(average_precision(r, {10, 12}) == doctest::Approx(5.0 / 6.0).epsilon(1e-15));
}

TEST_CASE("all positives on top give AP 1") {
    Ranking r;
    r.ids = {1, 2, 3, 4, 5};
    CHECK(average_precision(r, {1, 2}) == 1.0);
}

TEST_CASE("ignored entries close up the ranking") {
    Ranking r;
    r.ids = {9, 7, 8};            // 9 is ignored, 7 is positive
    CHECK(average_precision(r, {7}, {9}) == 1.0);
    CHECK(average_precision(r, {7}) == 0.5);  // without the ignore rule, rank 2
}

TEST_CASE("AP rejects degenerate inputs") {
    Ranking r;
    r.ids = {1, 2};
    CHECK_THROWS_AS(average_precision(r, {}), std::invalid_argument);
    CHECK_THROWS_AS(average_precision(r, {1}, {1}), std::invalid_argument);
    CHECK_THROWS_AS(average_precision(r, {5}), std::invalid_argument);  // positive missing
}

TEST_CASE("AP equals the step-curve oracle on random instances") {
    Rng rng(80);
    for (int trial = 0; trial < 500; ++trial) {
        const Index n = 3 + rng.uniform_int(0, 40);
        Ranking r;
        for (Index i = 0; i < n; ++i) r.ids.push_back(i);
        for (Index i = n - 1; i > 0; --i)
            std::swap(r.ids[static_cast<std::size_t>(i)],
                      r.ids[static_cast<std::size_t>(rng.uniform_int(0, i))]);
        std::set<Index> positives, ignored;
        for (Index i = 0; i < n; ++i) {
            const double u = rng.uniform();
            if (u < 0.3)
                positives.insert(i);
            else if (u < 0.45)
                ignored.insert(i);
        }
        if (positives.empty()) {
            positives.insert(r.ids[0]);
            ignored.erase(r.ids[0]);
        }
        const double got = average_precision(r, positives, ignored);
        const double want = ap_step_curve(r.ids, positives, ignored);
        CHECK(std::abs(got - want) < 1e-12);
    }
}

TEST_CASE("AP is invariant to where the ignored entries sit") {
    Ranking base;
    base.ids = {0, 1, 2, 3, 4, 5};
    const std::set<Index> positives = {1, 4};
    const std::set<Index> ignored = {0, 5};
    const double ap0 = average_precision(base, positives, ignored);
    Ranking moved;
    moved.ids = {1, 0, 2, 5, 3, 4};  // ignored entries moved around
    CHECK(average_precision(moved, positives, ignored) == ap0);
}

TEST_CASE("mAP is the arithmetic mean over queries") {
    CHECK(mean_average_precision({1.0}) == 1.0);
    CHECK(mean_average_precision({1.0, 0.5}) == 0.75);
    CHECK(mean_average_precision({0.5, 1.0}) == 0.75);
    CHECK_THROWS_AS(mean_average_precision({}), std::invalid_argument);
}

TEST_CASE("labeled groundtruth derives Medium and Hard setups") {
    const std::string text =
        "# three labeled entries\n"
        "query q1\n"
        "easy a\n"
        "hard b\n"
        "unclear c\n";
    {
        std::istringstream in(text);
        const auto gt = load_groundtruth(in, EvalSetup::Medium);
        REQUIRE(gt.size() == 1);
        CHECK(gt[0].positives == std::vector<std::string>{"a", "b"});
        CHECK(gt[0].ignored == std::vector<std::string>{"c"});
    }
    {
        std::istringstream in(text);
        const auto gt = load_groundtruth(in, EvalSetup::Hard);
        CHECK(gt[0].positives == std::vector<std::string>{"b"});
        CHECK(gt[0].ignored == std::vector<std::string>{"a", "c"});
    }
}

TEST_CASE("missing unclear labels leave the Medium ignore set empty") {
    std::istringstream in("query q\neasy a b\nhard c\n");
    const auto gt = load_groundtruth(in, EvalSetup::Medium);
    CHECK(gt[0].ignored.empty());
}

TEST_CASE("custom records require explicit lists") {
    std::istringstream in("query q\npositive a b\nignore c\n");
    const auto gt = load_groundtruth(in, EvalSetup::Custom);
    CHECK(gt[0].positives == std::vector<std::string>{"a", "b"});
    CHECK(gt[0].ignored == std::vector<std::string>{"c"});
    std::istringstream labeled("query q\neasy a\n");
    CHECK_THROWS_AS(load_groundtruth(labeled, EvalSetup::Custom), std::invalid_argument);
}

TEST_CASE("malformed groundtruth is rejected with line diagnostics") {
    std::istringstream no_query("positive a\n");
    CHECK_THROWS_WITH_AS(load_groundtruth(no_query, EvalSetup::Custom),
                         doctest::Contains("line 1"), std::invalid_argument);
    std::istringstream bad_directive("query q\nwhatever a\n");
    CHECK_THROWS_WITH_AS(load_groundtruth(bad_directive, EvalSetup::Custom),
                         doctest::Contains("line 2"), std::invalid_argument);
    std::istringstream overlap("query q\npositive a\nignore a\n");
    CHECK_THROWS_AS(load_groundtruth(overlap, EvalSetup::Custom), std::invalid_argument);
    std::istringstream self("query q\npositive q\n");
    CHECK_THROWS_AS(load_groundtruth(self, EvalSetup::Custom), std::invalid_argument);
}

TEST_CASE("setup names parse and print") {
    CHECK(parse_setup("M") == EvalSetup::Medium);
    CHECK(parse_setup("H") == EvalSetup::Hard);
    CHECK(parse_setup("custom") == EvalSetup::Custom);
    CHECK_THROWS_AS(parse_setup("E"), std::invalid_argument);
    CHECK(setup_name(EvalSetup::Medium) == "M");
}
