#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "asda/synth.hpp"

#include <map>
#include <set>
#include <sstream>

using namespace asda;

TEST_CASE("generation is a pure function of the seed") {
    const auto a = generate_dataset<double>(5, 3, 3, 64);
    const auto b = generate_dataset<double>(5, 3, 3, 64);
    REQUIRE(a.views.size() == b.views.size());
    for (std::size_t i = 0; i < a.views.size(); ++i) {
        for (int c = 0; c < 3; ++c) CHECK(a.views[i].image.planes[c] == b.views[i].image.planes[c]);
        CHECK(a.views[i].object_fraction == b.views[i].object_fraction);
    }
    const auto c = generate_dataset<double>(6, 3, 3, 64);
    CHECK(a.views[0].image.planes[0] != c.views[0].image.planes[0]);
}

TEST_CASE("20 instances x 10 views partition into 20 classes of 10") {
    const auto ds = generate_dataset<double>(1, 20, 10, 64);
    CHECK(ds.views.size() == 200);
    std::map<int, int> counts;
    for (const auto& v : ds.views) counts[v.instance]++;
    CHECK(counts.size() == 20);
    for (const auto& [inst, n] : counts) CHECK(n == 10);
}

TEST_CASE("object area fractions stay in [0.10, 0.60] with a small-object share") {
    const auto ds = generate_dataset<double>(2, 20, 10, 64);
    int small = 0;
    for (const auto& v : ds.views) {
        CHECK(v.object_fraction >= 0.10);
        CHECK(v.object_fraction <= 0.60);
        if (v.object_fraction <= 0.25) ++small;
    }
    CHECK(small >= static_cast<int>(ds.views.size() * 3) / 10);
}

TEST_CASE("views within an instance share appearance statistics across views") {
    // two views of the same instance should be closer in mean color than
    // views of different instances, on average
    const auto ds = generate_dataset<double>(3, 6, 4, 64);
    auto mean_color = [](const ImageTensor<double>& img) {
        Vector<double> m(3);
        for (int c = 0; c < 3; ++c) m(c) = img.planes[c].mean();
        return m;
    };
    double same = 0, cross = 0;
    int same_n = 0, cross_n = 0;
    for (std::size_t i = 0; i < ds.views.size(); ++i)
        for (std::size_t j = i + 1; j < ds.views.size(); ++j) {
            const double dist =
                (mean_color(ds.views[i].image) - mean_color(ds.views[j].image)).norm();
            if (ds.views[i].instance == ds.views[j].instance) {
                same += dist;
                ++same_n;
            } else {
                cross += dist;
                ++cross_n;
            }
        }
    CHECK(same / same_n < cross / cross_n);
}

TEST_CASE("undersized images are rejected") {
    CHECK_THROWS_AS(generate_dataset<double>(1, 2, 2, 16), std::invalid_argument);
    CHECK_THROWS_AS(generate_dataset<double>(1, 1, 2, 64), std::invalid_argument);
    CHECK_THROWS_AS(generate_dataset<double>(1, 2, 1, 64), std::invalid_argument);
}

TEST_CASE("instance split holds out the requested fraction") {
    const auto split = split_instances(20, 0.2, 7);
    CHECK(split.eval_instances.size() == 4);
    CHECK(split.val_instances.size() == 3);
    CHECK(split.train_instances.size() == 13);
    // no instance straddles the splits
    std::set<int> seen;
    for (int i : split.eval_instances) CHECK(seen.insert(i).second);
    for (int i : split.val_instances) CHECK(seen.insert(i).second);
    for (int i : split.train_instances) CHECK(seen.insert(i).second);
    CHECK(seen.size() == 20);
    const auto again = split_instances(20, 0.2, 7);
    CHECK(again.eval_instances == split.eval_instances);
    CHECK(again.train_instances == split.train_instances);
    const auto other = split_instances(20, 0.2, 8);
    CHECK(other.eval_instances != split.eval_instances);
}

TEST_CASE("splits leaving fewer than two instances on a side are rejected") {
    CHECK_THROWS_AS(split_instances(4, 0.1, 0), std::invalid_argument);   // 0 held out
    CHECK_THROWS_AS(split_instances(4, 0.9, 0), std::invalid_argument);   // 0 left
    CHECK_THROWS_AS(split_instances(3, 0.5, 0), std::invalid_argument);
}

TEST_CASE("collect_views gathers exactly the requested instances") {
    const auto ds = generate_dataset<double>(4, 5, 3, 64);
    std::vector<ImageTensor<double>> images;
    std::vector<int> labels;
    std::vector<std::string> ids;
    collect_views(ds, {1, 3}, images, labels, &ids);
    CHECK(images.size() == 6);
    for (int l : labels) CHECK((l == 1 || l == 3));
    CHECK(ids[0] == "i1_v0");
}

TEST_CASE("manifest lists every view with split and measured fraction") {
    const auto ds = generate_dataset<double>(5, 5, 2, 64);
    const auto split = split_instances(5, 0.4, 5);
    std::ostringstream out;
    write_manifest(ds, split, out);
    const std::string text = out.str();
    CHECK(text.rfind("id,path,instance,split,object_fraction\n", 0) == 0);
    int lines = 0;
    for (char ch : text)
        if (ch == '\n') ++lines;
    CHECK(lines == 11);  // header + 10 views
    CHECK(text.find("i0_v0") != std::string::npos);
}
