#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "asda/feature_map.hpp"
#include "asda/records.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

using namespace asda;
namespace fs = std::filesystem;

namespace {

const std::string cli = ASDA_CLI_PATH;
const std::string dir = "/tmp/asda_cli_test";

int run(const std::string& args) {
    const std::string cmd = cli + " " + args + " >> " + dir + "/log.txt 2>&1";
    return std::system(cmd.c_str());
}

const std::string tiny_flags =
    " --instances 4 --views 3 --image_size 32 --holdout_fraction 0.5"
    " --backbone_blocks 2 --backbone_channels 4 --steps 2 --scale_count 1"
    " --descriptor_dim 8 --batch_tuples 2 --n_negatives 1 --tuples_per_epoch 2 --seed 3";

}  // namespace

TEST_CASE("gen-data, train, describe, eval and regions all run end to end") {
    fs::remove_all(dir);
    fs::create_directories(dir);

    REQUIRE(run("gen-data --out " + dir + "/data" + tiny_flags) == 0);
    CHECK(fs::exists(dir + "/data/manifest.csv"));
    CHECK(fs::exists(dir + "/data/i0_v0.ppm"));

    REQUIRE(run("train --out " + dir + "/run --epochs 0" + tiny_flags) == 0);
    const std::string ckpt = dir + "/run/checkpoint.asdackpt";
    CHECK(fs::exists(ckpt));

    REQUIRE(run("describe --checkpoint " + ckpt + " --input " + dir + "/data/i0_v0.ppm" +
                " --output " + dir + "/d.asdadsc --epochs 0" + tiny_flags) == 0);
    const auto d = read_descriptor<double>(dir + "/d.asdadsc");
    CHECK(d.size() == 8);
    CHECK(std::abs(d.norm() - 1.0) < 1e-9);

    REQUIRE(run("describe --checkpoint " + ckpt + " --input " + dir + "/data/i0_v0.ppm" +
                " --output " + dir + "/d.csv --csv --epochs 0" + tiny_flags) == 0);
    CHECK(fs::exists(dir + "/d.csv"));

    // precomputed-feature-map path
    FeatureMap<double> f;
    f.height = f.width = 8;
    f.values = Matrix<double>::Constant(64, 4, 0.25);
    write_feature_map(f, dir + "/f.asdafm");
    REQUIRE(run("describe --checkpoint " + ckpt + " --input " + dir + "/f.asdafm --output " +
                dir + "/df.asdadsc --epochs 0" + tiny_flags) == 0);
    CHECK(read_descriptor<double>(dir + "/df.asdadsc").size() == 8);

    REQUIRE(run("eval --checkpoint " + ckpt + " --out " + dir + "/eval --epochs 0" + tiny_flags) ==
            0);
    CHECK(fs::exists(dir + "/eval/summary.json"));

    REQUIRE(run("regions --height 8 --width 16 --scales 1 --out " + dir + "/regions.csv") == 0);
    std::ifstream rc(dir + "/regions.csv");
    std::string header;
    std::getline(rc, header);
    CHECK(header == "scale,x0,y0,width,height");
}

TEST_CASE("validation failures exit nonzero with a diagnostic") {
    fs::create_directories(dir);
    CHECK(run("train --out " + dir + "/bad --theta 1.5" + tiny_flags) != 0);
    CHECK(run("describe --checkpoint /nonexistent.ckpt --input x.ppm --output y" + tiny_flags) !=
          0);
}
