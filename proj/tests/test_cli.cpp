#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "agglo/dataset.hpp"
#include "agglo/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
  int code;
  std::string out, err;
};

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("agglo_cli_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Result run(const std::string& args) {
  static int n = 0;
  const auto dir = fs::temp_directory_path();
  const auto out = dir / ("agglo_cli_stdout_" + std::to_string(++n));
  const auto err = dir / ("agglo_cli_stderr_" + std::to_string(n));
  const std::string cmd = std::string(AGGLOSYNTH_BIN) + " " + args + " >" + out.string() + " 2>" + err.string();
  const int status = std::system(cmd.c_str());
  Result r{WIFEXITED(status) ? WEXITSTATUS(status) : -1, agglo::read_file(out), agglo::read_file(err)};
  fs::remove(out);
  fs::remove(err);
  return r;
}

std::string config(const std::string& name) { return std::string(AGGLO_CONFIG_DIR) + "/" + name; }

}  // namespace

TEST(Cli, SynthIsByteIdenticalAcrossRunsAndThreads) {
  const auto dir = scratch("determinism");
  const std::string base = "synth --config " + config("small_test.json") + " --count 4 --seed 7 ";
  ASSERT_EQ(run(base + "--threads 1 -o " + (dir / "a").string()).code, 0);
  ASSERT_EQ(run(base + "--threads 1 -o " + (dir / "b").string()).code, 0);
  ASSERT_EQ(run(base + "--threads 8 -o " + (dir / "c").string()).code, 0);
  for (const char* other : {"b", "c"}) {
    EXPECT_EQ(agglo::read_file(dir / "a/train/annotations.json"), agglo::read_file(dir / other / "train/annotations.json"));
    for (int i = 0; i < 4; ++i) {
      const std::string f = "train/images/00000" + std::to_string(i) + ".png";
      EXPECT_EQ(agglo::read_file(dir / "a" / f), agglo::read_file(dir / other / f)) << f;
    }
  }
  EXPECT_TRUE(fs::exists(dir / "a/run.json"));
  EXPECT_TRUE(fs::exists(dir / "a/train/manifest.json"));
  fs::remove_all(dir);
}

TEST(Cli, SynthZeroCount) {
  const auto dir = scratch("zero");
  const auto r = run("synth --count 0 -o " + dir.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto doc = agglo::load_json(dir / "train/annotations.json");
  EXPECT_NO_THROW(agglo::validate_annotations(doc, false));
  EXPECT_TRUE(doc["images"].empty());
  fs::remove_all(dir);
}

TEST(Cli, EvaluateGroundTruthAgainstItself) {
  const auto dir = scratch("self");
  ASSERT_EQ(run("synth --config " + config("small_test.json") + " --count 2 --seed 3 -o " + dir.string()).code, 0);
  // Ground truth as detections: add scores.
  auto doc = agglo::load_json(dir / "train/annotations.json");
  for (auto& a : doc["annotations"]) a["score"] = 1.0;
  agglo::write_file_atomic(dir / "det.json", doc.dump());
  const auto r = run("evaluate --gt " + (dir / "train/annotations.json").string() + " --det " +
                     (dir / "det.json").string() + " -o " + (dir / "eval").string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rep = agglo::load_json(dir / "eval/report.json");
  EXPECT_EQ(rep["samples"][0]["ap"], 1.0);
  EXPECT_EQ(rep["mape_percent"]["d_g"], 0.0);
  EXPECT_EQ(rep["mape_percent"]["sigma_g"], 0.0);
  EXPECT_EQ(rep["mape_percent"]["N"], 0.0);
  const auto csv = agglo::read_file(dir / "eval/report.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "sample_id,mean_solidity,d_g,sigma_g,N,eps_dg,eps_sg,eps_N,ap,ap50,ap75");
  fs::remove_all(dir);
}

TEST(Cli, DetectThenEvaluateWithTiming) {
  const auto dir = scratch("hough");
  ASSERT_EQ(run("synth --config " + config("small_test.json") + " --count 2 --seed 5 --split test -o " + dir.string()).code, 0);
  const auto d = run("detect-hough --dataset " + (dir / "test").string() + " --r-min 6 --r-max 30 --repeat 2 -o " +
                     (dir / "det").string());
  ASSERT_EQ(d.code, 0) << d.err;
  const auto det = agglo::load_json(dir / "det/detections.json");
  EXPECT_NO_THROW(agglo::validate_annotations(det, true));
  EXPECT_EQ(det["timing"]["repetitions"], 2);
  const auto e = run("evaluate --gt " + (dir / "test/annotations.json").string() + " --det " +
                     (dir / "det/detections.json").string() + " --sample-id s1 -o " + (dir / "eval").string());
  ASSERT_EQ(e.code, 0) << e.err;
  const auto rep = agglo::load_json(dir / "eval/report.json");
  const auto& t = rep["timing"][0]["timing"];
  for (const char* key : {"images_per_second", "particles_per_second", "wall_seconds_mean", "wall_seconds_std"})
    EXPECT_TRUE(t[key].is_number()) << key;
  EXPECT_EQ(rep["samples"][0]["sample_id"], "s1");
  fs::remove_all(dir);
}

TEST(Cli, PsdOfThreeEqualFerets) {
  const auto dir = scratch("psd");
  std::vector<agglo::AnnotatedImage> imgs(1);
  imgs[0].file_name = "images/000000.png";
  imgs[0].size = {30, 10};
  for (int i = 0; i < 3; ++i) {
    agglo::ParticleRecord p;
    p.particle_id = i;
    p.mask = agglo::mask_from_pixels(imgs[0].size, {{i * 10, 0}});
    p.bbox = agglo::bounding_box(p.mask);
    p.max_feret = 10;
    imgs[0].particles.push_back(p);
  }
  agglo::write_file_atomic(dir / "ann.json", agglo::annotations_to_json(imgs).dump());
  const auto r = run("psd --annotations " + (dir / "ann.json").string() + " -o " + dir.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = agglo::load_json(dir / "psd.json");
  EXPECT_NEAR(j["d_g"].get<double>(), 10.0, 1e-12);
  EXPECT_NEAR(j["sigma_g"].get<double>(), 1.0, 1e-12);
  EXPECT_EQ(j["n_particles"], 3);
  const auto kl = run("kl --p " + (dir / "histogram.csv").string() + " --q " + (dir / "histogram.csv").string() +
                      " --format csv -o " + dir.string());
  ASSERT_EQ(kl.code, 0) << kl.err;
  EXPECT_EQ(kl.out, "kl\n0\n");
  fs::remove_all(dir);
}

TEST(Cli, LrFitWritesRangeFile) {
  const auto dir = scratch("lr");
  std::string csv = "alpha,loss\n";
  for (int i = 1; i <= 12; ++i) {
    const double a = 0.05 * i;
    csv += std::to_string(a) + "," + std::to_string(std::max(1 - 2 * a, 0.2)) + "\n";
  }
  agglo::write_file_atomic(dir / "curve.csv", csv);
  const auto r = run("lr-fit --curve " + (dir / "curve.csv").string() + " --alpha-min 0.05 -o " + dir.string());
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = agglo::load_json(dir / "lr_range.json");
  for (const char* key : {"m", "b", "c", "alpha_min", "alpha_max", "rms_residual"}) EXPECT_TRUE(j.contains(key)) << key;
  EXPECT_NEAR(j["alpha_max"].get<double>(), 0.4, 1e-6);
  fs::remove_all(dir);
}

TEST(Cli, RleEncodeDecode) {
  const auto dir = scratch("rle");
  agglo::Gray8 img(4, 3, 0);
  img(1, 1) = 255;
  img(3, 0) = 9;
  agglo::write_png(dir / "m.png", img);
  ASSERT_EQ(run("rle encode " + (dir / "m.png").string() + " -o " + dir.string()).code, 0);
  const auto j = agglo::load_json(dir / "mask.json");
  EXPECT_EQ(j["rle"], json::array({4, 1, 4, 1, 2}));
  ASSERT_EQ(run("rle decode " + (dir / "mask.json").string() + " -o " + (dir / "dec").string()).code, 0);
  const auto back = agglo::read_png(dir / "dec/mask.png");
  EXPECT_EQ(back(1, 1), 255);
  EXPECT_EQ(back(3, 0), 255);
  EXPECT_EQ(back(0, 0), 0);
  fs::remove_all(dir);
}

TEST(Cli, ErrorsAreJsonWithExitCodes) {
  const auto dir = scratch("errors");
  agglo::write_file_atomic(dir / "blocker", "x");
  const auto io = run("synth --count 1 -o " + (dir / "blocker/sub").string());
  EXPECT_EQ(io.code, 2);
  EXPECT_EQ(json::parse(io.err)["error"], "io");

  auto doc = json::parse(R"({"schema_version":"1","images":[{"id":0,"file_name":"a.png","width":2,"height":2}],
    "annotations":[{"id":1,"image_id":0,"particle_id":0,"category_id":1,"rle":[1,2],"bbox":[0,0,1,1],
    "visible_fraction":1,"max_feret":1}],"categories":[{"id":1,"name":"primary_particle"}]})");
  agglo::write_file_atomic(dir / "bad.json", doc.dump());
  const auto bad = run("psd --annotations " + (dir / "bad.json").string() + " -o " + dir.string());
  EXPECT_EQ(bad.code, 1);
  const auto err = json::parse(bad.err);
  EXPECT_EQ(err["error"], "invalid-input");
  EXPECT_EQ(err["path"], "/annotations/0/rle");

  const auto usage = run("frobnicate");
  EXPECT_NE(usage.code, 0);
  EXPECT_EQ(json::parse(usage.err)["error"], "usage");
  fs::remove_all(dir);
}
