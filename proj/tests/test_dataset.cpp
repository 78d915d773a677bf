#include <gtest/gtest.h>

#include <filesystem>
#include <map>

#include "agglo/config.hpp"
#include "agglo/dataset.hpp"
#include "agglo/ground_truth.hpp"
#include "agglo/io.hpp"
#include "agglo/metrics.hpp"
#include "agglo/pipeline.hpp"
#include "oracles.hpp"

using namespace agglo;
namespace fs = std::filesystem;

namespace {

Scene one_sphere_scene(ImageSize size, Sphere s) {
  Scene scene;
  scene.image_size = size;
  scene.light_direction = {0, 0, 1};
  s.particle_id = 0;
  scene.spheres = {s};
  scene.agglomerate_of[0] = 0;
  return scene;
}

fs::path temp_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("agglo_test_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<AnnotatedImage> small_dataset() {
  SceneConfig cfg;
  cfg.image_size = {160, 120};
  cfg.coverage = 0.3;
  cfg.agglomerates = {{{1, 4, {18, 1.2}, 0.2, AttachMode::compact}, 1.0}};
  std::vector<AnnotatedImage> out;
  for (int i = 0; i < 2; ++i) out.push_back(synthesize_image(cfg, image_seed(1, "train", i), i).annotated);
  return out;
}

}  // namespace

TEST(ExtractMasks, IsolatedSphereFullDisk) {
  const ImageSize size{128, 128};
  const auto scene = one_sphere_scene(size, {{64, 64, 0}, 30});
  const auto maps = render_maps(scene);
  const auto recs = extract_masks(scene, maps, {false, 0.01});
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_DOUBLE_EQ(recs[0].visible_fraction, 1.0);
  EXPECT_EQ(decode_rle(recs[0].mask), oracle::disk(128, 128, 64, 64, 30));
  EXPECT_DOUBLE_EQ(recs[0].diameter, 60.0);
}

TEST(ExtractMasks, ConvexifyBarelyChangesDisk) {
  const ImageSize size{200, 200};
  const auto scene = one_sphere_scene(size, {{100.3, 99.6, 0}, 47.2});
  const auto maps = render_maps(scene);
  const auto raw = extract_masks(scene, maps, {false, 0.01});
  const auto hull = extract_masks(scene, maps, {true, 0.01});
  const double a = double(area(raw[0].mask)), b = double(area(hull[0].mask));
  EXPECT_GE(b, a);
  EXPECT_LT((b - a) / a, 0.005);
}

TEST(ExtractMasks, HiddenSphereAbsent) {
  Scene scene = one_sphere_scene({128, 128}, {{64, 64, 0}, 40});
  scene.spheres.push_back({{64, 64, -30}, 10, 1});
  scene.agglomerate_of[1] = 0;
  const auto recs = extract_masks(scene, render_maps(scene));
  ASSERT_EQ(recs.size(), 1u);
  EXPECT_EQ(recs[0].particle_id, 0);
}

TEST(ExtractMasks, OcclusionPartitionTilesInstanceMap) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const std::vector<AgglomerateRequest> req{{{3, 10, {22, 1.3}, 0.3, AttachMode::compact}, 5}};
    const auto scene = compose_scene(req, {256, 192}, seed, 2.0);
    const auto maps = render_maps(scene);
    const auto recs = extract_masks(scene, maps, {false, 0.0});
    Raster cover(256, 192, 0);
    for (const auto& r : recs) {
      const auto d = decode_rle(r.mask);
      for (std::size_t k = 0; k < d.data().size(); ++k) {
        if (!d.data()[k]) continue;
        ASSERT_EQ(cover.data()[k], 0) << "overlapping visible masks";
        cover.data()[k] = 1;
        ASSERT_EQ(maps.instance_id.data()[k], r.particle_id);
      }
    }
    for (std::size_t k = 0; k < cover.data().size(); ++k)
      ASSERT_EQ(cover.data()[k] != 0, maps.instance_id.data()[k] != kNoInstance);
  }
}

TEST(ExtractMasks, ConvexifiedAreSolid) {
  const std::vector<AgglomerateRequest> req{{{3, 10, {30, 1.3}, 0.3, AttachMode::compact}, 5}};
  const auto scene = compose_scene(req, {400, 300}, 3, 3.0);
  const auto recs = extract_masks(scene, render_maps(scene));
  int checked = 0;
  for (const auto& r : recs) {
    if (area(r.mask) < 500) continue;
    EXPECT_GE(solidity(r.mask).solidity, 0.99);
    ++checked;
  }
  EXPECT_GT(checked, 0);
}

TEST(ExtractMasks, BboxAndFeretConsistent) {
  const std::vector<AgglomerateRequest> req{{{2, 6, {25, 1.3}, 0.2, AttachMode::chain_biased}, 4}};
  const auto scene = compose_scene(req, {300, 200}, 9);
  for (const auto& r : extract_masks(scene, render_maps(scene))) {
    const auto d = decode_rle(r.mask);
    EXPECT_EQ(r.bbox, bounding_box(d));
    EXPECT_NEAR(r.max_feret, oracle::feret(d), 1e-9);
  }
}

TEST(Export, EmptyDataset) {
  const auto dir = temp_dir("empty");
  std::vector<AnnotatedImage> none;
  const auto manifest = export_dataset(none, dir, "empty", "test", 0);
  EXPECT_TRUE(manifest.images.empty());
  const auto doc = load_json(dir / "annotations.json");
  EXPECT_NO_THROW(validate_annotations(doc, false));
  EXPECT_TRUE(doc["annotations"].empty());
  EXPECT_TRUE(load_json(dir / "manifest.json")["images"].empty());
  fs::remove_all(dir);
}

TEST(Export, CountsAndUniqueIds) {
  const ImageSize size{64, 48};
  std::vector<AnnotatedImage> imgs(2);
  for (int i = 0; i < 2; ++i) {
    imgs[i].image_id = i;
    imgs[i].file_name = image_file_name(i);
    imgs[i].size = size;
    imgs[i].pixels = Gray8(64, 48, std::uint8_t(40 * i));
  }
  for (int p = 0; p < 5; ++p) {
    ParticleRecord r;
    r.particle_id = p;
    r.mask = mask_from_pixels(size, {{p * 5, p * 3}, {p * 5 + 1, p * 3}});
    r.bbox = bounding_box(r.mask);
    r.max_feret = 2;
    imgs[p % 2].particles.push_back(r);
  }
  const auto dir = temp_dir("counts");
  export_dataset(imgs, dir, "tiny", "train", 4);
  const auto doc = load_json(dir / "annotations.json");
  ASSERT_EQ(doc["annotations"].size(), 5u);
  std::set<std::int64_t> ids;
  for (const auto& a : doc["annotations"]) ids.insert(a["id"].get<std::int64_t>());
  EXPECT_EQ(ids.size(), 5u);
  EXPECT_TRUE(fs::exists(dir / "images/000000.png"));
  EXPECT_TRUE(fs::exists(dir / "images/000001.png"));
  fs::remove_all(dir);
}

TEST(Export, ReimportIsBitExact) {
  auto imgs = small_dataset();
  const auto dir = temp_dir("roundtrip");
  export_dataset(imgs, dir, "rt", "train", 1);
  const auto back = load_annotations(dir / "annotations.json");
  ASSERT_EQ(back.size(), imgs.size());
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    ASSERT_EQ(back[i].particles.size(), imgs[i].particles.size());
    EXPECT_EQ(back[i].size, imgs[i].size);
    for (std::size_t p = 0; p < imgs[i].particles.size(); ++p) {
      const auto& a = imgs[i].particles[p];
      const auto& b = back[i].particles[p];
      EXPECT_EQ(a.mask, b.mask);
      EXPECT_EQ(a.bbox, b.bbox);
      EXPECT_EQ(a.max_feret, b.max_feret);
      EXPECT_EQ(a.visible_fraction, b.visible_fraction);
      EXPECT_EQ(a.diameter, b.diameter);
      EXPECT_EQ(a.agglomerate_id, b.agglomerate_id);
    }
    EXPECT_EQ(read_png(dir / imgs[i].file_name), imgs[i].pixels);
  }
  fs::remove_all(dir);
}

TEST(Schema, ErrorsNameJsonPointer) {
  auto imgs = small_dataset();
  const auto good = annotations_to_json(imgs);
  ASSERT_FALSE(good["annotations"].empty());
  auto expect_path = [&](json doc, const std::string& path, bool require_score = false) {
    try {
      validate_annotations(doc, require_score);
      ADD_FAILURE() << "expected failure at " << path;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::invalid_input);
      EXPECT_EQ(e.path(), path);
    }
  };
  {
    auto d = good;
    d["annotations"][0]["rle"].push_back(std::uint32_t{1});
    expect_path(d, "/annotations/0/rle");
  }
  {
    auto d = good;
    d["annotations"][0].erase("bbox");
    expect_path(d, "/annotations/0/bbox");
  }
  {
    auto d = good;
    d["annotations"][0]["image_id"] = 999;
    expect_path(d, "/annotations/0/image_id");
  }
  {
    auto d = good;
    d["schema_version"] = "2";
    expect_path(d, "/schema_version");
  }
  expect_path(good, "/annotations/0/score", true);
  {
    auto d = good;
    for (auto& a : d["annotations"]) a["score"] = 0.5;
    d["annotations"][1]["score"] = 1.5;
    expect_path(d, "/annotations/1/score", true);
  }
}

TEST(Png, RoundTrip) {
  Gray8 img(37, 23);
  Rng rng(6);
  for (auto& v : img.data()) v = std::uint8_t(uniform_int(rng, 0, 255));
  const auto path = fs::temp_directory_path() / "agglo_test.png";
  write_png(path, img);
  EXPECT_EQ(read_png(path), img);
  EXPECT_EQ(encode_png(img), read_file(path));
  fs::remove(path);
}

TEST(Png, UnwritablePathIsIoError) {
  try {
    write_png("/nonexistent_dir/x/y.png", Gray8(2, 2, 0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io);
  }
}

TEST(Config, ParseAndRoundTrip) {
  const json j = {{"image_size", {320, 240}},
                  {"coverage", 0.25},
                  {"neck_blend", 2.5},
                  {"noise", {{"gaussian", 0.03}, {"poisson", 80}}},
                  {"agglomerates",
                   {{{"count_range", {2, 9}}, {"d_g", 24}, {"sigma_g", 1.3}, {"sintering_degree", 0.2},
                     {"mode", "chain-biased"}, {"weight", 2}}}}};
  const auto cfg = parse_scene_config(j);
  EXPECT_EQ(cfg.image_size, (ImageSize{320, 240}));
  EXPECT_EQ(cfg.agglomerates[0].spec.mode, AttachMode::chain_biased);
  EXPECT_EQ(cfg.agglomerates[0].spec.count_max, 9);
  EXPECT_EQ(to_json(parse_scene_config(to_json(cfg))), to_json(cfg));
}

TEST(Config, InvalidFieldsNamePath) {
  auto path_of = [](const json& j) {
    try {
      parse_scene_config(j);
    } catch (const Error& e) {
      return e.path();
    }
    return std::string("<no error>");
  };
  EXPECT_EQ(path_of(json{{"coverage", 0.2}}), "/agglomerates");
  EXPECT_EQ(path_of(json{{"agglomerates", {{{"d_g", 20}, {"sigma_g", 0.5}}}}}), "/agglomerates/0");
  EXPECT_EQ(path_of(json{{"coverage", 0.7}, {"agglomerates", {{{"d_g", 20}}}}}), "/coverage");
  EXPECT_EQ(path_of(json{{"coverage", "x"}, {"agglomerates", {{{"d_g", 20}}}}}), "/coverage");
}
