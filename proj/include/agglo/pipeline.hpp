#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "agglo/config.hpp"
#include "agglo/ground_truth.hpp"
#include "agglo/random.hpp"
#include "agglo/render.hpp"
#include "agglo/scene.hpp"

namespace agglo {

struct SyntheticImage {
  Scene scene;
  RenderMaps maps;
  FloatImage intermediate;
  AnnotatedImage annotated;
};

inline std::string image_file_name(std::int64_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "images/%06lld.png", static_cast<long long>(index));
  return buf;
}

// Seed of image `index` in `split`; independent of how images are batched.
inline std::uint64_t image_seed(std::uint64_t seed, const std::string& split, std::int64_t index) {
  return substream_seed(seed, hash_name(split), static_cast<std::uint64_t>(index));
}

// Scene -> maps -> composite -> degraded 8-bit image + ground truth.
inline SyntheticImage synthesize_image(const SceneConfig& cfg, std::uint64_t seed, std::int64_t image_id,
                                       int threads = 1) {
  std::vector<AgglomerateSpec> specs;
  std::vector<double> weights;
  for (const auto& w : cfg.agglomerates) {
    specs.push_back(w.spec);
    weights.push_back(w.weight);
  }
  const auto plan = plan_for_coverage(specs, weights, cfg.coverage, cfg.image_size);
  SyntheticImage out;
  out.scene = compose_scene(plan, cfg.image_size, seed, cfg.neck_blend, cfg.light_direction, cfg.limits);
  out.maps = render_maps(out.scene, threads);
  Rng rng = make_substream(seed, 0xc0337);
  out.intermediate = composite(out.maps, cfg.composite, rng, threads);
  auto& ann = out.annotated;
  ann.image_id = image_id;
  ann.file_name = image_file_name(image_id);
  ann.size = cfg.image_size;
  ann.pixels = degrade(out.intermediate, cfg.composite, rng, threads);
  ann.particles = extract_masks(out.scene, out.maps, cfg.extract);
  return out;
}

}  // namespace agglo
