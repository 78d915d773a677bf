#pragma once

// Rendered test scenes for the Hough baseline: nine isolated spheres on a
// grid, and one sintered agglomerate of eight spheres.

#include <cstdint>
#include <vector>

#include "agglo/ground_truth.hpp"
#include "agglo/hough.hpp"
#include "agglo/metrics.hpp"
#include "agglo/render.hpp"
#include "agglo/scene.hpp"

namespace hough_scenes {

using namespace agglo;

struct Rendered {
  Scene scene;
  AnnotatedImage annotated;
};

inline CompositeSpec look() {
  CompositeSpec spec;
  spec.blur_sigma = 0.8;
  spec.noise = {0.02, 0.0};
  return spec;
}

inline Rendered finish(Scene scene, std::uint64_t seed) {
  Rendered out;
  const auto maps = render_maps(scene);
  Rng rng = make_substream(seed, 0x40c6);
  const auto spec = look();
  out.annotated.size = scene.image_size;
  out.annotated.pixels = degrade(composite(maps, spec, rng), spec, rng);
  out.annotated.particles = extract_masks(scene, maps);
  out.scene = std::move(scene);
  return out;
}

inline Rendered isolated_grid(std::uint64_t seed) {
  Scene scene;
  scene.image_size = {320, 320};
  scene.light_direction = normalized({-0.35, -0.35, 1.0});
  Rng rng = make_substream(seed, 0x9d15c);
  int id = 0;
  for (int gy = 0; gy < 3; ++gy)
    for (int gx = 0; gx < 3; ++gx) {
      const double r = uniform(rng, 18, 28);
      scene.spheres.push_back({{55 + 105.0 * gx + uniform(rng, -6, 6), 55 + 105.0 * gy + uniform(rng, -6, 6), 0}, r, id});
      scene.agglomerate_of[id] = id;
      scene.sintering_of[id] = 0.0;
      ++id;
    }
  return finish(std::move(scene), seed);
}

inline Rendered sintered_agglomerate(std::uint64_t seed) {
  const AgglomerateSpec spec{8, 8, {46, 1.15}, 0.4, AttachMode::compact};
  auto scene = compose_scene({{spec, 1}}, {320, 320}, seed, 3.0, normalized({-0.35, -0.35, 1.0}));
  return finish(std::move(scene), seed);
}

inline HoughParams params() {
  HoughParams p;
  p.r_min = 12;
  p.r_max = 40;
  return p;
}

inline double ap50(const AnnotatedImage& gt, const std::vector<ParticleRecord>& det) {
  std::vector<EvalObject> g, d;
  for (const auto& p : gt.particles) g.push_back({p.particle_id, 0, p.mask, {}});
  for (const auto& p : det) d.push_back({p.particle_id, 0, p.mask, p.score});
  return match_and_ap(g, d).ap50;
}

}  // namespace hough_scenes
