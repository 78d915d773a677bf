#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "agglo/error.hpp"
#include "agglo/ground_truth.hpp"
#include "agglo/hough.hpp"
#include "agglo/render.hpp"
#include "agglo/scene.hpp"

namespace agglo {

struct WeightedAgglomerateSpec {
  AgglomerateSpec spec;
  double weight = 1.0;  // share of the covered area
};

struct SceneConfig {
  ImageSize image_size{1024, 768};
  double coverage = 0.3;
  std::vector<WeightedAgglomerateSpec> agglomerates;
  std::uint64_t seed = 0;
  double neck_blend = 0.0;
  Vec3 light_direction{-0.35, -0.35, 1.0};
  CompositeSpec composite;
  ExtractOptions extract;
  SynthesisLimits limits;
};

namespace detail {

inline const nlohmann::json* find(const nlohmann::json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback, const std::string& at) {
  const auto* v = find(j, key);
  if (!v) return fallback;
  try {
    return v->get<T>();
  } catch (const nlohmann::json::exception&) {
    throw Error(ErrorKind::invalid_input, "wrong type for " + at + "/" + key, at + "/" + key);
  }
}

inline std::array<double, 2> range_or(const nlohmann::json& j, const char* key,
                                      std::array<double, 2> fallback, const std::string& at) {
  const auto* v = find(j, key);
  if (!v) return fallback;
  if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number())
    throw Error(ErrorKind::invalid_input, at + "/" + key + " must be [lo, hi]", at + "/" + key);
  return {(*v)[0].get<double>(), (*v)[1].get<double>()};
}

}  // namespace detail

inline SceneConfig parse_scene_config(const nlohmann::json& j) {
  using detail::find;
  using detail::get_or;
  if (!j.is_object()) throw Error(ErrorKind::invalid_input, "scene config must be an object", "");
  SceneConfig cfg;
  if (const auto* s = find(j, "image_size")) {
    if (!s->is_array() || s->size() != 2 || !(*s)[0].is_number_integer() || !(*s)[1].is_number_integer())
      throw Error(ErrorKind::invalid_input, "image_size must be [width, height]", "/image_size");
    cfg.image_size = {(*s)[0].get<int>(), (*s)[1].get<int>()};
  }
  cfg.coverage = get_or(j, "coverage", cfg.coverage, "");
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed, "");
  cfg.neck_blend = get_or(j, "neck_blend", cfg.neck_blend, "");
  cfg.composite.blur_sigma = get_or(j, "blur_sigma", cfg.composite.blur_sigma, "");
  if (const auto* l = find(j, "light_direction")) {
    if (!l->is_array() || l->size() != 3)
      throw Error(ErrorKind::invalid_input, "light_direction must be [x, y, z]", "/light_direction");
    cfg.light_direction = {(*l)[0].get<double>(), (*l)[1].get<double>(), (*l)[2].get<double>()};
  }
  if (const auto* n = find(j, "noise")) {
    cfg.composite.noise.gaussian = get_or(*n, "gaussian", 0.0, "/noise");
    cfg.composite.noise.poisson = get_or(*n, "poisson", 0.0, "/noise");
  }
  if (const auto* b = find(j, "background")) {
    auto& bg = cfg.composite.background;
    bg.base = get_or(*b, "base", bg.base, "/background");
    bg.amplitude = get_or(*b, "amplitude", bg.amplitude, "/background");
    bg.scale = get_or(*b, "scale", bg.scale, "/background");
  }
  if (const auto* w = find(j, "weights")) {
    auto& cw = cfg.composite.weights;
    cw.diffuse = get_or(*w, "diffuse", cw.diffuse, "/weights");
    cw.shadow = get_or(*w, "shadow", cw.shadow, "/weights");
    cw.background = get_or(*w, "background", cw.background, "/weights");
  }
  if (const auto* jit = find(j, "jitter")) {
    cfg.composite.brightness = detail::range_or(*jit, "brightness", cfg.composite.brightness, "/jitter");
    cfg.composite.contrast = detail::range_or(*jit, "contrast", cfg.composite.contrast, "/jitter");
  }
  if (const auto* g = find(j, "ground_truth")) {
    cfg.extract.convexify = get_or(*g, "convexify", cfg.extract.convexify, "/ground_truth");
    cfg.extract.min_visible_fraction =
        get_or(*g, "min_visible_fraction", cfg.extract.min_visible_fraction, "/ground_truth");
  }
  if (const auto* lim = find(j, "limits")) {
    cfg.limits.sample_tries = get_or(*lim, "sample_tries", cfg.limits.sample_tries, "/limits");
    cfg.limits.placement_tries = get_or(*lim, "placement_tries", cfg.limits.placement_tries, "/limits");
    cfg.limits.scene_tries = get_or(*lim, "scene_tries", cfg.limits.scene_tries, "/limits");
  }

  const auto* aggs = find(j, "agglomerates");
  if (!aggs || !aggs->is_array() || aggs->empty())
    throw Error(ErrorKind::invalid_input, "agglomerates must be a nonempty array", "/agglomerates");
  for (std::size_t i = 0; i < aggs->size(); ++i) {
    const auto& a = (*aggs)[i];
    const std::string at = "/agglomerates/" + std::to_string(i);
    if (!a.is_object()) throw Error(ErrorKind::invalid_input, at + " must be an object", at);
    WeightedAgglomerateSpec w;
    const auto range = detail::range_or(a, "count_range", {1, 1}, at);
    w.spec.count_min = static_cast<int>(range[0]);
    w.spec.count_max = static_cast<int>(range[1]);
    w.spec.psd.d_g = get_or(a, "d_g", w.spec.psd.d_g, at);
    w.spec.psd.sigma_g = get_or(a, "sigma_g", w.spec.psd.sigma_g, at);
    if (find(a, "d_min") || find(a, "d_max")) {
      w.spec.psd.d_min = get_or(a, "d_min", 0.0, at);
      w.spec.psd.d_max = get_or(a, "d_max", 0.0, at);
    }
    w.spec.sintering_degree = get_or(a, "sintering_degree", 0.0, at);
    w.spec.mode = parse_attach_mode(get_or<std::string>(a, "mode", "uniform-random", at));
    w.weight = get_or(a, "weight", 1.0, at);
    try {
      w.spec.validate();
    } catch (const Error& e) {
      throw Error(ErrorKind::invalid_input, at + ": " + e.what(), at);
    }
    cfg.agglomerates.push_back(w);
  }
  if (cfg.image_size.width <= 0 || cfg.image_size.height <= 0)
    throw Error(ErrorKind::invalid_input, "image_size must be positive", "/image_size");
  if (!(cfg.coverage >= 0 && cfg.coverage <= 0.5))
    throw Error(ErrorKind::invalid_input, "coverage must lie in [0, 0.5]", "/coverage");
  if (cfg.neck_blend < 0) throw Error(ErrorKind::invalid_input, "neck_blend must be >= 0", "/neck_blend");
  try {
    cfg.composite.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::invalid_input, e.what(), "");
  }
  return cfg;
}

inline nlohmann::json to_json(const SceneConfig& c) {
  nlohmann::json aggs = nlohmann::json::array();
  for (const auto& w : c.agglomerates) {
    nlohmann::json a{{"count_range", {w.spec.count_min, w.spec.count_max}},
                     {"d_g", w.spec.psd.d_g},
                     {"sigma_g", w.spec.psd.sigma_g},
                     {"sintering_degree", w.spec.sintering_degree},
                     {"mode", std::string(to_string(w.spec.mode))},
                     {"weight", w.weight}};
    if (w.spec.psd.d_min) {
      a["d_min"] = *w.spec.psd.d_min;
      a["d_max"] = *w.spec.psd.d_max;
    }
    aggs.push_back(a);
  }
  const auto& cs = c.composite;
  return {{"image_size", {c.image_size.width, c.image_size.height}},
          {"coverage", c.coverage},
          {"agglomerates", aggs},
          {"seed", c.seed},
          {"neck_blend", c.neck_blend},
          {"light_direction", {c.light_direction.x, c.light_direction.y, c.light_direction.z}},
          {"blur_sigma", cs.blur_sigma},
          {"noise", {{"gaussian", cs.noise.gaussian}, {"poisson", cs.noise.poisson}}},
          {"background",
           {{"base", cs.background.base}, {"amplitude", cs.background.amplitude}, {"scale", cs.background.scale}}},
          {"weights",
           {{"diffuse", cs.weights.diffuse}, {"shadow", cs.weights.shadow}, {"background", cs.weights.background}}},
          {"jitter", {{"brightness", cs.brightness}, {"contrast", cs.contrast}}},
          {"ground_truth",
           {{"convexify", c.extract.convexify}, {"min_visible_fraction", c.extract.min_visible_fraction}}},
          {"limits",
           {{"sample_tries", c.limits.sample_tries},
            {"placement_tries", c.limits.placement_tries},
            {"scene_tries", c.limits.scene_tries}}}};
}

inline HoughParams parse_hough_params(const nlohmann::json& j) {
  using detail::get_or;
  HoughParams p;
  if (!j.is_object()) throw Error(ErrorKind::invalid_input, "hough params must be an object", "");
  p.r_min = get_or(j, "r_min", p.r_min, "");
  p.r_max = get_or(j, "r_max", p.r_max, "");
  p.accumulator_threshold = get_or(j, "accumulator_threshold", p.accumulator_threshold, "");
  p.edge_threshold = get_or(j, "edge_threshold", p.edge_threshold, "");
  p.nms_distance_factor = get_or(j, "nms_distance_factor", p.nms_distance_factor, "");
  p.max_circles = get_or(j, "max_circles", p.max_circles, "");
  return p;
}

inline nlohmann::json to_json(const HoughParams& p) {
  return {{"r_min", p.r_min},
          {"r_max", p.r_max},
          {"accumulator_threshold", p.accumulator_threshold},
          {"edge_threshold", p.edge_threshold},
          {"nms_distance_factor", p.nms_distance_factor},
          {"max_circles", p.max_circles}};
}

}  // namespace agglo
