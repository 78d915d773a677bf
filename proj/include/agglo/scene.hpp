#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "agglo/error.hpp"
#include "agglo/geometry.hpp"
#include "agglo/image.hpp"
#include "agglo/random.hpp"

namespace agglo {

// Lognormal primary-particle size law, in projected pixels.
struct PsdSpec {
  double d_g = 30.0;      // geometric mean (median) diameter
  double sigma_g = 1.0;   // geometric standard deviation, >= 1
  std::optional<double> d_min;
  std::optional<double> d_max;

  void validate() const {
    if (!(d_g > 0)) throw Error(ErrorKind::invalid_spec, "d_g must be > 0");
    if (!(sigma_g >= 1)) throw Error(ErrorKind::invalid_spec, "sigma_g must be >= 1");
    if (d_min.has_value() != d_max.has_value())
      throw Error(ErrorKind::invalid_spec, "d_min and d_max must be set together");
    if (d_min && !(0 < *d_min && *d_min < *d_max))
      throw Error(ErrorKind::invalid_spec, "truncation requires 0 < d_min < d_max");
  }
};

enum class AttachMode { chain_biased, compact, uniform_random };

inline std::string_view to_string(AttachMode mode) {
  switch (mode) {
    case AttachMode::chain_biased: return "chain-biased";
    case AttachMode::compact: return "compact";
    case AttachMode::uniform_random: return "uniform-random";
  }
  return "uniform-random";
}

inline AttachMode parse_attach_mode(std::string_view s) {
  if (s == "chain-biased") return AttachMode::chain_biased;
  if (s == "compact") return AttachMode::compact;
  if (s == "uniform-random") return AttachMode::uniform_random;
  throw Error(ErrorKind::invalid_spec, "unknown attachment mode '" + std::string(s) + "'");
}

struct AgglomerateSpec {
  int count_min = 1;
  int count_max = 1;
  PsdSpec psd;
  double sintering_degree = 0.0;  // s in [0, 0.95]
  AttachMode mode = AttachMode::uniform_random;

  void validate() const {
    psd.validate();
    if (count_min < 1 || count_max < count_min)
      throw Error(ErrorKind::invalid_spec, "particle count range must satisfy 1 <= min <= max");
    if (!(sintering_degree >= 0 && sintering_degree <= 0.95))
      throw Error(ErrorKind::invalid_spec, "sintering degree must lie in [0, 0.95]");
  }
};

// Rejection limits; the defaults bound runtime on degenerate specs.
struct SynthesisLimits {
  int sample_tries = 1000;
  int placement_tries = 200;
  int scene_tries = 500;
  double frame_margin = 5.0;
};

struct Sphere {
  Vec3 center;
  double radius = 0;
  int particle_id = 0;
  friend bool operator==(const Sphere&, const Sphere&) = default;
};

struct Scene {
  std::vector<Sphere> spheres;
  std::map<int, int> agglomerate_of;  // particle_id -> agglomerate_id
  ImageSize image_size;
  Vec3 light_direction{0, 0, 1};
  double neck_blend = 0.0;
  std::uint64_t seed = 0;
  // Sintering degree per agglomerate, used by the contact-graph checks.
  std::map<int, double> sintering_of;
  int placement_failures = 0;

  friend bool operator==(const Scene&, const Scene&) = default;
};

// Draws `count` diameters from the (optionally truncated) lognormal law.
inline std::vector<double> sample_diameters(const PsdSpec& spec, int count, Rng& rng,
                                            const SynthesisLimits& limits = {}) {
  spec.validate();
  if (count < 0) throw Error(ErrorKind::invalid_spec, "count must be >= 0");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  if (spec.sigma_g == 1.0) {
    if (spec.d_min && (spec.d_g < *spec.d_min || spec.d_g > *spec.d_max))
      throw Error(ErrorKind::invalid_spec, "degenerate PSD lies outside its truncation bounds");
    out.assign(static_cast<std::size_t>(count), spec.d_g);
    return out;
  }
  std::lognormal_distribution<double> law(std::log(spec.d_g), std::log(spec.sigma_g));
  for (int i = 0; i < count; ++i) {
    int tries = 0;
    double d = law(rng);
    while (spec.d_min && (d < *spec.d_min || d > *spec.d_max)) {
      if (++tries >= limits.sample_tries)
        throw Error(ErrorKind::invalid_spec,
                    "diameter rejection sampling exceeded " +
                        std::to_string(limits.sample_tries) + " tries");
      d = law(rng);
    }
    out.push_back(d);
  }
  return out;
}

inline Vec3 random_unit_vector(Rng& rng) {
  const double z = uniform(rng, -1.0, 1.0);
  const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
  return {rho * std::cos(phi), rho * std::sin(phi), z};
}

// Uniformly distributed rotation (Shoemake's method).
inline Mat3 random_rotation(Rng& rng) {
  const double u1 = uniform01(rng), u2 = uniform01(rng), u3 = uniform01(rng);
  const double a = std::sqrt(1 - u1), b = std::sqrt(u1);
  const double t2 = 2 * std::numbers::pi * u2, t3 = 2 * std::numbers::pi * u3;
  return rotation_from_quaternion(b * std::cos(t3), a * std::sin(t2), a * std::cos(t2),
                                  b * std::sin(t3));
}

struct Attachment {
  int child = 0;
  int parent = 0;
};

struct Agglomerate {
  // particle_id holds the local index until the scene assigns global ids.
  std::vector<Sphere> spheres;
  std::vector<Attachment> attachments;
  double sintering_degree = 0;
};

namespace detail {

// Parent choice: the favoured sphere is taken with this probability,
// otherwise a uniformly random one.
inline constexpr double kFavouredParentProbability = 0.75;

inline int choose_parent(const std::vector<Sphere>& placed, AttachMode mode,
                         const std::vector<bool>& excluded, Rng& rng) {
  std::vector<int> open;
  for (int i = 0; i < static_cast<int>(placed.size()); ++i)
    if (!excluded[i]) open.push_back(i);
  if (open.empty()) return -1;
  const int any = open[static_cast<std::size_t>(uniform_int(rng, 0, int(open.size()) - 1))];
  if (mode == AttachMode::uniform_random) return any;
  const bool favour = uniform01(rng) < kFavouredParentProbability;
  if (!favour) return any;
  if (mode == AttachMode::chain_biased) return open.back();
  Vec3 centroid{};
  for (const auto& s : placed) centroid = centroid + s.center;
  centroid = centroid * (1.0 / double(placed.size()));
  int best = open.front();
  double best_d = INFINITY;
  for (int i : open) {
    const double d = norm(placed[i].center - centroid);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace detail

// Sequential attachment of spheres. Child and parent centres sit at
// (r_i + r_j)(1 - s); placements cutting into any other sphere deeper than
// that are re-drawn.
inline Agglomerate build_agglomerate(const AgglomerateSpec& spec, Rng& rng,
                                     const SynthesisLimits& limits = {}) {
  spec.validate();
  const int count = uniform_int(rng, spec.count_min, spec.count_max);
  if (count <= 0) throw Error(ErrorKind::invalid_spec, "particle count must be >= 1");
  const auto diameters = sample_diameters(spec.psd, count, rng, limits);
  const double shrink = 1.0 - spec.sintering_degree;

  Agglomerate agg;
  agg.sintering_degree = spec.sintering_degree;
  agg.spheres.push_back({{0, 0, 0}, diameters[0] / 2, 0});
  for (int k = 1; k < count; ++k) {
    const double r = diameters[static_cast<std::size_t>(k)] / 2;
    std::vector<bool> excluded(agg.spheres.size(), false);
    bool placed = false;
    while (!placed) {
      const int parent = detail::choose_parent(agg.spheres, spec.mode, excluded, rng);
      if (parent < 0)
        throw Error(ErrorKind::invalid_spec, "no parent sphere admits a non-overlapping placement");
      const Sphere& p = agg.spheres[static_cast<std::size_t>(parent)];
      const double dist = (p.radius + r) * shrink;
      for (int attempt = 0; attempt < limits.placement_tries && !placed; ++attempt) {
        const Vec3 c = p.center + random_unit_vector(rng) * dist;
        bool clash = false;
        for (std::size_t j = 0; j < agg.spheres.size() && !clash; ++j) {
          if (static_cast<int>(j) == parent) continue;
          const auto& q = agg.spheres[j];
          clash = norm(c - q.center) < (q.radius + r) * shrink - 1e-9;
        }
        if (!clash) {
          agg.spheres.push_back({c, r, k});
          agg.attachments.push_back({k, parent});
          placed = true;
        }
      }
      excluded[static_cast<std::size_t>(parent)] = true;
    }
  }
  Vec3 centroid{};
  for (const auto& s : agg.spheres) centroid = centroid + s.center;
  centroid = centroid * (1.0 / double(agg.spheres.size()));
  for (auto& s : agg.spheres) s.center = s.center - centroid;
  return agg;
}

struct AgglomerateRequest {
  AgglomerateSpec spec;
  int count = 0;  // number of agglomerates
};

// Expected projected particle area of a lognormal law: pi/4 * E[d^2].
inline double expected_particle_area(const PsdSpec& psd) {
  const double ls = std::log(psd.sigma_g);
  return std::numbers::pi / 4 * psd.d_g * psd.d_g * std::exp(2 * ls * ls);
}

// Number of agglomerates per spec that fills `coverage` of the frame, with
// the fraction of covered area per spec given by `weights`.
inline std::vector<AgglomerateRequest> plan_for_coverage(
    const std::vector<AgglomerateSpec>& specs, const std::vector<double>& weights,
    double coverage, ImageSize size) {
  if (!(coverage >= 0 && coverage <= 0.5))
    throw Error(ErrorKind::invalid_spec, "coverage must lie in [0, 0.5]");
  double total_w = 0;
  for (double w : weights) total_w += w;
  std::vector<AgglomerateRequest> out;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    specs[i].validate();
    const double share = total_w > 0 ? weights[i] / total_w : 1.0 / double(specs.size());
    const double mean_count = 0.5 * (specs[i].count_min + specs[i].count_max);
    const double area = mean_count * expected_particle_area(specs[i].psd);
    const int n = static_cast<int>(std::lround(coverage * double(size.pixels()) * share / area));
    out.push_back({specs[i], n});
  }
  return out;
}

// Builds, rotates and places agglomerates so that their projected bounding
// circles are pairwise disjoint and inside the frame. Agglomerates that
// cannot be placed are dropped and counted in placement_failures.
inline Scene compose_scene(const std::vector<AgglomerateRequest>& requests, ImageSize size,
                           std::uint64_t seed, double neck_blend = 0.0,
                           Vec3 light_direction = {0, 0, 1},
                           const SynthesisLimits& limits = {}) {
  if (size.width <= 0 || size.height <= 0)
    throw Error(ErrorKind::invalid_spec, "image size must be positive");
  if (neck_blend < 0) throw Error(ErrorKind::invalid_spec, "neck_blend must be >= 0");
  Rng rng{substream_seed(seed, 0x5ce7e)};

  struct Built {
    Agglomerate agg;
    double bound = 0;  // projected bounding-circle radius about the centroid
  };
  std::vector<Built> built;
  for (const auto& req : requests) {
    for (int i = 0; i < req.count; ++i) {
      Built b{build_agglomerate(req.spec, rng, limits)};
      const Mat3 rot = random_rotation(rng);
      for (auto& s : b.agg.spheres) {
        s.center = rot * s.center;
        b.bound = std::max(b.bound, std::hypot(s.center.x, s.center.y) + s.radius);
      }
      built.push_back(std::move(b));
    }
  }
  // Largest first packs more reliably; stable keeps the order deterministic.
  std::stable_sort(built.begin(), built.end(),
                   [](const Built& a, const Built& b) { return a.bound > b.bound; });

  Scene scene;
  scene.image_size = size;
  scene.light_direction = normalized(light_direction);
  scene.neck_blend = neck_blend;
  scene.seed = seed;

  struct Circle {
    double x, y, r;
  };
  std::vector<Circle> placed;
  int next_particle = 0;
  int next_agglomerate = 0;
  const double m = limits.frame_margin;
  for (auto& b : built) {
    const double lo_x = b.bound + m, hi_x = size.width - b.bound - m;
    const double lo_y = b.bound + m, hi_y = size.height - b.bound - m;
    bool ok = false;
    double cx = 0, cy = 0;
    if (lo_x <= hi_x && lo_y <= hi_y) {
      for (int t = 0; t < limits.scene_tries && !ok; ++t) {
        cx = uniform(rng, lo_x, hi_x);
        cy = uniform(rng, lo_y, hi_y);
        ok = std::none_of(placed.begin(), placed.end(), [&](const Circle& c) {
          return std::hypot(c.x - cx, c.y - cy) < c.r + b.bound;
        });
      }
    }
    if (!ok) {
      ++scene.placement_failures;
      continue;
    }
    placed.push_back({cx, cy, b.bound});
    const int agg_id = next_agglomerate++;
    scene.sintering_of[agg_id] = b.agg.sintering_degree;
    for (const auto& s : b.agg.spheres) {
      Sphere out{{s.center.x + cx, s.center.y + cy, s.center.z}, s.radius, next_particle++};
      scene.agglomerate_of[out.particle_id] = agg_id;
      scene.spheres.push_back(out);
    }
  }
  return scene;
}

}  // namespace agglo
