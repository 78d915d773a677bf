#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "agglo/error.hpp"
#include "agglo/geometry.hpp"
#include "agglo/image.hpp"
#include "agglo/parallel.hpp"
#include "agglo/random.hpp"
#include "agglo/scene.hpp"

namespace agglo {

inline constexpr std::int32_t kNoInstance = -1;

// Per-pixel feature maps of a scene, viewed orthographically along -z.
struct RenderMaps {
  FloatImage depth;                 // +inf on background
  Grid<std::int32_t> instance_id;   // kNoInstance on background
  FloatImage diffuse;               // Lambertian term in [0, 1]
  FloatImage shadow;                // attenuation in [0, 1]

  ImageSize size() const { return depth.size(); }
};

struct ShadingParams {
  double occluder_attenuation = 0.6;
  int max_occluders = 3;
  double normal_step = 0.5;   // central-difference step for the implicit gradient
  double march_step = 0.5;    // coarse ray-march step before bisection
  int bisection_steps = 8;
};

// Polynomial smooth minimum; k = 0 is the exact minimum.
inline double smooth_min(double a, double b, double k) {
  if (k <= 0) return std::min(a, b);
  const double h = std::max(k - std::abs(a - b), 0.0) / k;
  return std::min(a, b) - h * h * k * 0.25;
}

namespace detail {

// Uniform 2D bins over the frame holding the spheres whose inflated
// projected disk touches each bin.
class SphereBins {
 public:
  SphereBins(const Scene& scene, double margin, int cell = 16)
      : cell_(cell),
        nx_((scene.image_size.width + cell - 1) / cell),
        ny_((scene.image_size.height + cell - 1) / cell),
        bins_(static_cast<std::size_t>(std::max(nx_ * ny_, 0))) {
    for (std::size_t i = 0; i < scene.spheres.size(); ++i) {
      const auto& s = scene.spheres[i];
      const double r = s.radius + margin;
      const int x0 = std::clamp(int(std::floor((s.center.x - r) / cell)), 0, nx_ - 1);
      const int x1 = std::clamp(int(std::floor((s.center.x + r) / cell)), 0, nx_ - 1);
      const int y0 = std::clamp(int(std::floor((s.center.y - r) / cell)), 0, ny_ - 1);
      const int y1 = std::clamp(int(std::floor((s.center.y + r) / cell)), 0, ny_ - 1);
      if (s.center.x + r < 0 || s.center.y + r < 0) continue;
      for (int by = y0; by <= y1; ++by)
        for (int bx = x0; bx <= x1; ++bx)
          bins_[static_cast<std::size_t>(by * nx_ + bx)].push_back(static_cast<int>(i));
    }
  }

  const std::vector<int>& at(int x, int y) const {
    return bins_[static_cast<std::size_t>((y / cell_) * nx_ + (x / cell_))];
  }

 private:
  int cell_, nx_, ny_;
  std::vector<std::vector<int>> bins_;
};

struct Candidate {
  const Sphere* sphere;
  int index;
};

inline double field(const std::vector<Candidate>& cands, Vec3 p, double k) {
  double f = INFINITY;
  for (const auto& c : cands) f = smooth_min(f, norm(p - c.sphere->center) - c.sphere->radius, k);
  return f;
}

}  // namespace detail

// Ray casts every pixel centre. With neck_blend k > 0 the surface is the
// smooth union of the spheres' distance fields, located by a coarse march
// from the top of the k-inflated spheres followed by bisection.
inline RenderMaps render_maps(const Scene& scene, int threads = 1,
                              const ShadingParams& params = {}) {
  const ImageSize size = scene.image_size;
  RenderMaps maps{FloatImage(size, std::numeric_limits<float>::infinity()),
                  Grid<std::int32_t>(size, kNoInstance), FloatImage(size, 0.0f),
                  FloatImage(size, 1.0f)};
  if (scene.spheres.empty() || size.pixels() == 0) return maps;

  const double k = scene.neck_blend;
  const double margin = k;
  const Vec3 light = normalized(scene.light_direction);
  double z_cam = -INFINITY;
  for (const auto& s : scene.spheres) z_cam = std::max(z_cam, s.center.z + s.radius + margin);
  z_cam += 1.0;
  const detail::SphereBins bins(scene, margin);

  parallel_for(static_cast<std::size_t>(size.height), threads, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    std::vector<detail::Candidate> cands;
    for (int x = 0; x < size.width; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      cands.clear();
      for (int idx : bins.at(x, y)) {
        const auto& s = scene.spheres[static_cast<std::size_t>(idx)];
        const double dx = px - s.center.x, dy = py - s.center.y;
        const double rr = s.radius + margin;
        if (dx * dx + dy * dy <= rr * rr) cands.push_back({&s, idx});
      }
      if (cands.empty()) continue;

      double z_hit = -INFINITY;
      if (k <= 0) {
        for (const auto& c : cands) {
          const double dx = px - c.sphere->center.x, dy = py - c.sphere->center.y;
          const double h2 = c.sphere->radius * c.sphere->radius - dx * dx - dy * dy;
          if (h2 < 0) continue;
          z_hit = std::max(z_hit, c.sphere->center.z + std::sqrt(h2));
        }
      } else {
        double z_top = -INFINITY, z_bottom = INFINITY;
        for (const auto& c : cands) {
          const double dx = px - c.sphere->center.x, dy = py - c.sphere->center.y;
          const double rr = c.sphere->radius + margin;
          const double h = std::sqrt(std::max(0.0, rr * rr - dx * dx - dy * dy));
          z_top = std::max(z_top, c.sphere->center.z + h);
          z_bottom = std::min(z_bottom, c.sphere->center.z - h);
        }
        double z_prev = z_top;
        if (detail::field(cands, {px, py, z_prev}, k) <= 0) {
          z_hit = z_prev;
        } else {
          for (double z = z_top - params.march_step; z >= z_bottom - params.march_step;
               z -= params.march_step) {
            if (detail::field(cands, {px, py, z}, k) <= 0) {
              double hi = z_prev, lo = z;  // F(hi) > 0 >= F(lo)
              for (int i = 0; i < params.bisection_steps; ++i) {
                const double mid = 0.5 * (hi + lo);
                if (detail::field(cands, {px, py, mid}, k) <= 0) lo = mid;
                else hi = mid;
              }
              z_hit = lo;
              break;
            }
            z_prev = z;
          }
        }
      }
      if (z_hit == -INFINITY) continue;

      const Vec3 p{px, py, z_hit};
      int winner = -1;
      double best = INFINITY;
      for (const auto& c : cands) {
        const double d = norm(p - c.sphere->center) - c.sphere->radius;
        if (d < best) {
          best = d;
          winner = c.index;
        }
      }
      const double h = params.normal_step;
      const Vec3 grad{
          detail::field(cands, {px + h, py, z_hit}, k) - detail::field(cands, {px - h, py, z_hit}, k),
          detail::field(cands, {px, py + h, z_hit}, k) - detail::field(cands, {px, py - h, z_hit}, k),
          detail::field(cands, {px, py, z_hit + h}, k) - detail::field(cands, {px, py, z_hit - h}, k)};
      const Vec3 normal = normalized(grad);
      const double lambert = std::clamp(dot(normal, light), 0.0, 1.0);

      // Count other spheres crossed by the ray from the surface to the light.
      const Vec3 origin = p + normal * 0.5;
      int occluders = 0;
      for (std::size_t j = 0; j < scene.spheres.size() && occluders < params.max_occluders; ++j) {
        if (static_cast<int>(j) == winner) continue;
        const auto& s = scene.spheres[j];
        const Vec3 oc = origin - s.center;
        const double b = dot(oc, light);
        const double c = dot(oc, oc) - s.radius * s.radius;
        const double disc = b * b - c;
        if (disc >= 0 && -b + std::sqrt(disc) > 0) ++occluders;
      }

      maps.depth(x, y) = static_cast<float>(z_cam - z_hit);
      maps.instance_id(x, y) = scene.spheres[static_cast<std::size_t>(winner)].particle_id;
      maps.diffuse(x, y) = static_cast<float>(lambert);
      maps.shadow(x, y) = static_cast<float>(std::pow(params.occluder_attenuation, occluders));
    }
  });
  return maps;
}

struct CompositeWeights {
  double diffuse = 0.85;
  double shadow = 1.0;
  double background = 1.0;
};

struct BackgroundSpec {
  double base = 0.25;
  double amplitude = 0.05;
  double scale = 64.0;  // lattice spacing of the value-noise field, px
};

struct NoiseSpec {
  double gaussian = 0.0;  // additive sigma, intensity units
  double poisson = 0.0;   // shot-noise scale lambda; 0 disables
};

struct CompositeSpec {
  CompositeWeights weights;
  BackgroundSpec background;
  double blur_sigma = 0.0;
  NoiseSpec noise;
  std::array<double, 2> brightness{0.0, 0.0};  // additive offset range
  std::array<double, 2> contrast{1.0, 1.0};    // gain about 0.5

  void validate() const {
    auto unit = [](double v) { return v >= 0 && v <= 1; };
    if (!unit(weights.diffuse) || !unit(weights.shadow) || !unit(weights.background))
      throw Error(ErrorKind::invalid_spec, "composite weights must lie in [0, 1]");
    if (!unit(background.base)) throw Error(ErrorKind::invalid_spec, "background base must lie in [0, 1]");
    if (!(background.scale > 0)) throw Error(ErrorKind::invalid_spec, "background scale must be > 0");
    if (!(blur_sigma >= 0)) throw Error(ErrorKind::invalid_spec, "blur_sigma must be >= 0");
    if (!unit(noise.gaussian)) throw Error(ErrorKind::invalid_spec, "gaussian noise must lie in [0, 1]");
    if (!(noise.poisson >= 0)) throw Error(ErrorKind::invalid_spec, "poisson scale must be >= 0");
    if (brightness[0] > brightness[1] || contrast[0] > contrast[1])
      throw Error(ErrorKind::invalid_spec, "jitter ranges must be ordered");
  }
};

// Value noise: hashed lattice values in [0, 1), bilinearly interpolated.
class ValueNoise {
 public:
  explicit ValueNoise(std::uint64_t seed) : seed_(seed) {}

  double lattice(std::int64_t ix, std::int64_t iy) const {
    const std::uint64_t h =
        splitmix64(seed_ ^ splitmix64(static_cast<std::uint64_t>(ix) * 0x9e3779b97f4a7c15ULL ^
                                      static_cast<std::uint64_t>(iy)));
    return double(h >> 11) * 0x1.0p-53;
  }

  double operator()(double x, double y) const {
    const double fx = std::floor(x), fy = std::floor(y);
    const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
    const double tx = x - fx, ty = y - fy;
    const double a = lattice(ix, iy), b = lattice(ix + 1, iy);
    const double c = lattice(ix, iy + 1), d = lattice(ix + 1, iy + 1);
    return (a * (1 - tx) + b * tx) * (1 - ty) + (c * (1 - tx) + d * tx) * ty;
  }

 private:
  std::uint64_t seed_;
};

// Weighted sum of the feature maps:
//   background pixel: w_b * (base + amplitude * (2 noise - 1))
//   particle pixel:   w_d * diffuse * shadow^w_s
// clamped to [0, 1].
inline FloatImage composite(const RenderMaps& maps, const CompositeSpec& spec, Rng& rng,
                            int threads = 1) {
  spec.validate();
  const ValueNoise noise(rng());
  const ImageSize size = maps.size();
  FloatImage out(size, 0.0f);
  const auto& w = spec.weights;
  const auto& bg = spec.background;
  parallel_for(static_cast<std::size_t>(size.height), threads, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < size.width; ++x) {
      double v;
      if (maps.instance_id(x, y) == kNoInstance) {
        double field = bg.base;
        if (bg.amplitude != 0)
          field += bg.amplitude * (2 * noise((x + 0.5) / bg.scale, (y + 0.5) / bg.scale) - 1);
        v = w.background * std::clamp(field, 0.0, 1.0);
      } else {
        v = w.diffuse * maps.diffuse(x, y) * std::pow(double(maps.shadow(x, y)), w.shadow);
      }
      out(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  });
  return out;
}

// Normalised 1D Gaussian taps with radius ceil(3 sigma).
inline std::vector<double> gaussian_kernel(double sigma) {
  if (sigma <= 0) return {1.0};
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
  double sum = 0;
  for (int i = -radius; i <= radius; ++i) {
    const double v = std::exp(-0.5 * i * i / (sigma * sigma));
    k[static_cast<std::size_t>(i + radius)] = v;
    sum += v;
  }
  for (auto& v : k) v /= sum;
  return k;
}

// Separable Gaussian blur with clamped edges.
inline FloatImage gaussian_blur(const FloatImage& in, double sigma, int threads = 1) {
  if (sigma <= 0 || in.empty()) return in;
  const auto k = gaussian_kernel(sigma);
  const int radius = static_cast<int>(k.size() / 2);
  const int w = in.width(), h = in.height();
  FloatImage tmp(w, h), out(w, h);
  parallel_for(static_cast<std::size_t>(h), threads, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i)
        acc += k[static_cast<std::size_t>(i + radius)] * in(std::clamp(x + i, 0, w - 1), y);
      tmp(x, y) = static_cast<float>(acc);
    }
  });
  parallel_for(static_cast<std::size_t>(h), threads, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    for (int x = 0; x < w; ++x) {
      double acc = 0;
      for (int i = -radius; i <= radius; ++i)
        acc += k[static_cast<std::size_t>(i + radius)] * tmp(x, std::clamp(y + i, 0, h - 1));
      out(x, y) = static_cast<float>(acc);
    }
  });
  return out;
}

inline std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::floor(255.0 * std::clamp(v, 0.0, 1.0) + 0.5));
}

// Blur, shot noise, additive Gaussian noise, brightness/contrast jitter and
// 8-bit quantisation (round half up). Noise uses one substream per row.
inline Gray8 degrade(const FloatImage& image, const CompositeSpec& spec, Rng& rng,
                     int threads = 1) {
  spec.validate();
  const std::uint64_t noise_seed = rng();
  const double brightness = uniform(rng, spec.brightness[0], spec.brightness[1]);
  const double contrast = uniform(rng, spec.contrast[0], spec.contrast[1]);
  const bool jitter = brightness != 0.0 || contrast != 1.0;
  const FloatImage blurred = gaussian_blur(image, spec.blur_sigma, threads);
  Gray8 out(image.size());
  parallel_for(static_cast<std::size_t>(image.height()), threads, [&](std::size_t row) {
    const int y = static_cast<int>(row);
    Rng row_rng = make_substream(noise_seed, row);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int x = 0; x < image.width(); ++x) {
      double v = blurred(x, y);
      if (spec.noise.poisson > 0) {
        const double mean = std::max(v, 0.0) * spec.noise.poisson;
        v = mean > 0 ? double(std::poisson_distribution<long>(mean)(row_rng)) / spec.noise.poisson
                     : 0.0;
      }
      if (spec.noise.gaussian > 0) v += spec.noise.gaussian * gauss(row_rng);
      if (jitter) v = contrast * (v - 0.5) + 0.5 + brightness;
      out(x, y) = quantize(v);
    }
  });
  return out;
}

// --- float map dumps: "PFMAPS01", u32 width, u32 height (LE), f32 data ---

inline void write_u32_le(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_float_map(const std::string& path, const FloatImage& map) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::io, "cannot open for writing", path);
  os.write("PFMAPS01", 8);
  write_u32_le(os, static_cast<std::uint32_t>(map.width()));
  write_u32_le(os, static_cast<std::uint32_t>(map.height()));
  for (float f : map.data()) {
    std::uint32_t bits;
    std::memcpy(&bits, &f, 4);
    write_u32_le(os, bits);
  }
  if (!os) throw Error(ErrorKind::io, "write failed", path);
}

inline FloatImage read_float_map(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::io, "cannot open for reading", path);
  char magic[8];
  unsigned char hdr[8];
  is.read(magic, 8);
  is.read(reinterpret_cast<char*>(hdr), 8);
  if (!is || std::memcmp(magic, "PFMAPS01", 8) != 0)
    throw Error(ErrorKind::invalid_input, "not a float map file", path);
  auto u32 = [](const unsigned char* b) {
    return std::uint32_t(b[0]) | std::uint32_t(b[1]) << 8 | std::uint32_t(b[2]) << 16 |
           std::uint32_t(b[3]) << 24;
  };
  FloatImage map(static_cast<int>(u32(hdr)), static_cast<int>(u32(hdr + 4)));
  for (float& f : map.data()) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    const std::uint32_t bits = u32(b);
    std::memcpy(&f, &bits, 4);
  }
  if (!is) throw Error(ErrorKind::invalid_input, "truncated float map", path);
  return map;
}

inline FloatImage instance_as_float(const Grid<std::int32_t>& ids) {
  FloatImage out(ids.size());
  for (std::size_t i = 0; i < ids.data().size(); ++i) out.data()[i] = float(ids.data()[i]);
  return out;
}

}  // namespace agglo
