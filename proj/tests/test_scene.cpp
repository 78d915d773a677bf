#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <set>

#include "agglo/scene.hpp"
#include "oracles.hpp"

using namespace agglo;

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) { return parent[x] == x ? x : parent[x] = find(parent[x]); }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

bool contact_graph_connected(const std::vector<Sphere>& spheres, double s) {
  UnionFind uf(spheres.size());
  for (std::size_t i = 0; i < spheres.size(); ++i)
    for (std::size_t j = i + 1; j < spheres.size(); ++j)
      if (norm(spheres[i].center - spheres[j].center) <=
          (spheres[i].radius + spheres[j].radius) * (1 - s) + 1e-6)
        uf.unite(int(i), int(j));
  for (std::size_t i = 1; i < spheres.size(); ++i)
    if (uf.find(int(i)) != uf.find(0)) return false;
  return true;
}

double geometric_mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += std::log(x);
  return std::exp(s / double(v.size()));
}

double geometric_std(const std::vector<double>& v) {
  const double mu = std::log(geometric_mean(v));
  double s = 0;
  for (double x : v) s += (std::log(x) - mu) * (std::log(x) - mu);
  return std::exp(std::sqrt(s / double(v.size())));
}

}  // namespace

TEST(SampleDiameters, UnitSigmaCollapses) {
  Rng rng(1);
  const auto d = sample_diameters({30, 1.0}, 5, rng);
  EXPECT_EQ(d, std::vector<double>(5, 30.0));
}

TEST(SampleDiameters, EmptyRequest) {
  Rng rng(1);
  EXPECT_TRUE(sample_diameters({30, 1.4}, 0, rng).empty());
}

TEST(SampleDiameters, MomentsMatchLognormalLaw) {
  Rng rng(2024);
  const auto d = sample_diameters({30, 1.4}, 100000, rng);
  EXPECT_NEAR(geometric_mean(d), 30.0, 0.3);
  EXPECT_NEAR(geometric_std(d), 1.4, 0.014);
}

TEST(SampleDiameters, KolmogorovSmirnovAtOnePercent) {
  Rng rng(77);
  const auto d = sample_diameters({30, 1.4}, 100000, rng);
  std::vector<double> logs;
  for (double x : d) logs.push_back(std::log(x));
  const double stat = oracle::ks_statistic(logs, std::log(30.0), std::log(1.4));
  EXPECT_LT(stat, 1.628 / std::sqrt(1e5));  // alpha = 0.01
}

TEST(SampleDiameters, TruncationRespected) {
  Rng rng(3);
  PsdSpec spec{30, 1.5, 20.0, 40.0};
  for (double d : sample_diameters(spec, 2000, rng)) {
    EXPECT_GE(d, 20.0);
    EXPECT_LE(d, 40.0);
  }
}

TEST(SampleDiameters, DegenerateTruncationIsInvalidSpec) {
  Rng rng(3);
  PsdSpec spec{30, 1.05, 300.0, 301.0};
  try {
    sample_diameters(spec, 1, rng);
    FAIL() << "expected invalid-spec";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::invalid_spec);
  }
}

TEST(SampleDiameters, RejectsInvalidSpecs) {
  Rng rng(3);
  EXPECT_THROW(sample_diameters({30, 0.9}, 1, rng), Error);
  EXPECT_THROW(sample_diameters({0, 1.2}, 1, rng), Error);
  EXPECT_THROW(sample_diameters({30, 1.2, 40.0, 20.0}, 1, rng), Error);
}

TEST(BuildAgglomerate, SingleSphereAtOrigin) {
  Rng rng(5);
  AgglomerateSpec spec{1, 1, {30, 1.3}, 0.7, AttachMode::compact};
  const auto agg = build_agglomerate(spec, rng);
  ASSERT_EQ(agg.spheres.size(), 1u);
  EXPECT_EQ(agg.spheres[0].center, (Vec3{0, 0, 0}));
}

TEST(BuildAgglomerate, TangentPairAtZeroSintering) {
  Rng rng(5);
  AgglomerateSpec spec{2, 2, {20, 1.0}, 0.0, AttachMode::uniform_random};
  const auto agg = build_agglomerate(spec, rng);
  ASSERT_EQ(agg.spheres.size(), 2u);
  EXPECT_NEAR(norm(agg.spheres[0].center - agg.spheres[1].center), 20.0, 1e-12);
}

TEST(BuildAgglomerate, ZeroParticlesIsInvalid) {
  Rng rng(5);
  AgglomerateSpec spec{0, 0, {20, 1.0}, 0.0, AttachMode::uniform_random};
  EXPECT_THROW(build_agglomerate(spec, rng), Error);
}

TEST(BuildAgglomerate, SinteringDegreeOutOfRange) {
  Rng rng(5);
  AgglomerateSpec spec{3, 3, {20, 1.0}, 0.96, AttachMode::uniform_random};
  EXPECT_THROW(build_agglomerate(spec, rng), Error);
}

class AttachmentModes : public ::testing::TestWithParam<AttachMode> {};

TEST_P(AttachmentModes, DistanceModelAndConnectivity) {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng(seed);
    const double s = 0.3;
    AgglomerateSpec spec{20, 20, {30, 1.3}, s, GetParam()};
    const auto agg = build_agglomerate(spec, rng);
    ASSERT_EQ(agg.spheres.size(), 20u);
    ASSERT_EQ(agg.attachments.size(), 19u);
    for (const auto& a : agg.attachments) {
      const auto& c = agg.spheres[a.child];
      const auto& p = agg.spheres[a.parent];
      EXPECT_NEAR(norm(c.center - p.center), (c.radius + p.radius) * (1 - s), 1e-9);
    }
    EXPECT_TRUE(contact_graph_connected(agg.spheres, s));
    Vec3 centroid{};
    for (const auto& sp : agg.spheres) centroid = centroid + sp.center;
    EXPECT_NEAR(norm(centroid), 0.0, 1e-9);
  }
}

INSTANTIATE_TEST_SUITE_P(Modes, AttachmentModes,
                         ::testing::Values(AttachMode::chain_biased, AttachMode::compact,
                                           AttachMode::uniform_random));

TEST(BuildAgglomerate, ModesProduceDistinctCompactness) {
  // Mean radius of gyration: chain-biased agglomerates spread out further
  // than compact ones.
  auto gyration = [](AttachMode mode) {
    double total = 0;
    for (std::uint64_t seed = 0; seed < 40; ++seed) {
      Rng rng(seed);
      const auto agg = build_agglomerate({30, 30, {20, 1.0}, 0.0, mode}, rng);
      double s = 0;
      for (const auto& sp : agg.spheres) s += dot(sp.center, sp.center);
      total += std::sqrt(s / double(agg.spheres.size()));
    }
    return total / 40;
  };
  EXPECT_GT(gyration(AttachMode::chain_biased), gyration(AttachMode::compact));
}

TEST(ComposeScene, SingleSphereRespectsMargin) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto scene = compose_scene({{{1, 1, {100, 1.0}, 0.0, AttachMode::compact}, 1}}, {256, 256}, seed);
    ASSERT_EQ(scene.spheres.size(), 1u);
    const auto& c = scene.spheres[0].center;
    EXPECT_GE(c.x, 55.0);
    EXPECT_LE(c.x, 201.0);
    EXPECT_GE(c.y, 55.0);
    EXPECT_LE(c.y, 201.0);
  }
}

TEST(ComposeScene, DeterministicForSeed) {
  const std::vector<AgglomerateRequest> req{{{3, 8, {25, 1.3}, 0.2, AttachMode::chain_biased}, 6}};
  EXPECT_EQ(compose_scene(req, {512, 512}, 99), compose_scene(req, {512, 512}, 99));
  EXPECT_FALSE(compose_scene(req, {512, 512}, 99) == compose_scene(req, {512, 512}, 100));
}

TEST(ComposeScene, NoProjectedOverlapAcrossAgglomerates) {
  const ImageSize size{1024, 768};
  // Ten agglomerates whose particles cover about 40 % of the frame.
  AgglomerateSpec spec{3, 10, {75, 1.2}, 0.2, AttachMode::uniform_random};
  const auto plan = plan_for_coverage({spec}, {1.0}, 0.4, size);
  ASSERT_EQ(plan[0].count, 10);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto scene = compose_scene(plan, size, seed);
    // Bounding circles from the sphere positions, brute force pairwise.
    std::map<int, std::vector<const Sphere*>> groups;
    for (const auto& s : scene.spheres) groups[scene.agglomerate_of.at(s.particle_id)].push_back(&s);
    struct C { double x, y, r; };
    std::vector<C> circles;
    for (auto& [id, members] : groups) {
      double cx = 0, cy = 0;
      for (auto* s : members) {
        cx += s->center.x;
        cy += s->center.y;
      }
      cx /= double(members.size());
      cy /= double(members.size());
      double r = 0;
      for (auto* s : members) r = std::max(r, std::hypot(s->center.x - cx, s->center.y - cy) + s->radius);
      circles.push_back({cx, cy, r});
      EXPECT_GE(cx - r, 5.0 - 1e-9);
      EXPECT_LE(cx + r, size.width - 5.0 + 1e-9);
      EXPECT_GE(cy - r, 5.0 - 1e-9);
      EXPECT_LE(cy + r, size.height - 5.0 + 1e-9);
    }
    EXPECT_EQ(circles.size() + std::size_t(scene.placement_failures), 10u);
    for (std::size_t i = 0; i < circles.size(); ++i)
      for (std::size_t j = i + 1; j < circles.size(); ++j)
        EXPECT_GE(std::hypot(circles[i].x - circles[j].x, circles[i].y - circles[j].y),
                  circles[i].r + circles[j].r - 1e-9);
  }
}

TEST(ComposeScene, EveryAgglomerateStaysConnected) {
  const std::vector<AgglomerateRequest> req{{{5, 15, {25, 1.2}, 0.4, AttachMode::compact}, 8}};
  const auto scene = compose_scene(req, {1024, 768}, 11);
  std::map<int, std::vector<Sphere>> groups;
  for (const auto& s : scene.spheres) groups[scene.agglomerate_of.at(s.particle_id)].push_back(s);
  for (auto& [id, members] : groups) EXPECT_TRUE(contact_graph_connected(members, scene.sintering_of.at(id)));
  std::set<int> ids;
  for (const auto& s : scene.spheres) EXPECT_TRUE(ids.insert(s.particle_id).second);
}

TEST(ComposeScene, PlacementFailuresAreCounted) {
  // Two agglomerates that cannot both fit.
  const std::vector<AgglomerateRequest> req{{{1, 1, {100, 1.0}, 0.0, AttachMode::compact}, 2}};
  const auto scene = compose_scene(req, {115, 115}, 1);
  EXPECT_EQ(scene.spheres.size(), 1u);
  EXPECT_EQ(scene.placement_failures, 1);
}

TEST(PlanForCoverage, RejectsExcessCoverage) {
  AgglomerateSpec spec{1, 1, {30, 1.2}, 0.0, AttachMode::compact};
  EXPECT_THROW(plan_for_coverage({spec}, {1.0}, 0.6, {256, 256}), Error);
  const auto plan = plan_for_coverage({spec}, {1.0}, 0.5, {1000, 1000});
  // 0.5 * 1e6 / (pi/4 * 900 * exp(2 ln^2 1.2))
  EXPECT_NEAR(plan[0].count, 0.5e6 / (std::numbers::pi / 4 * 900 * std::exp(2 * std::pow(std::log(1.2), 2))), 1.0);
}
