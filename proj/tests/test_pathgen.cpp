#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "crowdsynth/pathgen.hpp"
#include "test_util.hpp"

using namespace crowdsynth;

namespace {

const GridSpec kGrid{10, 10, 100, 100};

DominantDirection at_cell(int i, int j, double theta, double w = 1.0) {
  return {(i - 0.5) * 10.0, (j - 0.5) * 10.0, wrap_angle(theta), w, 0};
}

GlobalPath zigzag() {
  return {{{0, 0}, {10, 2}, {20, -1}, {30, 4}, {40, 0}, {50, 3}}, 1.0};
}

double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }

}  // namespace

TEST(GrowPaths, HorizontalChainFollowsMotion) {
  const std::vector<DominantDirection> d{at_cell(1, 2, 0), at_cell(2, 2, 0), at_cell(3, 2, 0.05)};
  const auto paths = grow_paths(d, kGrid, kPi / 8);
  ASSERT_EQ(paths.size(), 1u);
  ASSERT_EQ(paths[0].nodes.size(), 3u);
  EXPECT_EQ(paths[0].nodes.front(), (Vec2{5, 15}));
  EXPECT_EQ(paths[0].nodes.back(), (Vec2{25, 15}));
  EXPECT_DOUBLE_EQ(paths[0].support, 3.0);
}

TEST(GrowPaths, WestboundChainOrderedWestward) {
  const std::vector<DominantDirection> d{at_cell(1, 2, kPi), at_cell(2, 2, kPi), at_cell(3, 2, kPi)};
  const auto paths = grow_paths(d, kGrid, kPi / 8);
  ASSERT_EQ(paths.size(), 1u);
  ASSERT_EQ(paths[0].nodes.size(), 3u);
  EXPECT_EQ(paths[0].nodes.front(), (Vec2{25, 15}));
  EXPECT_EQ(paths[0].nodes.back(), (Vec2{5, 15}));
}

TEST(GrowPaths, DiagonalChain) {
  const std::vector<DominantDirection> d{at_cell(1, 1, kPi / 4), at_cell(2, 2, kPi / 4), at_cell(3, 3, kPi / 4)};
  const auto paths = grow_paths(d, kGrid, kPi / 8);
  ASSERT_EQ(paths.size(), 1u);
  EXPECT_EQ(paths[0].nodes.size(), 3u);
}

TEST(GrowPaths, OrientationBreakSplits) {
  // the middle direction turns by 90 degrees, beyond the 2*tol fallback
  const std::vector<DominantDirection> d{at_cell(1, 2, 0), at_cell(2, 2, 0), at_cell(3, 2, kPi / 2),
                                         at_cell(4, 2, kPi / 2)};
  const auto paths = grow_paths(d, kGrid, kPi / 8);
  EXPECT_EQ(paths.size(), 1u);
  EXPECT_EQ(paths[0].nodes.size(), 2u);
}

TEST(GrowPaths, FallbackWithinTwiceTolerance) {
  const std::vector<DominantDirection> d{at_cell(1, 2, 0), at_cell(2, 2, 0.6)};
  EXPECT_EQ(grow_paths(d, kGrid, 0.4).size(), 1u);
  EXPECT_TRUE(grow_paths(d, kGrid, 0.25).empty());
}

TEST(GrowPaths, BehindOrSidewaysNotChained) {
  // neighbour directly above an eastbound direction is not ahead of it
  const std::vector<DominantDirection> d{at_cell(2, 2, 0), at_cell(2, 3, 0)};
  EXPECT_TRUE(grow_paths(d, kGrid, kPi / 8).empty());
}

TEST(GrowPaths, IsolatedAndEmpty) {
  EXPECT_TRUE(grow_paths({}, kGrid, kPi / 8).empty());
  EXPECT_TRUE(grow_paths({at_cell(5, 5, 1.0)}, kGrid, kPi / 8).empty());
  EXPECT_THROW(grow_paths({}, kGrid, -0.1), InvalidInput);
}

TEST(GrowPaths, DirectionsUsedAtMostOnce) {
  Rng rng(17);
  std::vector<DominantDirection> d;
  for (int j = 1; j <= 10; ++j)
    for (int i = 1; i <= 10; ++i)
      if (rng.uniform(0, 1) < 0.6) d.push_back(at_cell(i, j, rng.uniform(0, 0.5)));
  const auto paths = grow_paths(d, kGrid, kPi / 8);
  std::size_t nodes = 0;
  for (const auto& p : paths) {
    EXPECT_GE(p.nodes.size(), 2u);
    nodes += p.nodes.size();
    for (std::size_t k = 1; k < p.nodes.size(); ++k) {
      const Vec2 step = p.nodes[k] - p.nodes[k - 1];
      EXPECT_LE(std::fabs(step.x), 10.0 + 1e-9);
      EXPECT_LE(std::fabs(step.y), 10.0 + 1e-9);
    }
  }
  EXPECT_LE(nodes, d.size());
  EXPECT_EQ(grow_paths(d, kGrid, kPi / 8), paths);
}

TEST(Diversify, ZeroSizeIsIdentity) {
  for (auto m : {DiversifyMethod::kSquare, DiversifyMethod::kTriangle, DiversifyMethod::kCircle}) {
    DiversifyParams p{m, 0.0, 5, 0.0};
    EXPECT_EQ(diversify(zigzag(), p), zigzag());
  }
}

TEST(Diversify, SquareStaysInBox) {
  const auto base = zigzag();
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto out = diversify(base, {DiversifyMethod::kSquare, 3.0, s, 0.0});
    ASSERT_EQ(out.nodes.size(), base.nodes.size());
    for (std::size_t i = 0; i < base.nodes.size(); ++i) {
      EXPECT_LE(std::fabs(out.nodes[i].x - base.nodes[i].x), 3.0);
      EXPECT_LE(std::fabs(out.nodes[i].y - base.nodes[i].y), 3.0);
    }
  }
}

TEST(Diversify, TriangleAlongNormalWithinHalfBase) {
  const auto base = zigzag();
  const auto normals = node_normals(base.nodes);
  for (std::uint64_t s = 0; s < 200; ++s) {
    const auto out = diversify(base, {DiversifyMethod::kTriangle, 4.0, s, 0.0});
    for (std::size_t i = 0; i < base.nodes.size(); ++i) {
      const Vec2 d = out.nodes[i] - base.nodes[i];
      EXPECT_LE(norm(d), 2.0 + 1e-12);
      EXPECT_NEAR(cross(d, normals[i]), 0.0, 1e-12);
    }
  }
}

TEST(Diversify, CircleOneSidedBoundedAndCoupled) {
  const auto base = zigzag();
  const auto normals = node_normals(base.nodes);
  int left = 0;
  for (std::uint64_t s = 0; s < 400; ++s) {
    const DiversifyParams p{DiversifyMethod::kCircle, 2.0, s, 0.5};
    const auto out = diversify(base, p);
    double prev = -1.0, sign = 0.0;
    for (std::size_t i = 0; i < base.nodes.size(); ++i) {
      const double r = dot(out.nodes[i] - base.nodes[i], normals[i]);
      EXPECT_NEAR(norm(out.nodes[i] - base.nodes[i]), std::fabs(r), 1e-12);
      EXPECT_GT(std::fabs(r), 0.0);
      EXPECT_LE(std::fabs(r), 2.0 + 1e-12);
      if (i == 0) sign = r > 0 ? 1.0 : -1.0;
      EXPECT_GT(sign * r, 0.0);
      if (prev >= 0.0) EXPECT_LE(std::fabs(std::fabs(r) - prev), 0.5 + 1e-12);
      prev = std::fabs(r);
    }
    if (sign > 0) ++left;
  }
  EXPECT_GT(left, 120);
  EXPECT_LT(left, 280);
}

TEST(Diversify, DeterministicPerSeed) {
  const DiversifyParams p{DiversifyMethod::kCircle, 2.0, 99, 0.5};
  EXPECT_EQ(diversify(zigzag(), p), diversify(zigzag(), p));
}

TEST(Diversify, RejectsBadInput) {
  EXPECT_THROW(diversify(zigzag(), {DiversifyMethod::kCircle, -1.0, 1, 0.1}), InvalidInput);
  EXPECT_THROW(diversify({{{1, 1}}, 0}, {DiversifyMethod::kCircle, 1.0, 1, 0.1}), InvalidInput);
  EXPECT_THROW(parse_diversify_method("hexagon"), InvalidInput);
  EXPECT_EQ(parse_diversify_method(to_string(DiversifyMethod::kTriangle)), DiversifyMethod::kTriangle);
}

TEST(NodeNormals, StraightLine) {
  for (const auto& n : node_normals({{0, 0}, {1, 0}, {2, 0}})) {
    EXPECT_NEAR(n.x, 0.0, 1e-12);
    EXPECT_NEAR(n.y, 1.0, 1e-12);
  }
}

TEST(Smooth, TwoNodesSamplesOnSegment) {
  const auto s = smooth({{{0, 0}, {4, 0}}, 0}, 4);
  ASSERT_EQ(s.nodes.size(), 5u);
  for (int k = 0; k <= 4; ++k) {
    EXPECT_NEAR(s.nodes[k].x, k, 1e-9);
    EXPECT_NEAR(s.nodes[k].y, 0.0, 1e-12);
  }
}

TEST(Smooth, ReproducesNodesAndCount) {
  const auto base = zigzag();
  for (int sps : {1, 3, 8}) {
    const auto s = smooth(base, sps);
    ASSERT_EQ(s.nodes.size(), (base.nodes.size() - 1) * sps + 1);
    for (std::size_t i = 0; i < base.nodes.size(); ++i) EXPECT_EQ(s.nodes[i * sps], base.nodes[i]);
  }
  EXPECT_EQ(smooth(base, 1).nodes, base.nodes);
}

TEST(Smooth, CollinearStaysCollinearAndMonotone) {
  const auto s = smooth({{{0, 0}, {1, 1}, {5, 5}, {6, 6}}, 0}, 6);
  for (std::size_t k = 0; k < s.nodes.size(); ++k) {
    EXPECT_NEAR(s.nodes[k].x, s.nodes[k].y, 1e-9);
    if (k > 0) {
      EXPECT_GT(s.nodes[k].x, s.nodes[k - 1].x);
    }
  }
}

TEST(Smooth, RepeatedNodesStayFinite) {
  const auto s = smooth({{{0, 0}, {0, 0}, {3, 1}}, 0}, 4);
  for (const auto& p : s.nodes) {
    EXPECT_TRUE(std::isfinite(p.x));
    EXPECT_TRUE(std::isfinite(p.y));
  }
}

TEST(Smooth, RejectsBadInput) {
  EXPECT_THROW(smooth({{{0, 0}}, 0}, 4), InvalidInput);
  EXPECT_THROW(smooth(zigzag(), 0), InvalidInput);
}

TEST(RandomBorderPaths, EndpointsOnOppositeBorders) {
  const auto paths = random_border_paths(200, 100, 50, 4);
  ASSERT_EQ(paths.size(), 50u);
  for (const auto& p : paths) {
    ASSERT_EQ(p.nodes.size(), 5u);
    const Vec2 a = p.nodes.front(), b = p.nodes.back();
    const bool horiz = (a.x == 0 && b.x == 199) || (a.x == 199 && b.x == 0);
    const bool vert = (a.y == 0 && b.y == 99) || (a.y == 99 && b.y == 0);
    EXPECT_TRUE(horiz || vert);
    for (const auto& n : p.nodes) {
      EXPECT_GE(n.x, 0);
      EXPECT_LE(n.x, 199);
      EXPECT_GE(n.y, 0);
      EXPECT_LE(n.y, 99);
    }
  }
  EXPECT_EQ(random_border_paths(200, 100, 50, 4), paths);
}

TEST(PathsCsv, RoundTripAndSequenceCheck) {
  const auto dir = testutil::scratch("paths_csv");
  const std::vector<GlobalPath> p{zigzag(), {{{1.25, 2.5}, {3, 4}}, 0}};
  save_paths(p, (dir / "p.csv").string());
  const auto back = load_paths((dir / "p.csv").string());
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].nodes, p[0].nodes);
  EXPECT_EQ(back[1].nodes, p[1].nodes);

  {
    std::ofstream out(dir / "bad.csv");
    out << "path_id,node_index,x,y\n0,0,1,1\n0,2,2,2\n";
  }
  EXPECT_THROW(load_paths((dir / "bad.csv").string()), ParseError);
}
