#include <gtest/gtest.h>

#include <cmath>

#include "crowdsynth/random.hpp"
#include "crowdsynth/scene.hpp"

using namespace crowdsynth;

namespace {

Homography perspective() {
  return Homography::from_row_major({0.04, 0.002, 1.0, -0.001, 0.05, 2.0, 1e-4, 2e-4, 1.0});
}

// Centroid of the pixels differing from the background.
Vec2 foreground_centroid(const GrayImage& img, std::uint8_t background) {
  double sx = 0, sy = 0, n = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      if (img.at(x, y) != background) {
        sx += x;
        sy += y;
        n += 1;
      }
  return n > 0 ? Vec2{sx / n, sy / n} : Vec2{std::nan(""), std::nan("")};
}

}  // namespace

TEST(Homography, ScaleExamples) {
  const auto h = Homography::scale(0.05);
  const Vec2 w = h.apply({100, 40});
  EXPECT_DOUBLE_EQ(w.x, 5.0);
  EXPECT_DOUBLE_EQ(w.y, 2.0);
  const Vec2 p = h.inverse().apply({5, 2});
  EXPECT_NEAR(p.x, 100.0, 1e-12);
  EXPECT_NEAR(p.y, 40.0, 1e-12);
  EXPECT_EQ(project({0, 0}, h), (Vec2{0, 0}));
}

TEST(Homography, NormalisedByLastEntry) {
  const auto a = Homography::from_row_major({2, 0, 4, 0, 2, 6, 0, 0, 2});
  EXPECT_DOUBLE_EQ(a.matrix()[2][2], 1.0);
  const Vec2 w = a.apply({1, 1});
  EXPECT_DOUBLE_EQ(w.x, 3.0);
  EXPECT_DOUBLE_EQ(w.y, 4.0);
}

TEST(Homography, RejectsDegenerate) {
  EXPECT_THROW(Homography::from_row_major({1, 2, 3}), InvalidInput);
  EXPECT_THROW(Homography::from_row_major({1, 2, 0, 2, 4, 0, 0, 0, 1}), InvalidInput);
  EXPECT_THROW(Homography::from_row_major({1, 0, 0, 0, 1, 0, 0, 0, 0}), InvalidInput);
}

TEST(Homography, LineAtInfinity) {
  const auto h = Homography::from_row_major({1, 0, 0, 0, 1, 0, 1, 0, 1});
  EXPECT_THROW(h.apply({-1, 5}), ProjectionError);
  try {
    project_paths({{{{0, 0}, {-1, 3}}, 1}}, h);
    FAIL();
  } catch (const ProjectionError& e) {
    EXPECT_NE(std::string(e.what()).find("path 0 node 1"), std::string::npos);
  }
}

TEST(Homography, PerspectiveRoundTrip) {
  const auto h = perspective();
  const auto inv = h.inverse();
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const Vec2 p{rng.uniform(0, 640), rng.uniform(0, 480)};
    const Vec2 back = inv.apply(h.apply(p));
    EXPECT_NEAR(back.x, p.x, 1e-9);
    EXPECT_NEAR(back.y, p.y, 1e-9);
  }
}

TEST(ProjectPaths, KeepsShapeAndSupport) {
  const std::vector<GlobalPath> paths{{{{0, 0}, {20, 0}, {20, 40}}, 2.5}};
  const auto w = project_paths(paths, Homography::scale(0.1));
  ASSERT_EQ(w.size(), 1u);
  EXPECT_DOUBLE_EQ(w[0].support, 2.5);
  EXPECT_EQ(w[0].nodes[2], (Vec2{2, 4}));
}

TEST(PixelRadius, FromScale) {
  EXPECT_NEAR(pixel_radius_at({3, 3}, 0.3, Homography::scale(0.05).inverse()), 6.0, 1e-9);
}

TEST(Render, FrameCountAndBackground) {
  RenderSpec spec;
  spec.width = 40;
  spec.height = 30;
  spec.fps = 25;
  const auto seq = render({}, Homography::scale(0.05), spec, 0.04, 2.0);
  ASSERT_EQ(seq.size(), 50u);
  EXPECT_DOUBLE_EQ(seq.fps, 25.0);
  for (const auto& f : seq.frames) {
    EXPECT_EQ(f.width, 40);
    EXPECT_EQ(f.height, 30);
    for (auto px : f.data) EXPECT_EQ(px, spec.background);
  }
  EXPECT_EQ(render({}, Homography::scale(0.05), spec, 0.04, 0.0).size(), 0u);
  spec.width = 0;
  EXPECT_THROW(render({}, Homography::scale(0.05), spec, 0.04, 1.0), InvalidInput);
}

TEST(Render, AgentDrawnWithRimAtProjectedPosition) {
  RenderSpec spec;
  spec.width = 60;
  spec.height = 60;
  spec.agent_draw_radius = 6;
  const auto seq = render({{0, 1, {1.5, 1.0}, {0, 0}}}, Homography::scale(0.05), spec, 0.04, 0.04);
  ASSERT_EQ(seq.size(), 1u);
  const auto& f = seq.frames[0];
  EXPECT_EQ(f.at(30, 20), spec.agent_color);
  EXPECT_EQ(f.at(35, 20), spec.rim_color);
  EXPECT_EQ(f.at(45, 20), spec.background);
  const Vec2 c = foreground_centroid(f, spec.background);
  EXPECT_NEAR(c.x, 30, 0.25);
  EXPECT_NEAR(c.y, 20, 0.25);
}

TEST(Render, CentroidMovesTwoPixelsPerFrame) {
  // 0.1 m per 0.04 s step at 0.05 m/px is 2 px per frame at 25 fps
  std::vector<TrajectoryRow> rows;
  for (long long s = 0; s <= 40; ++s) rows.push_back({s, 0, {0.5 + 0.1 * s, 1.5}, {2.5, 0}});
  RenderSpec spec;
  spec.width = 120;
  spec.height = 60;
  spec.fps = 25;
  const auto seq = render(rows, Homography::scale(0.05), spec, 0.04, 1.2);
  for (std::size_t f = 1; f < seq.size(); ++f) {
    const Vec2 d = foreground_centroid(seq.frames[f], spec.background) -
                   foreground_centroid(seq.frames[f - 1], spec.background);
    EXPECT_NEAR(d.x, 2.0, 0.25) << "frame " << f;
    EXPECT_NEAR(d.y, 0.0, 0.25) << "frame " << f;
  }
}

TEST(Render, InterpolatesBetweenSteps) {
  // steps every 0.1 s, frames every 0.04 s
  const std::vector<TrajectoryRow> rows{{0, 3, {1.0, 1.0}, {}}, {1, 3, {1.5, 1.0}, {}}};
  RenderSpec spec;
  spec.width = 80;
  spec.height = 40;
  spec.fps = 25;
  const auto seq = render(rows, Homography::scale(0.05), spec, 0.1, 0.12);
  ASSERT_EQ(seq.size(), 3u);
  EXPECT_NEAR(foreground_centroid(seq.frames[1], spec.background).x, 24.0, 0.25);
  EXPECT_NEAR(foreground_centroid(seq.frames[2], spec.background).x, 28.0, 0.25);
}

TEST(Render, ThreadCountDoesNotMatter) {
  std::vector<TrajectoryRow> rows;
  Rng rng(3);
  for (long long id = 0; id < 10; ++id)
    for (long long s = 0; s < 30; ++s) rows.push_back({s, id, {rng.uniform(0, 4), rng.uniform(0, 3)}, {}});
  RenderSpec spec;
  spec.width = 80;
  spec.height = 60;
  const auto a = render(rows, Homography::scale(0.05), spec, 0.1, 2.0, 1);
  const auto b = render(rows, Homography::scale(0.05), spec, 0.1, 2.0, 4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t f = 0; f < a.size(); ++f) EXPECT_EQ(a.frames[f].data, b.frames[f].data);
}
