#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "crowdsynth/random.hpp"
#include "crowdsynth/score.hpp"
#include "test_util.hpp"

using namespace crowdsynth;

namespace {

Histogram8 unit_bin(int k) {
  Histogram8 h{};
  h[k] = 1.0;
  return h;
}

Histogram8 random_hist(Rng& rng) {
  Histogram8 h{};
  double s = 0;
  for (auto& v : h) s += (v = rng.uniform(0, 1) < 0.3 ? 0.0 : rng.uniform(0, 1));
  if (s == 0) return unit_bin(static_cast<int>(rng.below(8)));
  for (auto& v : h) v /= s;
  return h;
}

std::vector<MotionVector> random_field(std::size_t n, int w, int h, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<MotionVector> v;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.uniform(0, kTwoPi);
    v.push_back(MotionVector::make(rng.uniform(0, w), rng.uniform(0, h), 2 * std::cos(a) + 1, 2 * std::sin(a), 1));
  }
  return v;
}

std::vector<MotionVector> transform(const std::vector<MotionVector>& in, double rot, double scale) {
  std::vector<MotionVector> out;
  for (const auto& m : in) {
    const double c = std::cos(rot), s = std::sin(rot);
    out.push_back(MotionVector::make(m.x, m.y, scale * (c * m.u - s * m.v), scale * (s * m.u + c * m.v), m.t));
  }
  return out;
}

}  // namespace

TEST(WindowCount, Examples) {
  EXPECT_EQ(window_count(120, 60, 30), 3);
  EXPECT_EQ(window_count(60, 60, 30), 1);
  EXPECT_EQ(window_count(40, 60, 30), 1);
  EXPECT_EQ(window_count(130, 60, 30), 4);  // last window overhangs
  EXPECT_EQ(window_count(200, 60, 30), 6);
}

TEST(BuildHom, NineWindowsOn120Square) {
  const auto f = build_hom({}, 120, 120, 60, 30);
  EXPECT_EQ(f.windows_x, 3);
  EXPECT_EQ(f.windows_y, 3);
  EXPECT_EQ(f.size(), 9u);
  for (bool e : f.empty) EXPECT_TRUE(e);
}

TEST(BuildHom, OverlappingMembership) {
  // (45, 10) lies in windows with x origins 0 and 30, y origin 0 only
  const auto f = build_hom({MotionVector::make(45, 10, 1, 0, 1)}, 120, 120, 60, 30);
  std::vector<std::size_t> hit;
  for (std::size_t i = 0; i < f.size(); ++i)
    if (!f.empty[i]) hit.push_back(i);
  EXPECT_EQ(hit, (std::vector<std::size_t>{f.index(0, 0), f.index(1, 0)}));
  EXPECT_DOUBLE_EQ(f.histograms[f.index(1, 0)][0], 1.0);
}

TEST(BuildHom, NormalisedAndCounts) {
  const auto f = build_hom(random_field(500, 200, 150, 3), 200, 150, 60, 30);
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f.empty[i]) {
      EXPECT_EQ(f.counts[i], 0u);
      continue;
    }
    double s = 0;
    for (double v : f.histograms[i]) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
  }
}

TEST(BuildHom, RejectsBadGeometryAndSkipsOutside) {
  EXPECT_THROW(build_hom({}, 100, 100, 20, 30), InvalidInput);
  EXPECT_THROW(build_hom({}, 100, 100, 20, 0), InvalidInput);
  EXPECT_THROW(build_hom({}, 0, 100, 20, 10), InvalidInput);
  const auto f = build_hom({MotionVector::make(150, 5, 1, 0, 1)}, 100, 100, 60, 30);
  for (bool e : f.empty) EXPECT_TRUE(e);
}

TEST(Bhattacharyya, Examples) {
  EXPECT_DOUBLE_EQ(bhattacharyya(unit_bin(0), unit_bin(0)), 0.0);
  EXPECT_DOUBLE_EQ(bhattacharyya(unit_bin(0), unit_bin(3)), 1.0);
  Histogram8 half{};
  half[0] = half[1] = 0.5;
  EXPECT_NEAR(bhattacharyya(unit_bin(0), half), 0.5412, 1e-4);
  EXPECT_NEAR(bhattacharyya_coefficient(unit_bin(0), half), std::sqrt(0.5), 1e-12);
}

TEST(Bhattacharyya, RejectsUnnormalised) {
  Histogram8 h{};
  h[0] = 0.5;
  EXPECT_THROW(bhattacharyya(h, unit_bin(0)), InvalidInput);
  Histogram8 neg = unit_bin(1);
  neg[0] = -0.5;
  neg[1] = 1.5;
  EXPECT_THROW(bhattacharyya(unit_bin(0), neg), InvalidInput);
}

TEST(Bhattacharyya, MetricProperties) {
  Rng rng(7);
  for (int i = 0; i < 500; ++i) {
    const auto a = random_hist(rng), b = random_hist(rng);
    const double d = bhattacharyya(a, b);
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 1.0);
    EXPECT_DOUBLE_EQ(d, bhattacharyya(b, a));
    EXPECT_NEAR(bhattacharyya(a, a), 0.0, 1e-7);
  }
}

TEST(Score, SelfIsZeroAndSymmetric) {
  const auto a = build_hom(random_field(800, 240, 180, 1), 240, 180, 60, 30);
  const auto b = build_hom(random_field(800, 240, 180, 2), 240, 180, 60, 30);
  EXPECT_NEAR(score(a, a).score, 0.0, 1e-7);
  EXPECT_DOUBLE_EQ(score(a, b).score, score(b, a).score);
  EXPECT_GT(score(a, b).score, 0.0);
  EXPECT_LE(score(a, b).score, 1.0);
}

TEST(Score, RotationSensitiveScaleInvariant) {
  const auto base = random_field(600, 180, 180, 4);
  const auto a = build_hom(base, 180, 180, 60, 30);
  const auto scaled = build_hom(transform(base, 0.0, 3.5), 180, 180, 60, 30);
  const auto rotated = build_hom(transform(base, kPi / 2, 1.0), 180, 180, 60, 30);
  EXPECT_NEAR(score(a, scaled).score, 0.0, 1e-7);
  EXPECT_GT(score(a, rotated).score, 0.1);
}

TEST(Score, DuplicatingVectorsChangesNothing) {
  auto v = random_field(300, 120, 120, 5);
  const auto a = build_hom(v, 120, 120, 60, 30);
  const auto copy = v;
  v.insert(v.end(), copy.begin(), copy.end());
  EXPECT_NEAR(score(a, build_hom(v, 120, 120, 60, 30)).score, 0.0, 1e-7);
}

TEST(Score, EmptyWindowPolicies) {
  // a fills only the left windows, b fills everything with the same motion
  std::vector<MotionVector> left, all;
  for (int y = 5; y < 120; y += 10) {
    left.push_back(MotionVector::make(10, y, 1, 0, 1));
    for (int x = 5; x < 120; x += 10) all.push_back(MotionVector::make(x, y, 1, 0, 1));
  }
  const auto a = build_hom(left, 120, 120, 60, 30);
  const auto b = build_hom(all, 120, 120, 60, 30);
  const auto pen = score(a, b, EmptyWindowPolicy::kPenalizeOneSided);
  EXPECT_EQ(pen.windows, 9u);
  EXPECT_NEAR(pen.score, 6.0 / 9.0, 1e-12);
  const auto ign = score(a, b, EmptyWindowPolicy::kIgnoreEmpty);
  EXPECT_EQ(ign.windows, 3u);
  EXPECT_NEAR(ign.score, 0.0, 1e-12);

  const auto none = build_hom({}, 120, 120, 60, 30);
  const auto both_empty = score(none, none);
  EXPECT_EQ(both_empty.windows, 0u);
  EXPECT_DOUBLE_EQ(both_empty.score, 0.0);
}

TEST(Score, GeometryMismatch) {
  EXPECT_THROW(score(build_hom({}, 120, 120, 60, 30), build_hom({}, 121, 120, 60, 30)), InvalidInput);
  EXPECT_THROW(score(build_hom({}, 120, 120, 60, 30), build_hom({}, 120, 120, 40, 20)), InvalidInput);
}

TEST(ScoreCsv, Format) {
  const auto dir = testutil::scratch("score_csv");
  const auto a = build_hom({MotionVector::make(45, 10, 1, 0, 1)}, 120, 120, 60, 30);
  const auto b = build_hom({MotionVector::make(45, 10, 0, 1, 1)}, 120, 120, 60, 30);
  const auto r = score(a, b);
  write_score_csv(r, a, (dir / "s.csv").string());
  std::ifstream in(dir / "s.csv");
  std::stringstream ss;
  ss << in.rdbuf();
  EXPECT_EQ(ss.str(), "window_x,window_y,distance\n0,0,1\n30,0,1\nscore=1,windows=2\n");
  EXPECT_EQ(score_text(r), "score=1,windows=2\ncoefficient=0\n");
}

TEST(RenderHom, SpokeAlongDominantBin) {
  const auto f = build_hom({MotionVector::make(30, 30, 1, 0, 1)}, 60, 60, 60, 30);
  const auto img = render_hom(f);
  EXPECT_EQ(img.width, 60);
  const Rgb white{255, 255, 255};
  EXPECT_NE(img.at(40, 30), white);  // spoke towards +x, reach 13.5 px
  EXPECT_EQ(img.at(20, 30), white);
  EXPECT_EQ(img.at(30, 40), white);
  EXPECT_EQ(img.at(5, 5), white);
}

TEST(RenderHom, EmptyFieldBlank) {
  const auto img = render_hom(build_hom({}, 90, 60, 60, 30));
  const Rgb white{255, 255, 255};
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) ASSERT_EQ(img.at(x, y), white);
}
