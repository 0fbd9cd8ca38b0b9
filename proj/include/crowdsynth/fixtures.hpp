#pragma once

// Procedural test videos with known motion.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "crowdsynth/image.hpp"
#include "crowdsynth/random.hpp"

namespace crowdsynth::fixtures {

/// A disk carrying a few darker and brighter blobs so it has corners inside
/// as well as on its rim.
struct TexturedDisk {
  Vec2 center;
  double radius = 8.0;
  std::uint8_t base = 200;
  std::vector<Vec2> spot_offsets;
  std::vector<double> spot_radii;
  std::vector<std::uint8_t> spot_values;

  void draw(GrayImage& img, Vec2 at) const {
    draw::disk(img, at, radius, base);
    for (std::size_t s = 0; s < spot_offsets.size(); ++s) {
      draw::disk(img, at + spot_offsets[s], spot_radii[s], spot_values[s]);
    }
  }
};

inline TexturedDisk random_disk(Vec2 center, double radius, Rng& rng) {
  TexturedDisk d;
  d.center = center;
  d.radius = radius;
  d.base = static_cast<std::uint8_t>(rng.uniform(170, 230));
  const int spots = 4;
  for (int s = 0; s < spots; ++s) {
    const double a = rng.uniform(0.0, kTwoPi);
    const double r = rng.uniform(0.2, 0.55) * radius;
    d.spot_offsets.push_back(r * Vec2{std::cos(a), std::sin(a)});
    d.spot_radii.push_back(rng.uniform(0.18, 0.3) * radius);
    d.spot_values.push_back(static_cast<std::uint8_t>(rng.coin() ? rng.uniform(40, 90) : rng.uniform(245, 255)));
  }
  return d;
}

struct TranslatingDisks {
  FrameSequence video;
  Vec2 velocity;  // px/frame, identical for every disk
  std::vector<TexturedDisk> disks;
};

/// Non-overlapping textured disks on a dark background, all translating by
/// `velocity` each frame. Disks wrap around horizontally and vertically so the
/// scene never empties.
inline TranslatingDisks translating_disks(int width, int height, int frames, Vec2 velocity, int count,
                                          double radius, std::uint64_t seed, std::uint8_t background = 30) {
  Rng rng(seed);
  TranslatingDisks out;
  out.velocity = velocity;
  int attempts = 0;
  while (static_cast<int>(out.disks.size()) < count && attempts++ < 10000) {
    const Vec2 c{rng.uniform(0.0, width), rng.uniform(0.0, height)};
    bool clear = true;
    for (const auto& d : out.disks) {
      Vec2 delta = c - d.center;
      delta.x -= width * std::round(delta.x / width);
      delta.y -= height * std::round(delta.y / height);
      if (norm(delta) < 2.0 * radius + 6.0) clear = false;
    }
    if (clear) out.disks.push_back(random_disk(c, radius, rng));
  }
  out.video.fps = 25.0;
  for (int f = 0; f < frames; ++f) {
    GrayImage img(width, height, background);
    for (const auto& d : out.disks) {
      Vec2 p = d.center + static_cast<double>(f) * velocity;
      p.x -= width * std::floor(p.x / width);
      p.y -= height * std::floor(p.y / height);
      // draw the wrapped copies that can touch the frame
      for (int ox = -1; ox <= 1; ++ox)
        for (int oy = -1; oy <= 1; ++oy) {
          const Vec2 q = p + Vec2{static_cast<double>(ox * width), static_cast<double>(oy * height)};
          if (q.x + radius + 2 < 0 || q.y + radius + 2 < 0 || q.x - radius - 2 > width || q.y - radius - 2 > height)
            continue;
          d.draw(img, q);
        }
    }
    out.video.frames.push_back(std::move(img));
  }
  return out;
}

struct TwoStreamSpec {
  int width = 200;
  int height = 200;
  int frames = 100;
  double fps = 10.0;
  double speed = 2.0;  // px/frame
  double east_y0 = 40, east_y1 = 80;
  double west_y0 = 120, west_y1 = 160;
  int dots_per_band = 14;
  double dot_radius = 4.0;
  double noise = 6.0;  // std-dev of per-pixel sensor noise, grey levels
  std::uint64_t seed = 7;
};

/// Two opposing horizontal flows of dots: eastbound in the upper band and
/// westbound in the lower band, wrapping around the frame horizontally.
/// Gaussian sensor noise keeps the flow field from being unrealistically
/// clean (a noiseless field makes perpendicular motion score exactly 1).
inline FrameSequence two_stream(const TwoStreamSpec& spec = {}) {
  Rng rng(spec.seed);
  struct Dot {
    Vec2 p;
    double dir;
    TexturedDisk look;
  };
  std::vector<Dot> dots;
  auto place = [&](double y0, double y1, double dir) {
    int placed = 0, attempts = 0;
    const double r = spec.dot_radius;
    while (placed < spec.dots_per_band && attempts++ < 10000) {
      const Vec2 c{rng.uniform(0.0, spec.width), rng.uniform(y0 + r, y1 - r)};
      bool clear = true;
      for (const auto& d : dots) {
        Vec2 delta = c - d.p;
        delta.x -= spec.width * std::round(delta.x / spec.width);
        if (norm(delta) < 2.0 * r + 4.0) clear = false;
      }
      if (!clear) continue;
      dots.push_back({c, dir, random_disk(c, r, rng)});
      ++placed;
    }
  };
  place(spec.east_y0, spec.east_y1, 1.0);
  place(spec.west_y0, spec.west_y1, -1.0);

  FrameSequence seq;
  seq.fps = spec.fps;
  for (int f = 0; f < spec.frames; ++f) {
    GrayImage img(spec.width, spec.height, 20);
    for (const auto& d : dots) {
      double x = d.p.x + d.dir * spec.speed * f;
      x -= spec.width * std::floor(x / spec.width);
      for (int ox = -1; ox <= 1; ++ox) d.look.draw(img, {x + ox * spec.width, d.p.y});
    }
    if (spec.noise > 0.0) {
      Rng grain(derive_seed(spec.seed, {static_cast<std::uint64_t>(f)}));
      for (auto& px : img.data) {
        px = static_cast<std::uint8_t>(std::clamp(std::lround(px + grain.normal(0.0, spec.noise)), 0L, 255L));
      }
    }
    seq.frames.push_back(std::move(img));
  }
  return seq;
}

}  // namespace crowdsynth::fixtures
