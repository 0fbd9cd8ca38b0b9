#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "crowdsynth/core.hpp"

namespace crowdsynth {

/// 8-bit single-channel image, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  GrayImage() = default;
  GrayImage(int w, int h, std::uint8_t fill = 0)
      : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), fill) {
    if (w < 0 || h < 0) throw InvalidInput("image dimensions must be non-negative");
  }

  bool empty() const { return width <= 0 || height <= 0; }
  std::uint8_t at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  bool operator==(const GrayImage&) const = default;
};

using Rgb = std::array<std::uint8_t, 3>;

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;  // interleaved RGB

  RgbImage() = default;
  RgbImage(int w, int h, Rgb fill = {0, 0, 0})
      : width(w), height(h), data(static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3) {
    for (std::size_t i = 0; i < data.size(); i += 3) {
      data[i] = fill[0];
      data[i + 1] = fill[1];
      data[i + 2] = fill[2];
    }
  }

  Rgb at(int x, int y) const {
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    return {data[i], data[i + 1], data[i + 2]};
  }
  void set(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= width || y >= height) return;
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    data[i] = c[0];
    data[i + 1] = c[1];
    data[i + 2] = c[2];
  }
  /// Alpha-blends `c` over the pixel with coverage a in [0,1].
  void blend(int x, int y, Rgb c, double a) {
    if (x < 0 || y < 0 || x >= width || y >= height || a <= 0.0) return;
    a = std::min(a, 1.0);
    const std::size_t i = (static_cast<std::size_t>(y) * width + x) * 3;
    for (int k = 0; k < 3; ++k) {
      data[i + k] = static_cast<std::uint8_t>(std::lround(data[i + k] * (1.0 - a) + c[k] * a));
    }
  }
  bool operator==(const RgbImage&) const = default;
};

inline RgbImage to_rgb(const GrayImage& g) {
  RgbImage out(g.width, g.height);
  for (std::size_t i = 0; i < g.data.size(); ++i) {
    out.data[3 * i] = out.data[3 * i + 1] = out.data[3 * i + 2] = g.data[i];
  }
  return out;
}

/// Ordered grayscale frames sharing one size, with their capture rate.
struct FrameSequence {
  std::vector<GrayImage> frames;
  double fps = 25.0;

  int width() const { return frames.empty() ? 0 : frames.front().width; }
  int height() const { return frames.empty() ? 0 : frames.front().height; }
  std::size_t size() const { return frames.size(); }

  void validate() const {
    if (!(fps > 0.0)) throw InvalidInput("frame sequence fps must be positive");
    for (const auto& f : frames) {
      if (f.width != width() || f.height != height()) {
        throw InvalidInput("frame sequence has frames of differing dimensions");
      }
    }
  }
};

namespace draw {

/// Filled disk with supersampled edge coverage. `value` is blended over the
/// existing pixels proportionally to the covered fraction.
inline void disk(GrayImage& img, Vec2 center, double radius, std::uint8_t value) {
  if (radius <= 0.0) return;
  constexpr int kSub = 4;
  const int x0 = std::max(0, static_cast<int>(std::floor(center.x - radius - 1)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(center.x + radius + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(center.y - radius - 1)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(center.y + radius + 1)));
  const double r2 = radius * radius;
  const double inner = std::max(0.0, radius - 0.75);
  const double outer = radius + 0.75;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      // pixel (x, y) is centred on integer coordinates, as in the flow tracker
      const double dx = x - center.x;
      const double dy = y - center.y;
      const double d = std::sqrt(dx * dx + dy * dy);
      double cover;
      if (d <= inner) {
        cover = 1.0;
      } else if (d >= outer) {
        continue;
      } else {
        int hits = 0;
        for (int sy = 0; sy < kSub; ++sy) {
          for (int sx = 0; sx < kSub; ++sx) {
            const double px = x - 0.5 + (sx + 0.5) / kSub - center.x;
            const double py = y - 0.5 + (sy + 0.5) / kSub - center.y;
            if (px * px + py * py <= r2) ++hits;
          }
        }
        cover = static_cast<double>(hits) / (kSub * kSub);
      }
      if (cover <= 0.0) continue;
      auto& p = img.at(x, y);
      p = static_cast<std::uint8_t>(std::lround(p * (1.0 - cover) + value * cover));
    }
  }
}

/// Anti-aliased line of the given thickness (pixels) using distance-to-segment coverage.
inline void line(RgbImage& img, Vec2 a, Vec2 b, Rgb color, double thickness = 1.0) {
  const double half = std::max(0.5, thickness * 0.5);
  const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - half - 1)));
  const int x1 = std::min(img.width - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + half + 1)));
  const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - half - 1)));
  const int y1 = std::min(img.height - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + half + 1)));
  const Vec2 ab = b - a;
  const double len2 = abs_sq(ab);
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const Vec2 p{static_cast<double>(x), static_cast<double>(y)};
      double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      const double d = norm(p - (a + t * ab));
      const double cover = std::clamp(half + 0.5 - d, 0.0, 1.0);
      img.blend(x, y, color, cover);
    }
  }
}

inline void arrow(RgbImage& img, Vec2 tail, Vec2 head, Rgb color, double thickness = 1.0) {
  line(img, tail, head, color, thickness);
  const Vec2 dir = normalize(head - tail);
  if (abs_sq(dir) == 0.0) return;
  const double len = std::min(6.0, 0.35 * norm(head - tail)) + thickness;
  const Vec2 side = left_normal(dir);
  line(img, head, head - len * dir + 0.5 * len * side, color, thickness);
  line(img, head, head - len * dir - 0.5 * len * side, color, thickness);
}

/// Fully saturated hue wheel colour for an orientation in radians.
inline Rgb orientation_color(double theta) {
  const double h = wrap_angle(theta) / kTwoPi * 6.0;
  const int sector = static_cast<int>(h) % 6;
  const double f = h - std::floor(h);
  const auto up = static_cast<std::uint8_t>(std::lround(255 * f));
  const auto down = static_cast<std::uint8_t>(std::lround(255 * (1 - f)));
  switch (sector) {
    case 0: return {255, up, 0};
    case 1: return {down, 255, 0};
    case 2: return {0, 255, up};
    case 3: return {0, down, 255};
    case 4: return {up, 0, 255};
    default: return {255, 0, down};
  }
}

}  // namespace draw
}  // namespace crowdsynth
