#pragma once

// Image <-> ground-plane mapping and rendering of simulated agents back into
// an image sequence.

#include <array>
#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "crowdsynth/core.hpp"
#include "crowdsynth/image.hpp"
#include "crowdsynth/pathgen.hpp"
#include "crowdsynth/sim.hpp"

namespace crowdsynth {

/// Projective map from image pixels to world metres, h[2][2] normalised to 1.
class Homography {
 public:
  using Matrix = std::array<std::array<double, 3>, 3>;

  Homography() : h_{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}} {}

  explicit Homography(const Matrix& m) : h_(m) {
    if (std::fabs(h_[2][2]) < 1e-15) throw InvalidInput("homography: h[2][2] must be nonzero");
    const double s = h_[2][2];
    for (auto& row : h_)
      for (auto& v : row) v /= s;
    if (std::fabs(determinant()) <= 1e-12) throw InvalidInput("homography is singular");
  }

  /// Row-major 9 numbers.
  static Homography from_row_major(const std::vector<double>& v) {
    if (v.size() != 9) throw InvalidInput("homography needs 9 numbers");
    return Homography(Matrix{{{v[0], v[1], v[2]}, {v[3], v[4], v[5]}, {v[6], v[7], v[8]}}});
  }

  /// Uniform metres-per-pixel scale.
  static Homography scale(double metres_per_pixel) {
    return Homography(Matrix{{{metres_per_pixel, 0, 0}, {0, metres_per_pixel, 0}, {0, 0, 1}}});
  }

  const Matrix& matrix() const { return h_; }

  double determinant() const {
    const auto& m = h_;
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  }

  Homography inverse() const {
    const auto& m = h_;
    const double d = determinant();
    Matrix inv{};
    inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) / d;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) / d;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) / d;
    inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) / d;
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) / d;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) / d;
    inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) / d;
    inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) / d;
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) / d;
    return Homography(inv);
  }

  Vec2 apply(Vec2 p) const {
    const auto& m = h_;
    const double w = m[2][0] * p.x + m[2][1] * p.y + m[2][2];
    if (std::fabs(w) < 1e-12) throw ProjectionError("point maps to the line at infinity");
    return {(m[0][0] * p.x + m[0][1] * p.y + m[0][2]) / w, (m[1][0] * p.x + m[1][1] * p.y + m[1][2]) / w};
  }

 private:
  Matrix h_;
};

/// Image pixel to world ground plane.
inline Vec2 project(Vec2 pixel, const Homography& h) { return h.apply(pixel); }

inline std::vector<GlobalPath> project_paths(const std::vector<GlobalPath>& paths, const Homography& h) {
  std::vector<GlobalPath> out;
  out.reserve(paths.size());
  for (std::size_t p = 0; p < paths.size(); ++p) {
    GlobalPath g;
    g.support = paths[p].support;
    for (std::size_t k = 0; k < paths[p].nodes.size(); ++k) {
      try {
        g.nodes.push_back(project(paths[p].nodes[k], h));
      } catch (const ProjectionError& e) {
        throw ProjectionError("path " + std::to_string(p) + " node " + std::to_string(k) + ": " + e.what());
      }
    }
    out.push_back(std::move(g));
  }
  return out;
}

struct RenderSpec {
  int width = 0;
  int height = 0;
  double fps = 25.0;
  std::uint8_t agent_color = 230;
  std::uint8_t rim_color = 70;
  std::uint8_t background = 20;
  double agent_draw_radius = 5.0;  // pixels; <= 0 derives it from the homography
  double agent_radius_m = 0.3;     // used when deriving the pixel radius
  bool rgb = false;

  void validate() const {
    if (width <= 0 || height <= 0) throw InvalidInput("render: width and height must be positive");
    if (!(fps > 0.0)) throw InvalidInput("render: fps must be positive");
  }
};

/// Pixel radius of a world-space disk at `world`, from the local scale of the
/// inverse homography.
inline double pixel_radius_at(Vec2 world, double radius_m, const Homography& world_to_image) {
  const Vec2 c = world_to_image.apply(world);
  const Vec2 dx = world_to_image.apply(world + Vec2{radius_m, 0.0}) - c;
  const Vec2 dy = world_to_image.apply(world + Vec2{0.0, radius_m}) - c;
  return 0.5 * (norm(dx) + norm(dy));
}

/// Draws one agent: a bright disk with a darker rim so it carries trackable corners.
inline void draw_agent(GrayImage& img, Vec2 centre, double radius, const RenderSpec& spec) {
  draw::disk(img, centre, radius, spec.rim_color);
  draw::disk(img, centre, std::max(0.5, radius - std::max(1.0, 0.3 * radius)), spec.agent_color);
}

/// Renders trajectories (world metres, one row per agent per step of length
/// dt) into ceil(duration · fps) frames. Agent positions are linearly
/// interpolated between the steps bracketing each frame time.
inline FrameSequence render(const std::vector<TrajectoryRow>& rows, const Homography& image_to_world,
                            const RenderSpec& spec, double dt, double duration, unsigned jobs = 1) {
  spec.validate();
  if (!(dt > 0.0)) throw InvalidInput("render: dt must be positive");
  if (duration < 0.0) throw InvalidInput("render: duration must be >= 0");
  const Homography to_image = image_to_world.inverse();

  std::map<long long, std::map<long long, Vec2>> tracks;  // agent -> step -> position
  for (const auto& r : rows) tracks[r.agent_id][r.step] = r.position;

  const auto frames = static_cast<std::size_t>(std::ceil(duration * spec.fps - 1e-9));
  FrameSequence seq;
  seq.fps = spec.fps;
  seq.frames.assign(frames, GrayImage(spec.width, spec.height, spec.background));

  parallel_for(frames, jobs, [&](std::size_t f) {
    const double t = static_cast<double>(f) / spec.fps;
    const double s = t / dt;
    const auto s0 = static_cast<long long>(std::floor(s + 1e-9));
    const double frac = std::max(0.0, s - static_cast<double>(s0));
    GrayImage& img = seq.frames[f];
    for (const auto& [id, track] : tracks) {
      auto a = track.find(s0);
      if (a == track.end()) continue;
      Vec2 pos = a->second;
      if (frac > 1e-9) {
        auto b = track.find(s0 + 1);
        if (b == track.end()) continue;
        pos = (1.0 - frac) * a->second + frac * b->second;
      }
      Vec2 pix;
      try {
        pix = to_image.apply(pos);
      } catch (const ProjectionError&) {
        continue;
      }
      const double radius =
          spec.agent_draw_radius > 0.0 ? spec.agent_draw_radius : pixel_radius_at(pos, spec.agent_radius_m, to_image);
      draw_agent(img, pix, radius, spec);
    }
  });
  return seq;
}

}  // namespace crowdsynth
