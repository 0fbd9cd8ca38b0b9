#pragma once

// Sparse inter-frame motion extraction: Shi-Tomasi corners tracked with
// pyramidal Lucas-Kanade, plus the motion-vector CSV format.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "crowdsynth/core.hpp"
#include "crowdsynth/csv.hpp"
#include "crowdsynth/image.hpp"
#include "crowdsynth/parallel.hpp"

namespace crowdsynth {

struct PolarForm {
  double theta = 0.0;  // radians, [0, 2π)
  double l = 0.0;      // magnitude
};

/// Polar form of a displacement. The zero vector maps to theta = 0.
inline PolarForm polar_of(double u, double v) {
  const double l = std::hypot(u, v);
  if (l == 0.0) return {0.0, 0.0};
  return {wrap_angle(std::atan2(v, u)), l};
}

/// One inter-frame displacement sample. theta and l are always derived from (u, v).
struct MotionVector {
  double x = 0.0;
  double y = 0.0;
  double u = 0.0;
  double v = 0.0;
  double theta = 0.0;
  double l = 0.0;
  int t = 1;

  static MotionVector make(double x, double y, double u, double v, int t) {
    const PolarForm p = polar_of(u, v);
    return {x, y, u, v, p.theta, p.l, t};
  }

  bool operator==(const MotionVector&) const = default;
};

struct FlowParams {
  int max_corners = 500;
  double quality = 0.01;
  double min_distance = 4.0;
  int block_size = 3;
  int window = 15;
  int pyramid_levels = 3;
  int max_iterations = 30;
  double epsilon = 0.01;
  double min_eigen = 0.5;      // per-pixel minimum eigenvalue of the gradient matrix
  double max_residual = 20.0;  // mean absolute intensity error after convergence
  int stride = 1;              // keyframe stride
  double min_magnitude = 0.5;  // vectors shorter than this (px/frame) are tracker noise
  // Features closer than this to the image edge are not tracked; where a
  // moving edge meets the frame border it forms a corner that slides along
  // the border. Negative means half the tracking window.
  int border = -1;

  int border_margin() const { return border >= 0 ? border : window / 2; }

  void validate() const {
    if (max_corners < 1) throw InvalidInput("flow.max_corners must be >= 1");
    if (!(quality > 0.0 && quality <= 1.0)) throw InvalidInput("flow.quality must be in (0, 1]");
    if (min_distance < 0.0) throw InvalidInput("flow.min_distance must be >= 0");
    if (window < 3 || window % 2 == 0) throw InvalidInput("flow.window must be odd and >= 3");
    if (pyramid_levels < 1) throw InvalidInput("flow.pyramid_levels must be >= 1");
    if (block_size < 1 || block_size % 2 == 0) throw InvalidInput("flow.block_size must be odd and >= 1");
    if (stride < 1) throw InvalidInput("flow.stride must be >= 1");
    if (min_magnitude < 0.0) throw InvalidInput("flow.min_magnitude must be >= 0");
  }
};

namespace detail {

/// Float image with replicate-border sampling.
struct FloatImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  FloatImage() = default;
  FloatImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h, 0.0f) {}
  explicit FloatImage(const GrayImage& g) : width(g.width), height(g.height), data(g.data.begin(), g.data.end()) {}

  float at(int x, int y) const {
    x = std::clamp(x, 0, width - 1);
    y = std::clamp(y, 0, height - 1);
    return data[static_cast<std::size_t>(y) * width + x];
  }
  float& ref(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }

  double bilinear(double x, double y) const {
    const double fx = std::floor(x);
    const double fy = std::floor(y);
    const int x0 = static_cast<int>(fx);
    const int y0 = static_cast<int>(fy);
    const double ax = x - fx;
    const double ay = y - fy;
    return (1 - ay) * ((1 - ax) * at(x0, y0) + ax * at(x0 + 1, y0)) +
           ay * ((1 - ax) * at(x0, y0 + 1) + ax * at(x0 + 1, y0 + 1));
  }
};

/// 3x3 Sobel derivatives normalised to intensity units per pixel.
inline void sobel(const FloatImage& img, FloatImage& gx, FloatImage& gy) {
  gx = FloatImage(img.width, img.height);
  gy = FloatImage(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const float a = img.at(x - 1, y - 1), b = img.at(x, y - 1), c = img.at(x + 1, y - 1);
      const float d = img.at(x - 1, y), f = img.at(x + 1, y);
      const float g = img.at(x - 1, y + 1), h = img.at(x, y + 1), i = img.at(x + 1, y + 1);
      gx.ref(x, y) = ((c + 2 * f + i) - (a + 2 * d + g)) / 8.0f;
      gy.ref(x, y) = ((g + 2 * h + i) - (a + 2 * b + c)) / 8.0f;
    }
  }
}

inline double min_eigenvalue(double a, double b, double c) {
  // eigenvalues of [[a b][b c]]
  const double half_trace = 0.5 * (a + c);
  const double diff = 0.5 * (a - c);
  return half_trace - std::sqrt(diff * diff + b * b);
}

/// Shi-Tomasi response: minimum eigenvalue of the block-summed structure tensor.
inline std::vector<double> corner_response(const GrayImage& frame, int block_size) {
  const FloatImage img(frame);
  FloatImage gx, gy;
  sobel(img, gx, gy);
  const int r = block_size / 2;
  std::vector<double> resp(static_cast<std::size_t>(frame.width) * frame.height, 0.0);
  for (int y = 0; y < frame.height; ++y) {
    for (int x = 0; x < frame.width; ++x) {
      double sxx = 0, sxy = 0, syy = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const double ix = gx.at(x + dx, y + dy);
          const double iy = gy.at(x + dx, y + dy);
          sxx += ix * ix;
          sxy += ix * iy;
          syy += iy * iy;
        }
      }
      resp[static_cast<std::size_t>(y) * frame.width + x] = std::max(0.0, min_eigenvalue(sxx, sxy, syy));
    }
  }
  return resp;
}

inline FloatImage pyr_down(const FloatImage& src) {
  static constexpr float k[5] = {1.f / 16, 4.f / 16, 6.f / 16, 4.f / 16, 1.f / 16};
  FloatImage tmp(src.width, src.height);
  for (int y = 0; y < src.height; ++y) {
    for (int x = 0; x < src.width; ++x) {
      float s = 0;
      for (int i = -2; i <= 2; ++i) s += k[i + 2] * src.at(x + i, y);
      tmp.ref(x, y) = s;
    }
  }
  FloatImage out((src.width + 1) / 2, (src.height + 1) / 2);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      float s = 0;
      for (int i = -2; i <= 2; ++i) s += k[i + 2] * tmp.at(2 * x, 2 * y + i);
      out.ref(x, y) = s;
    }
  }
  return out;
}

struct Pyramid {
  std::vector<FloatImage> levels;
  std::vector<FloatImage> grad_x;
  std::vector<FloatImage> grad_y;
};

inline Pyramid build_pyramid(const GrayImage& frame, int levels, int window, bool gradients) {
  Pyramid p;
  p.levels.emplace_back(frame);
  for (int l = 1; l < levels; ++l) {
    const FloatImage& prev = p.levels.back();
    if (prev.width / 2 < window || prev.height / 2 < window) break;
    p.levels.push_back(pyr_down(prev));
  }
  if (gradients) {
    for (const auto& lvl : p.levels) {
      FloatImage gx, gy;
      sobel(lvl, gx, gy);
      p.grad_x.push_back(std::move(gx));
      p.grad_y.push_back(std::move(gy));
    }
  }
  return p;
}

}  // namespace detail

/// Up to `max_corners` Shi-Tomasi corners, strongest first, pairwise at least
/// `min_distance` apart. Points are integer pixel positions.
inline std::vector<Vec2> detect_features(const GrayImage& frame, int max_corners, double quality,
                                         double min_distance, int block_size = 3) {
  if (frame.empty()) throw InvalidInput("detect_features: empty frame");
  if (max_corners < 1) throw InvalidInput("detect_features: max_corners must be >= 1");
  if (!(quality > 0.0 && quality <= 1.0)) throw InvalidInput("detect_features: quality must be in (0, 1]");

  const auto resp = detail::corner_response(frame, block_size);
  const double peak = *std::max_element(resp.begin(), resp.end());
  if (peak <= 1e-9) return {};
  const double threshold = quality * peak;

  struct Candidate {
    double r;
    int x, y;
  };
  std::vector<Candidate> cands;
  const int w = frame.width, h = frame.height;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double r = resp[static_cast<std::size_t>(y) * w + x];
      if (r < threshold || r <= 0.0) continue;
      bool is_max = true;
      for (int dy = -1; dy <= 1 && is_max; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          const int nx = x + dx, ny = y + dy;
          if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
          if (resp[static_cast<std::size_t>(ny) * w + nx] > r) {
            is_max = false;
            break;
          }
        }
      }
      if (is_max) cands.push_back({r, x, y});
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.r > b.r; });

  // Greedy suppression on a coarse bucket grid.
  const double cell = std::max(1.0, min_distance);
  const int gw = static_cast<int>(std::ceil(w / cell)) + 1;
  const int gh = static_cast<int>(std::ceil(h / cell)) + 1;
  std::vector<std::vector<Vec2>> buckets(static_cast<std::size_t>(gw) * gh);
  const double md2 = min_distance * min_distance;
  std::vector<Vec2> out;
  for (const auto& c : cands) {
    const Vec2 p{static_cast<double>(c.x), static_cast<double>(c.y)};
    const int bx = static_cast<int>(c.x / cell), by = static_cast<int>(c.y / cell);
    bool ok = true;
    for (int yy = std::max(0, by - 1); yy <= std::min(gh - 1, by + 1) && ok; ++yy) {
      for (int xx = std::max(0, bx - 1); xx <= std::min(gw - 1, bx + 1) && ok; ++xx) {
        for (const auto& q : buckets[static_cast<std::size_t>(yy) * gw + xx]) {
          if (abs_sq(p - q) < md2) {
            ok = false;
            break;
          }
        }
      }
    }
    if (!ok) continue;
    out.push_back(p);
    buckets[static_cast<std::size_t>(by) * gw + bx].push_back(p);
    if (static_cast<int>(out.size()) >= max_corners) break;
  }
  return out;
}

/// Tracks `points` from `prev` into `next` with pyramidal Lucas-Kanade.
/// Untrackable points (flat neighbourhood, high residual, leaving the frame)
/// are dropped. Every emitted vector carries frame index `t`.
inline std::vector<MotionVector> track_flow(const GrayImage& prev, const GrayImage& next,
                                            const std::vector<Vec2>& points, int window, int pyramid_levels,
                                            int t = 1, const FlowParams& params = {}) {
  if (prev.width != next.width || prev.height != next.height) {
    throw InvalidInput("track_flow: frame dimensions differ");
  }
  if (window < 3 || window % 2 == 0) throw InvalidInput("track_flow: window must be odd and >= 3");
  if (pyramid_levels < 1) throw InvalidInput("track_flow: pyramid_levels must be >= 1");
  if (prev.empty() || points.empty()) return {};

  const auto pa = detail::build_pyramid(prev, pyramid_levels, window, true);
  const auto pb = detail::build_pyramid(next, static_cast<int>(pa.levels.size()), window, false);
  const int levels = static_cast<int>(std::min(pa.levels.size(), pb.levels.size()));
  const int r = window / 2;
  const double n_px = static_cast<double>(window) * window;

  std::vector<MotionVector> out;
  out.reserve(points.size());
  std::vector<double> patch(static_cast<std::size_t>(window) * window);
  std::vector<double> pix(patch.size()), piy(patch.size());

  for (const Vec2& p : points) {
    if (p.x < 0 || p.y < 0 || p.x > prev.width - 1 || p.y > prev.height - 1) continue;
    Vec2 guess{};
    bool lost = false;
    for (int lvl = levels - 1; lvl >= 0 && !lost; --lvl) {
      const double scale = std::ldexp(1.0, -lvl);
      const Vec2 pl = p * scale;
      const auto& ia = pa.levels[lvl];
      const auto& ib = pb.levels[lvl];
      double gxx = 0, gxy = 0, gyy = 0;
      std::size_t k = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx, ++k) {
          const double sx = pl.x + dx, sy = pl.y + dy;
          patch[k] = ia.bilinear(sx, sy);
          pix[k] = pa.grad_x[lvl].bilinear(sx, sy);
          piy[k] = pa.grad_y[lvl].bilinear(sx, sy);
          gxx += pix[k] * pix[k];
          gxy += pix[k] * piy[k];
          gyy += piy[k] * piy[k];
        }
      }
      const double min_eig = detail::min_eigenvalue(gxx, gxy, gyy) / n_px;
      const double d = gxx * gyy - gxy * gxy;
      if (min_eig < params.min_eigen || std::fabs(d) < 1e-12) {
        // Only the finest level decides trackability; coarse levels just pass the guess down.
        if (lvl == 0) {
          lost = true;
          break;
        }
        guess = guess * 2.0;
        continue;
      }
      Vec2 nu{};
      for (int it = 0; it < params.max_iterations; ++it) {
        const Vec2 q = pl + guess + nu;
        if (q.x < -r || q.y < -r || q.x > ib.width - 1 + r || q.y > ib.height - 1 + r) {
          lost = true;
          break;
        }
        double bx = 0, by = 0;
        k = 0;
        for (int dy = -r; dy <= r; ++dy) {
          for (int dx = -r; dx <= r; ++dx, ++k) {
            const double diff = patch[k] - ib.bilinear(q.x + dx, q.y + dy);
            bx += diff * pix[k];
            by += diff * piy[k];
          }
        }
        const Vec2 eta{(gyy * bx - gxy * by) / d, (gxx * by - gxy * bx) / d};
        nu += eta;
        if (abs_sq(eta) < params.epsilon * params.epsilon) break;
      }
      if (lost) break;
      guess = lvl > 0 ? (guess + nu) * 2.0 : guess + nu;
    }
    if (lost) continue;
    const Vec2 q = p + guess;
    if (q.x < 0 || q.y < 0 || q.x > next.width - 1 || q.y > next.height - 1) continue;
    if (!std::isfinite(q.x) || !std::isfinite(q.y)) continue;

    double residual = 0;
    std::size_t k = 0;
    const auto& ib = pb.levels[0];
    const auto& ia = pa.levels[0];
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx, ++k) {
        residual += std::fabs(ia.bilinear(p.x + dx, p.y + dy) - ib.bilinear(q.x + dx, q.y + dy));
      }
    }
    if (residual / n_px > params.max_residual) continue;
    out.push_back(MotionVector::make(p.x, p.y, guess.x, guess.y, t));
  }
  return out;
}

/// Motion vectors for every keyframe pair of a sequence. Pairs are processed
/// independently (optionally in parallel) and merged in frame order; `t` is
/// the 1-based index of the earlier frame. Displacements are per frame, so a
/// keyframe stride s divides the tracked offset by s.
inline std::vector<MotionVector> extract_flow(const FrameSequence& seq, const FlowParams& params,
                                              unsigned jobs = 1) {
  params.validate();
  seq.validate();
  if (seq.size() < 2) throw InvalidInput("extract_flow: at least 2 frames are required");
  std::vector<std::size_t> starts;
  for (std::size_t i = 0; i + params.stride < seq.size(); i += params.stride) starts.push_back(i);
  std::vector<std::vector<MotionVector>> per_pair(starts.size());
  parallel_for(starts.size(), jobs, [&](std::size_t k) {
    const std::size_t i = starts[k];
    const auto& a = seq.frames[i];
    const auto& b = seq.frames[i + params.stride];
    auto pts = detect_features(a, params.max_corners, params.quality, params.min_distance, params.block_size);
    const double m = params.border_margin();
    std::erase_if(pts, [&](const Vec2& p) {
      return p.x < m || p.y < m || p.x > a.width - 1 - m || p.y > a.height - 1 - m;
    });
    auto vecs = track_flow(a, b, pts, params.window, params.pyramid_levels, static_cast<int>(i) + 1, params);
    std::vector<MotionVector> kept;
    kept.reserve(vecs.size());
    for (auto& mv : vecs) {
      if (params.stride > 1) mv = MotionVector::make(mv.x, mv.y, mv.u / params.stride, mv.v / params.stride, mv.t);
      if (mv.l >= params.min_magnitude && mv.l > 0.0) kept.push_back(mv);
    }
    per_pair[k] = std::move(kept);
  });
  std::vector<MotionVector> out;
  for (auto& v : per_pair) out.insert(out.end(), v.begin(), v.end());
  return out;
}

inline constexpr std::string_view kVectorHeader = "x,y,u,v,t";

inline void save_vectors(const std::vector<MotionVector>& vectors, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << kVectorHeader << '\n';
  for (const auto& m : vectors) {
    out << csv::fmt(m.x) << ',' << csv::fmt(m.y) << ',' << csv::fmt(m.u) << ',' << csv::fmt(m.v) << ',' << m.t
        << '\n';
  }
}

inline std::vector<MotionVector> load_vectors(const std::string& path) {
  std::vector<MotionVector> out;
  csv::read_file(path, kVectorHeader, [&](const auto& f, std::size_t line) {
    const double x = csv::parse_double(f[0], line, "x");
    const double y = csv::parse_double(f[1], line, "y");
    const double u = csv::parse_double(f[2], line, "u");
    const double v = csv::parse_double(f[3], line, "v");
    const long long t = csv::parse_int(f[4], line, "t");
    out.push_back(MotionVector::make(x, y, u, v, static_cast<int>(t)));
  });
  return out;
}

}  // namespace crowdsynth
