#pragma once

// Sliding-window histograms of motion and their Bhattacharyya comparison.

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "crowdsynth/core.hpp"
#include "crowdsynth/csv.hpp"
#include "crowdsynth/flow.hpp"
#include "crowdsynth/grid.hpp"
#include "crowdsynth/image.hpp"

namespace crowdsynth {

using Histogram8 = std::array<double, kOrientationBins>;

/// Number of window origins along one axis: origins 0, stride, 2·stride, ...
/// until a window reaches the far edge (the last one may overhang it).
inline int window_count(int extent, int window, int stride) {
  if (extent <= window) return 1;
  return (extent - window + stride - 1) / stride + 1;
}

struct MotionHistogramField {
  int width = 0;
  int height = 0;
  int window = 60;
  int stride = 30;
  int windows_x = 0;
  int windows_y = 0;
  std::vector<Histogram8> histograms;  // row-major over the window grid, L1-normalised
  std::vector<bool> empty;
  std::vector<std::size_t> counts;  // vectors per window before normalisation

  std::size_t size() const { return histograms.size(); }
  std::size_t index(int wx, int wy) const { return static_cast<std::size_t>(wy) * windows_x + wx; }
  bool same_geometry(const MotionHistogramField& o) const {
    return width == o.width && height == o.height && window == o.window && stride == o.stride &&
           windows_x == o.windows_x && windows_y == o.windows_y;
  }
};

inline MotionHistogramField build_hom(const std::vector<MotionVector>& vectors, int width, int height, int window,
                                      int stride) {
  if (width < 1 || height < 1) throw InvalidInput("build_hom: image dimensions must be positive");
  if (!(stride >= 1 && window >= stride)) throw InvalidInput("build_hom: need window >= stride >= 1");
  MotionHistogramField f;
  f.width = width;
  f.height = height;
  f.window = window;
  f.stride = stride;
  f.windows_x = window_count(width, window, stride);
  f.windows_y = window_count(height, window, stride);
  const std::size_t m = static_cast<std::size_t>(f.windows_x) * f.windows_y;
  f.histograms.assign(m, Histogram8{});
  f.counts.assign(m, 0);

  // windows with origin o satisfy o <= x < o + window
  auto range = [&](double c, int n) {
    const int hi = std::min(n - 1, static_cast<int>(std::floor(c / stride)));
    int lo = static_cast<int>(std::floor((c - window) / stride)) + 1;
    lo = std::max(0, lo);
    return std::pair{lo, hi};
  };
  for (const auto& mv : vectors) {
    if (!(mv.x >= 0 && mv.y >= 0 && mv.x < width && mv.y < height)) continue;
    const int k = bin_index(mv.theta) - 1;
    const auto [x0, x1] = range(mv.x, f.windows_x);
    const auto [y0, y1] = range(mv.y, f.windows_y);
    for (int wy = y0; wy <= y1; ++wy) {
      for (int wx = x0; wx <= x1; ++wx) {
        f.histograms[f.index(wx, wy)][k] += 1.0;
        f.counts[f.index(wx, wy)] += 1;
      }
    }
  }
  f.empty.assign(m, true);
  for (std::size_t i = 0; i < m; ++i) {
    if (f.counts[i] == 0) continue;
    f.empty[i] = false;
    for (auto& h : f.histograms[i]) h /= static_cast<double>(f.counts[i]);
  }
  return f;
}

namespace detail {
inline void require_normalized(const Histogram8& h, const char* name) {
  double s = 0.0;
  for (double v : h) {
    if (v < 0.0) throw InvalidInput(std::string("bhattacharyya: ") + name + " has a negative bin");
    s += v;
  }
  if (std::fabs(s - 1.0) > 1e-6) throw InvalidInput(std::string("bhattacharyya: ") + name + " is not normalised");
}
}  // namespace detail

/// Bhattacharyya coefficient Σ sqrt(h1·h2); 1 for identical histograms.
inline double bhattacharyya_coefficient(const Histogram8& h1, const Histogram8& h2) {
  detail::require_normalized(h1, "h1");
  detail::require_normalized(h2, "h2");
  double bc = 0.0;
  for (int k = 0; k < kOrientationBins; ++k) bc += std::sqrt(h1[k] * h2[k]);
  return bc;
}

/// Distance sqrt(1 - coefficient) in [0, 1]; 0 is a perfect match.
inline double bhattacharyya(const Histogram8& h1, const Histogram8& h2) {
  const double bc = std::clamp(bhattacharyya_coefficient(h1, h2), 0.0, 1.0);
  return std::sqrt(1.0 - bc);
}

enum class EmptyWindowPolicy {
  kPenalizeOneSided,  // empty in one field only -> distance 1
  kIgnoreEmpty,       // any empty side -> window skipped
};

struct WindowDistance {
  int wx = 0;
  int wy = 0;
  double distance = 0.0;
  double coefficient = 0.0;
};

struct ScoreReport {
  double score = 0.0;        // mean distance, lower is more similar
  double coefficient = 0.0;  // mean raw coefficient over the same windows
  std::size_t windows = 0;   // m: number of compared windows
  std::vector<WindowDistance> per_window;
};

/// Mean window-wise Bhattacharyya distance. Windows empty in both fields are
/// not compared; with no comparable window the score is 0 and m = 0.
inline ScoreReport score(const MotionHistogramField& a, const MotionHistogramField& b,
                         EmptyWindowPolicy policy = EmptyWindowPolicy::kPenalizeOneSided) {
  if (!a.same_geometry(b)) throw InvalidInput("score: histogram fields have different geometry");
  ScoreReport r;
  double sum_d = 0.0, sum_c = 0.0;
  for (int wy = 0; wy < a.windows_y; ++wy) {
    for (int wx = 0; wx < a.windows_x; ++wx) {
      const std::size_t i = a.index(wx, wy);
      const bool ea = a.empty[i], eb = b.empty[i];
      if (ea && eb) continue;
      WindowDistance w{wx, wy, 1.0, 0.0};
      if (ea || eb) {
        if (policy == EmptyWindowPolicy::kIgnoreEmpty) continue;
      } else {
        w.coefficient = std::clamp(bhattacharyya_coefficient(a.histograms[i], b.histograms[i]), 0.0, 1.0);
        w.distance = std::sqrt(1.0 - w.coefficient);
      }
      sum_d += w.distance;
      sum_c += w.coefficient;
      r.per_window.push_back(w);
    }
  }
  r.windows = r.per_window.size();
  if (r.windows > 0) {
    r.score = sum_d / static_cast<double>(r.windows);
    r.coefficient = sum_c / static_cast<double>(r.windows);
  }
  return r;
}

inline void write_score_csv(const ScoreReport& r, const MotionHistogramField& geometry, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "window_x,window_y,distance\n";
  for (const auto& w : r.per_window) {
    out << w.wx * geometry.stride << ',' << w.wy * geometry.stride << ',' << csv::fmt(w.distance) << '\n';
  }
  out << "score=" << csv::fmt(r.score) << ",windows=" << r.windows << '\n';
}

inline std::string score_text(const ScoreReport& r) {
  std::ostringstream os;
  os << "score=" << csv::fmt(r.score) << ",windows=" << r.windows << '\n'
     << "coefficient=" << csv::fmt(r.coefficient) << '\n';
  return os.str();
}

/// One 8-spoke rose per non-empty window, spoke k along k·π/4 with length
/// proportional to the bin's mass.
inline RgbImage render_hom(const MotionHistogramField& f, Rgb background = {255, 255, 255}) {
  RgbImage img(f.width, f.height, background);
  const double reach = 0.5 * f.stride * 0.9;
  for (int wy = 0; wy < f.windows_y; ++wy) {
    for (int wx = 0; wx < f.windows_x; ++wx) {
      const std::size_t i = f.index(wx, wy);
      if (f.empty[i]) continue;
      const Vec2 c{wx * f.stride + 0.5 * f.window, wy * f.stride + 0.5 * f.window};
      for (int k = 0; k < kOrientationBins; ++k) {
        const double mass = f.histograms[i][k];
        if (mass <= 0.0) continue;
        const double a = k * kPi / 4.0;
        draw::line(img, c, c + reach * mass * Vec2{std::cos(a), std::sin(a)}, draw::orientation_color(a), 1.0);
      }
    }
  }
  return img;
}

}  // namespace crowdsynth
