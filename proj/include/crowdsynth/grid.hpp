#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "crowdsynth/core.hpp"
#include "crowdsynth/flow.hpp"
#include "crowdsynth/image.hpp"

namespace crowdsynth {

inline constexpr int kOrientationBins = 8;

/// 1-based orientation bin of an angle: half-open sectors [kπ/4, (k+1)π/4).
inline int bin_index(double theta) {
  if (!(theta >= 0.0 && theta < kTwoPi)) {
    throw InvalidInput("bin_index: theta " + std::to_string(theta) + " outside [0, 2pi)");
  }
  const int k = static_cast<int>(std::floor(theta / (kPi / 4.0)));
  return std::min(k, kOrientationBins - 1) + 1;
}

/// Uniform partition of the image into cells_x × cells_y cells.
struct GridSpec {
  int cells_x = 40;
  int cells_y = 40;
  int image_width = 0;
  int image_height = 0;

  void validate() const {
    if (cells_x < 1 || cells_y < 1) throw InvalidInput("grid: cells_x and cells_y must be >= 1");
    if (image_width < 1 || image_height < 1) throw InvalidInput("grid: image dimensions must be positive");
  }

  double cell_width() const { return static_cast<double>(image_width) / cells_x; }
  double cell_height() const { return static_cast<double>(image_height) / cells_y; }

  bool contains(double x, double y) const {
    return x >= 0.0 && y >= 0.0 && x < image_width && y < image_height;
  }

  /// 1-based column of an x coordinate inside the image.
  int column(double x) const {
    const int i = static_cast<int>(std::floor(x * cells_x / image_width));
    return std::clamp(i, 0, cells_x - 1) + 1;
  }
  int row(double y) const {
    const int j = static_cast<int>(std::floor(y * cells_y / image_height));
    return std::clamp(j, 0, cells_y - 1) + 1;
  }

  bool operator==(const GridSpec&) const = default;
};

struct CellRecord {
  std::array<int, kOrientationBins> counts{};
  std::array<std::vector<MotionVector>, kOrientationBins> members;

  bool operator==(const CellRecord&) const = default;
};

/// Per-cell 8-bin orientation histograms with the vectors behind each bin.
class CellHistogramField {
 public:
  CellHistogramField() = default;
  explicit CellHistogramField(const GridSpec& grid)
      : grid_(grid), cells_(static_cast<std::size_t>(grid.cells_x) * grid.cells_y) {}

  const GridSpec& grid() const { return grid_; }

  /// (i, j) are 1-based column and row indices.
  const CellRecord& cell(int i, int j) const { return cells_.at(index(i, j)); }
  CellRecord& cell(int i, int j) { return cells_.at(index(i, j)); }

  const std::vector<CellRecord>& cells() const { return cells_; }

  std::size_t total_count() const {
    std::size_t n = 0;
    for (const auto& c : cells_)
      for (int k : c.counts) n += static_cast<std::size_t>(k);
    return n;
  }

  bool operator==(const CellHistogramField&) const = default;

 private:
  std::size_t index(int i, int j) const {
    if (i < 1 || j < 1 || i > grid_.cells_x || j > grid_.cells_y) {
      throw InvalidInput("cell index (" + std::to_string(i) + "," + std::to_string(j) + ") out of range");
    }
    return static_cast<std::size_t>(j - 1) * grid_.cells_x + static_cast<std::size_t>(i - 1);
  }

  GridSpec grid_;
  std::vector<CellRecord> cells_;
};

inline CellHistogramField bin_vectors(const std::vector<MotionVector>& vectors, const GridSpec& grid) {
  grid.validate();
  CellHistogramField field(grid);
  for (std::size_t n = 0; n < vectors.size(); ++n) {
    const auto& mv = vectors[n];
    if (!grid.contains(mv.x, mv.y)) {
      throw InvalidInput("bin_vectors: vector " + std::to_string(n) + " at (" + std::to_string(mv.x) + "," +
                         std::to_string(mv.y) + ") lies outside the image");
    }
    auto& c = field.cell(grid.column(mv.x), grid.row(mv.y));
    const int k = bin_index(mv.theta) - 1;
    c.counts[k] += 1;
    c.members[k].push_back(mv);
  }
  return field;
}

/// Empties every (cell, bin) holding fewer than `min_support` vectors.
inline CellHistogramField prune(const CellHistogramField& field, int min_support) {
  if (min_support < 0) throw InvalidInput("prune: min_support must be >= 0");
  CellHistogramField out = field;
  const auto& g = field.grid();
  for (int j = 1; j <= g.cells_y; ++j) {
    for (int i = 1; i <= g.cells_x; ++i) {
      auto& c = out.cell(i, j);
      for (int k = 0; k < kOrientationBins; ++k) {
        if (c.counts[k] < min_support) {
          c.counts[k] = 0;
          c.members[k].clear();
        }
      }
    }
  }
  return out;
}

/// Support threshold from a per-frame-pair rate: ceil(rate * pairs), at least 1.
inline int per_frame_support(double rate, std::size_t frame_pairs) {
  if (rate < 0.0) throw InvalidInput("per-frame support rate must be >= 0");
  return std::max(1, static_cast<int>(std::ceil(rate * static_cast<double>(frame_pairs))));
}

/// Debug overlay: for every cell, a short line along each surviving bin's
/// centre angle, coloured by orientation and scaled by the bin's share of the cell.
inline RgbImage render_cell_overlay(const CellHistogramField& field, const GrayImage* background = nullptr) {
  const auto& g = field.grid();
  RgbImage img = background ? to_rgb(*background) : RgbImage(g.image_width, g.image_height, {16, 16, 16});
  const double cw = g.cell_width(), ch = g.cell_height();
  const double reach = 0.5 * std::min(cw, ch);
  for (int j = 1; j <= g.cells_y; ++j) {
    for (int i = 1; i <= g.cells_x; ++i) {
      const auto& c = field.cell(i, j);
      int total = 0, peak = 0;
      for (int k : c.counts) {
        total += k;
        peak = std::max(peak, k);
      }
      if (total == 0) continue;
      const Vec2 centre{(i - 0.5) * cw, (j - 0.5) * ch};
      for (int k = 0; k < kOrientationBins; ++k) {
        if (c.counts[k] == 0) continue;
        const double a = (k + 0.5) * kPi / 4.0;
        const double len = reach * c.counts[k] / peak;
        draw::line(img, centre, centre + len * Vec2{std::cos(a), std::sin(a)}, draw::orientation_color(a), 1.0);
      }
    }
  }
  return img;
}

}  // namespace crowdsynth
