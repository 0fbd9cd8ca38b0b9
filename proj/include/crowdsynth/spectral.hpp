#pragma once

// Self-tuning spectral clustering of the motion vectors in each surviving
// (cell, bin) group, producing spatially local dominant directions.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "crowdsynth/core.hpp"
#include "crowdsynth/csv.hpp"
#include "crowdsynth/grid.hpp"
#include "crowdsynth/parallel.hpp"
#include "crowdsynth/random.hpp"

namespace crowdsynth {

inline constexpr double kMinLocalScale = 1e-6;

/// Distance from each point to its k-th nearest other point (the farthest
/// other point when fewer than k exist), floored at 1e-6.
inline std::vector<double> local_scales(const std::vector<Vec2>& points, int k) {
  if (points.empty()) throw InvalidInput("local_scales: no points");
  if (k < 1) throw InvalidInput("local_scales: k must be >= 1");
  const std::size_t n = points.size();
  std::vector<double> scales(n, kMinLocalScale);
  std::vector<double> d;
  d.reserve(n);
  for (std::size_t m = 0; m < n; ++m) {
    d.clear();
    for (std::size_t o = 0; o < n; ++o) {
      if (o != m) d.push_back(norm(points[m] - points[o]));
    }
    if (d.empty()) continue;
    const std::size_t idx = std::min<std::size_t>(static_cast<std::size_t>(k), d.size()) - 1;
    std::nth_element(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(idx), d.end());
    scales[m] = std::max(kMinLocalScale, d[idx]);
  }
  return scales;
}

/// Symmetric n×n affinity with unit diagonal.
struct AffinityMatrix {
  std::size_t n = 0;
  std::vector<double> entries;

  double operator()(std::size_t r, std::size_t c) const { return entries[r * n + c]; }
};

/// A(m,n) = exp(-|p_m - p_n|^2 / (σ_m σ_n)).
inline AffinityMatrix affinity(const std::vector<Vec2>& points, const std::vector<double>& scales) {
  if (points.size() != scales.size()) throw InvalidInput("affinity: points and scales differ in length");
  for (double s : scales) {
    if (!(s > 0.0)) throw InvalidInput("affinity: scales must be positive");
  }
  const std::size_t n = points.size();
  AffinityMatrix a{n, std::vector<double>(n * n, 0.0)};
  for (std::size_t m = 0; m < n; ++m) {
    a.entries[m * n + m] = 1.0;
    for (std::size_t o = m + 1; o < n; ++o) {
      const double v = std::exp(-abs_sq(points[m] - points[o]) / (scales[m] * scales[o]));
      a.entries[m * n + o] = v;
      a.entries[o * n + m] = v;
    }
  }
  return a;
}

/// L = I - D^{-1/2} A D^{-1/2}.
inline Eigen::MatrixXd normalized_laplacian(const AffinityMatrix& a) {
  const auto n = static_cast<Eigen::Index>(a.n);
  Eigen::VectorXd inv_sqrt_deg(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    double deg = 0.0;
    for (Eigen::Index c = 0; c < n; ++c) deg += a(r, c);
    inv_sqrt_deg(r) = 1.0 / std::sqrt(deg);
  }
  Eigen::MatrixXd l(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      l(r, c) = (r == c ? 1.0 : 0.0) - inv_sqrt_deg(r) * a(r, c) * inv_sqrt_deg(c);
    }
  }
  return l;
}

struct Spectrum {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // columns, first non-negligible component positive
};

inline Spectrum sorted_spectrum(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym);
  Spectrum s{solver.eigenvalues(), solver.eigenvectors()};
  for (Eigen::Index c = 0; c < s.vectors.cols(); ++c) {
    for (Eigen::Index r = 0; r < s.vectors.rows(); ++r) {
      const double v = s.vectors(r, c);
      if (std::fabs(v) > 1e-12) {
        if (v < 0.0) s.vectors.col(c) *= -1.0;
        break;
      }
    }
  }
  return s;
}

struct ClusterOptions {
  int k_nn = 7;
  int k_max = 5;
  int restarts = 20;
  std::uint64_t seed = 1;
  /// A count k > 1 is eligible only if λ_{k-1} <= guard · (λ_k - λ_{k-1}),
  /// i.e. the gap clearly dominates the within-cluster eigenvalues. A
  /// non-positive guard gives the plain largest-eigengap rule.
  double eigengap_guard = 0.5;
};

/// Cluster count by the (guarded) largest eigengap of an ascending spectrum.
inline int choose_cluster_count(const Eigen::VectorXd& eigenvalues, int k_max, double guard) {
  const int n = static_cast<int>(eigenvalues.size());
  const int upper = std::min(k_max, n - 1);
  int best_k = 1;
  double best_gap = -std::numeric_limits<double>::infinity();
  for (int k = 1; k <= upper; ++k) {
    const double gap = eigenvalues(k) - eigenvalues(k - 1);
    if (k > 1 && guard > 0.0 && eigenvalues(k - 1) > guard * gap) continue;
    if (gap > best_gap) {
      best_gap = gap;
      best_k = k;
    }
  }
  return best_k;
}

namespace detail {

/// Lloyd's k-means with k-means++ seeding; best of `restarts` by inertia.
inline std::vector<int> kmeans(const Eigen::MatrixXd& rows, int k, int restarts, std::uint64_t seed) {
  const Eigen::Index n = rows.rows();
  std::vector<int> best_labels(static_cast<std::size_t>(n), 0);
  if (k <= 1 || n <= 1) return best_labels;
  double best_inertia = std::numeric_limits<double>::infinity();
  Rng rng(seed);
  std::vector<int> labels(static_cast<std::size_t>(n));
  for (int run = 0; run < std::max(1, restarts); ++run) {
    Eigen::MatrixXd centers(k, rows.cols());
    centers.row(0) = rows.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
    std::vector<double> d2(static_cast<std::size_t>(n));
    for (int c = 1; c < k; ++c) {
      double total = 0.0;
      for (Eigen::Index r = 0; r < n; ++r) {
        double m = std::numeric_limits<double>::infinity();
        for (int p = 0; p < c; ++p) m = std::min(m, (rows.row(r) - centers.row(p)).squaredNorm());
        d2[static_cast<std::size_t>(r)] = m;
        total += m;
      }
      Eigen::Index pick = n - 1;
      if (total > 0.0) {
        double target = rng.uniform(0.0, total);
        for (Eigen::Index r = 0; r < n; ++r) {
          target -= d2[static_cast<std::size_t>(r)];
          if (target < 0.0) {
            pick = r;
            break;
          }
        }
      } else {
        pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
      }
      centers.row(c) = rows.row(pick);
    }
    double inertia = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      bool changed = false;
      inertia = 0.0;
      for (Eigen::Index r = 0; r < n; ++r) {
        int arg = 0;
        double m = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c) {
          const double d = (rows.row(r) - centers.row(c)).squaredNorm();
          if (d < m) {
            m = d;
            arg = c;
          }
        }
        inertia += m;
        if (iter == 0 || labels[static_cast<std::size_t>(r)] != arg) changed = true;
        labels[static_cast<std::size_t>(r)] = arg;
      }
      if (!changed) break;
      Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, rows.cols());
      std::vector<int> counts(static_cast<std::size_t>(k), 0);
      for (Eigen::Index r = 0; r < n; ++r) {
        sums.row(labels[static_cast<std::size_t>(r)]) += rows.row(r);
        ++counts[static_cast<std::size_t>(labels[static_cast<std::size_t>(r)])];
      }
      for (int c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) centers.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
      }
    }
    if (inertia < best_inertia - 1e-12) {
      best_inertia = inertia;
      best_labels = labels;
    }
  }
  return best_labels;
}

}  // namespace detail

/// Partitions points into between 1 and k_max clusters. Each cluster lists
/// member indices ascending; clusters are ordered by their smallest member.
inline std::vector<std::vector<std::size_t>> cluster(const std::vector<Vec2>& points, const ClusterOptions& opt) {
  if (points.empty()) throw InvalidInput("cluster: no members");
  if (opt.k_max < 1) throw InvalidInput("cluster: k_max must be >= 1");
  const std::size_t n = points.size();
  if (n == 1 || opt.k_max == 1) {
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return {all};
  }
  const auto scales = local_scales(points, opt.k_nn);
  const auto a = affinity(points, scales);
  const auto spec = sorted_spectrum(normalized_laplacian(a));
  const int k = choose_cluster_count(spec.values, opt.k_max, opt.eigengap_guard);

  std::vector<int> labels(n, 0);
  if (k > 1) {
    Eigen::MatrixXd embed = spec.vectors.leftCols(k);
    for (Eigen::Index r = 0; r < embed.rows(); ++r) {
      const double len = embed.row(r).norm();
      if (len > 0.0) embed.row(r) /= len;
    }
    labels = detail::kmeans(embed, k, opt.restarts, opt.seed);
  }
  std::vector<std::vector<std::size_t>> groups(static_cast<std::size_t>(k));
  for (std::size_t m = 0; m < n; ++m) groups[static_cast<std::size_t>(labels[m])].push_back(m);
  std::erase_if(groups, [](const auto& g) { return g.empty(); });
  std::sort(groups.begin(), groups.end(), [](const auto& a, const auto& b) { return a.front() < b.front(); });
  return groups;
}

/// Circular mean of angles, in [0, 2π).
inline double circular_mean(const std::vector<double>& thetas) {
  double s = 0.0, c = 0.0;
  for (double t : thetas) {
    s += std::sin(t);
    c += std::cos(t);
  }
  if (s == 0.0 && c == 0.0) return thetas.empty() ? 0.0 : wrap_angle(thetas.front());
  return wrap_angle(std::atan2(s, c));
}

/// A locally dominant motion direction.
struct DominantDirection {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double w = 0.0;
  int members = 0;  // cluster size; not persisted

  bool operator==(const DominantDirection&) const = default;
};

struct DominantOptions {
  ClusterOptions cluster;
  int min_cluster_size = 3;
};

/// Clusters every non-empty (cell, bin) group of a pruned field. Groups are
/// visited row by row, left to right, bins ascending; each group uses a seed
/// derived from its (i, j, k) so results do not depend on scheduling.
inline std::vector<DominantDirection> dominant_directions(const CellHistogramField& field,
                                                          const DominantOptions& opt, unsigned jobs = 1) {
  struct Group {
    int i, j, k;
  };
  const auto& g = field.grid();
  std::vector<Group> groups;
  for (int j = 1; j <= g.cells_y; ++j)
    for (int i = 1; i <= g.cells_x; ++i)
      for (int k = 0; k < kOrientationBins; ++k)
        if (!field.cell(i, j).members[k].empty()) groups.push_back({i, j, k});

  std::vector<std::vector<DominantDirection>> per_group(groups.size());
  parallel_for(groups.size(), jobs, [&](std::size_t gi) {
    const auto [i, j, k] = groups[gi];
    const auto& members = field.cell(i, j).members[k];
    std::vector<Vec2> pts;
    pts.reserve(members.size());
    for (const auto& m : members) pts.push_back({m.x, m.y});
    ClusterOptions co = opt.cluster;
    co.seed = derive_seed(opt.cluster.seed, {static_cast<std::uint64_t>(i), static_cast<std::uint64_t>(j),
                                             static_cast<std::uint64_t>(k)});
    for (const auto& c : cluster(pts, co)) {
      if (static_cast<int>(c.size()) < opt.min_cluster_size) continue;
      Vec2 centroid{};
      std::vector<double> thetas;
      thetas.reserve(c.size());
      for (std::size_t idx : c) {
        centroid += pts[idx];
        thetas.push_back(members[idx].theta);
      }
      centroid = centroid / static_cast<double>(c.size());
      per_group[gi].push_back({centroid.x, centroid.y, circular_mean(thetas), 0.0, static_cast<int>(c.size())});
    }
  });

  std::vector<DominantDirection> out;
  for (auto& v : per_group) out.insert(out.end(), v.begin(), v.end());
  int peak = 0;
  for (const auto& d : out) peak = std::max(peak, d.members);
  for (auto& d : out) d.w = peak > 0 ? static_cast<double>(d.members) / peak : 0.0;
  return out;
}

inline constexpr std::string_view kDirectionHeader = "x,y,theta,w";

inline void save_directions(const std::vector<DominantDirection>& dirs, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << kDirectionHeader << '\n';
  for (const auto& d : dirs) {
    out << csv::fmt(d.x) << ',' << csv::fmt(d.y) << ',' << csv::fmt(d.theta) << ',' << csv::fmt(d.w) << '\n';
  }
}

inline std::vector<DominantDirection> load_directions(const std::string& path) {
  std::vector<DominantDirection> out;
  csv::read_file(path, kDirectionHeader, [&](const auto& f, std::size_t line) {
    DominantDirection d;
    d.x = csv::parse_double(f[0], line, "x");
    d.y = csv::parse_double(f[1], line, "y");
    d.theta = csv::parse_double(f[2], line, "theta");
    d.w = csv::parse_double(f[3], line, "w");
    if (d.w < 0.0 || d.w > 1.0) throw ParseError("line " + std::to_string(line) + ": w outside [0,1]", line);
    out.push_back(d);
  });
  return out;
}

/// Arrow overlay; arrow thickness grows with the direction's weight.
inline RgbImage render_directions(const std::vector<DominantDirection>& dirs, int width, int height,
                                  double arrow_length, const GrayImage* background = nullptr) {
  RgbImage img = background ? to_rgb(*background) : RgbImage(width, height, {16, 16, 16});
  for (const auto& d : dirs) {
    const Vec2 tail{d.x, d.y};
    const Vec2 head = tail + arrow_length * Vec2{std::cos(d.theta), std::sin(d.theta)};
    draw::arrow(img, tail, head, draw::orientation_color(d.theta), 1.0 + 2.0 * d.w);
  }
  return img;
}

}  // namespace crowdsynth
