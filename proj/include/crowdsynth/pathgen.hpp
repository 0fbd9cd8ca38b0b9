#pragma once

// Global path growth from dominant directions, per-agent path
// diversification and Catmull-Rom smoothing.

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "crowdsynth/core.hpp"
#include "crowdsynth/csv.hpp"
#include "crowdsynth/grid.hpp"
#include "crowdsynth/random.hpp"
#include "crowdsynth/spectral.hpp"

namespace crowdsynth {

struct GlobalPath {
  std::vector<Vec2> nodes;
  double support = 0.0;

  bool operator==(const GlobalPath&) const = default;
};

/// Circular mean of the segment headings of a polyline.
inline double mean_segment_orientation(const GlobalPath& path) {
  std::vector<double> headings;
  for (std::size_t i = 1; i < path.nodes.size(); ++i) {
    const Vec2 d = path.nodes[i] - path.nodes[i - 1];
    if (abs_sq(d) > 0.0) headings.push_back(wrap_angle(std::atan2(d.y, d.x)));
  }
  return circular_mean(headings);
}

/// Chains dominant directions through 8-connected neighbouring cells.
///
/// Seeds are taken in sweep order (rows top to bottom, cells left to right).
/// A chain grows forward from its head along the running mean orientation and
/// then backward from its tail, so node order always follows the motion. A
/// candidate must lie in a neighbouring cell on the correct side and have an
/// orientation within angle_tol of the running mean; failing that, the
/// closest orientation within 2·angle_tol is taken. Among equals the cell
/// whose offset best aligns with the motion wins, then sweep order.
inline std::vector<GlobalPath> grow_paths(const std::vector<DominantDirection>& directions, const GridSpec& grid,
                                          double angle_tol) {
  grid.validate();
  if (angle_tol < 0.0) throw InvalidInput("grow_paths: angle_tol must be >= 0");
  const std::size_t n = directions.size();
  struct Loc {
    int i, j;
  };
  std::vector<Loc> loc(n);
  std::map<std::pair<int, int>, std::vector<std::size_t>> by_cell;
  for (std::size_t d = 0; d < n; ++d) {
    const auto& dir = directions[d];
    loc[d] = {grid.column(std::clamp(dir.x, 0.0, grid.image_width - 1e-9)),
              grid.row(std::clamp(dir.y, 0.0, grid.image_height - 1e-9))};
    by_cell[{loc[d].j, loc[d].i}].push_back(d);
  }
  std::vector<std::size_t> order;
  order.reserve(n);
  for (const auto& [key, members] : by_cell) order.insert(order.end(), members.begin(), members.end());
  std::vector<std::size_t> rank(n);
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;

  std::vector<bool> used(n, false);

  auto mean_theta = [&](const std::deque<std::size_t>& chain) {
    std::vector<double> t;
    t.reserve(chain.size());
    for (auto d : chain) t.push_back(directions[d].theta);
    return circular_mean(t);
  };

  // Forward means the cell offset is within 67.5 degrees of the heading: the
  // three cells ahead (four when the heading falls between two of them).
  const double kForwardCos = std::cos(3.0 * kPi / 8.0) - 1e-9;

  // Best unused neighbour of `from` moving along `heading`, or n if none.
  auto pick = [&](std::size_t from, double mean, Vec2 heading) {
    std::size_t best = n;
    std::size_t best_fallback = n;
    double best_align = -1.0, fb_diff = 0.0, fb_align = -1.0;
    for (int dj = -1; dj <= 1; ++dj) {
      for (int di = -1; di <= 1; ++di) {
        if (di == 0 && dj == 0) continue;
        auto it = by_cell.find({loc[from].j + dj, loc[from].i + di});
        if (it == by_cell.end()) continue;
        const double align = dot(normalize(Vec2{static_cast<double>(di), static_cast<double>(dj)}), heading);
        if (align < kForwardCos) continue;
        for (std::size_t c : it->second) {
          if (used[c]) continue;
          const double diff = angle_distance(directions[c].theta, mean);
          if (diff <= angle_tol) {
            if (best == n || align > best_align + 1e-12 ||
                (std::fabs(align - best_align) <= 1e-12 && rank[c] < rank[best])) {
              best = c;
              best_align = align;
            }
          } else if (diff <= 2.0 * angle_tol) {
            const bool better = best_fallback == n || diff < fb_diff - 1e-12 ||
                                (std::fabs(diff - fb_diff) <= 1e-12 &&
                                 (align > fb_align + 1e-12 ||
                                  (std::fabs(align - fb_align) <= 1e-12 && rank[c] < rank[best_fallback])));
            if (better) {
              best_fallback = c;
              fb_diff = diff;
              fb_align = align;
            }
          }
        }
      }
    }
    return best != n ? best : best_fallback;
  };

  std::vector<GlobalPath> paths;
  for (std::size_t seed : order) {
    if (used[seed]) continue;
    std::deque<std::size_t> chain{seed};
    used[seed] = true;
    while (true) {
      const double mean = mean_theta(chain);
      const std::size_t next = pick(chain.back(), mean, {std::cos(mean), std::sin(mean)});
      if (next == n) break;
      used[next] = true;
      chain.push_back(next);
    }
    while (true) {
      const double mean = mean_theta(chain);
      const std::size_t prev = pick(chain.front(), mean, {-std::cos(mean), -std::sin(mean)});
      if (prev == n) break;
      used[prev] = true;
      chain.push_front(prev);
    }
    if (chain.size() < 2) {
      used[seed] = false;
      continue;
    }
    GlobalPath p;
    for (auto d : chain) {
      const Vec2 node{directions[d].x, directions[d].y};
      if (!p.nodes.empty() && p.nodes.back() == node) continue;
      p.nodes.push_back(node);
      p.support += directions[d].w;
    }
    if (p.nodes.size() >= 2) paths.push_back(std::move(p));
  }
  return paths;
}

enum class DiversifyMethod { kSquare, kTriangle, kCircle };

inline std::string to_string(DiversifyMethod m) {
  switch (m) {
    case DiversifyMethod::kSquare: return "square";
    case DiversifyMethod::kTriangle: return "triangle";
    default: return "circle";
  }
}

inline DiversifyMethod parse_diversify_method(const std::string& s) {
  if (s == "square") return DiversifyMethod::kSquare;
  if (s == "triangle") return DiversifyMethod::kTriangle;
  if (s == "circle") return DiversifyMethod::kCircle;
  throw InvalidInput("unknown diversification method '" + s + "'");
}

struct DiversifyParams {
  DiversifyMethod method = DiversifyMethod::kCircle;
  double size = 10.0;            // square half-width, triangle base, circle max radius
  std::uint64_t seed = 1;
  double radius_coupling = 2.5;  // max |r_{i+1} - r_i| for the circle method

  void validate() const {
    if (!(size >= 0.0)) throw InvalidInput("diversify: size must be >= 0");
    if (!(radius_coupling >= 0.0)) throw InvalidInput("diversify: radius_coupling must be >= 0");
  }
};

/// Unit normal at each node: the normalised mean of the left normals of the
/// incident segments (the single segment's normal at the endpoints).
inline std::vector<Vec2> node_normals(const std::vector<Vec2>& nodes) {
  const std::size_t n = nodes.size();
  std::vector<Vec2> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 in = i > 0 ? left_normal(nodes[i] - nodes[i - 1]) : Vec2{};
    const Vec2 outn = i + 1 < n ? left_normal(nodes[i + 1] - nodes[i]) : Vec2{};
    Vec2 m = normalize(in + outn);
    if (abs_sq(m) == 0.0) m = abs_sq(in) > 0.0 ? in : outn;  // segments reverse
    out[i] = m;
  }
  return out;
}

inline GlobalPath diversify_square(const GlobalPath& path, const DiversifyParams& params) {
  params.validate();
  if (params.size == 0.0) return path;
  Rng rng(params.seed);
  GlobalPath out = path;
  for (auto& p : out.nodes) {
    const double dx = rng.uniform(-params.size, params.size);
    const double dy = rng.uniform(-params.size, params.size);
    p += Vec2{dx, dy};
  }
  return out;
}

inline GlobalPath diversify_triangle(const GlobalPath& path, const DiversifyParams& params) {
  params.validate();
  if (path.nodes.size() < 2) throw InvalidInput("diversify_triangle: path needs >= 2 nodes");
  if (params.size == 0.0) return path;
  Rng rng(params.seed);
  const auto normals = node_normals(path.nodes);
  GlobalPath out = path;
  for (std::size_t i = 0; i < out.nodes.size(); ++i) {
    out.nodes[i] += rng.uniform(-0.5 * params.size, 0.5 * params.size) * normals[i];
  }
  return out;
}

/// Radii per node for the circle method: r_0 in (0, size], each next radius
/// within radius_coupling of the previous one.
inline std::vector<double> circle_radii(std::size_t count, const DiversifyParams& params, Rng& rng) {
  std::vector<double> r(count);
  const double eps = params.size * 1e-6;
  for (std::size_t i = 0; i < count; ++i) {
    if (i == 0) {
      r[i] = params.size * (1.0 - rng.uniform(0.0, 1.0));
    } else {
      const double lo = std::max(eps, r[i - 1] - params.radius_coupling);
      const double hi = std::min(params.size, r[i - 1] + params.radius_coupling);
      r[i] = hi > lo ? rng.uniform(lo, hi) : std::clamp(r[i - 1], eps, params.size);
    }
  }
  return r;
}

/// Offsets every node to one side of the path (side drawn once per call).
inline GlobalPath diversify_circle(const GlobalPath& path, const DiversifyParams& params) {
  params.validate();
  if (path.nodes.size() < 2) throw InvalidInput("diversify_circle: path needs >= 2 nodes");
  if (params.size == 0.0) return path;
  Rng rng(params.seed);
  const double side = rng.coin() ? 1.0 : -1.0;
  const auto radii = circle_radii(path.nodes.size(), params, rng);
  const auto normals = node_normals(path.nodes);
  GlobalPath out = path;
  for (std::size_t i = 0; i < out.nodes.size(); ++i) out.nodes[i] += side * radii[i] * normals[i];
  return out;
}

inline GlobalPath diversify(const GlobalPath& path, const DiversifyParams& params) {
  switch (params.method) {
    case DiversifyMethod::kSquare: return diversify_square(path, params);
    case DiversifyMethod::kTriangle: return diversify_triangle(path, params);
    default: return diversify_circle(path, params);
  }
}

/// Centripetal Catmull-Rom through the nodes, `samples_per_segment` points per
/// segment; the original nodes are reproduced exactly.
inline GlobalPath smooth(const GlobalPath& path, int samples_per_segment) {
  if (path.nodes.size() < 2) throw InvalidInput("smooth: path needs >= 2 nodes");
  if (samples_per_segment < 1) throw InvalidInput("smooth: samples_per_segment must be >= 1");
  const auto& p = path.nodes;
  const std::size_t n = p.size();
  GlobalPath out;
  out.support = path.support;
  out.nodes.reserve((n - 1) * static_cast<std::size_t>(samples_per_segment) + 1);

  auto knot = [](double t, const Vec2& a, const Vec2& b) { return t + std::max(std::sqrt(norm(b - a)), 1e-12); };
  auto lerp = [](const Vec2& a, const Vec2& b, double ta, double tb, double t) {
    return ((tb - t) / (tb - ta)) * a + ((t - ta) / (tb - ta)) * b;
  };

  for (std::size_t s = 0; s + 1 < n; ++s) {
    const Vec2 p1 = p[s];
    const Vec2 p2 = p[s + 1];
    const Vec2 p0 = s > 0 ? p[s - 1] : 2.0 * p1 - p2;
    const Vec2 p3 = s + 2 < n ? p[s + 2] : 2.0 * p2 - p1;
    const double t0 = 0.0;
    const double t1 = knot(t0, p0, p1);
    const double t2 = knot(t1, p1, p2);
    const double t3 = knot(t2, p2, p3);
    out.nodes.push_back(p1);
    for (int j = 1; j < samples_per_segment; ++j) {
      const double t = t1 + (t2 - t1) * j / samples_per_segment;
      const Vec2 a1 = lerp(p0, p1, t0, t1, t);
      const Vec2 a2 = lerp(p1, p2, t1, t2, t);
      const Vec2 a3 = lerp(p2, p3, t2, t3, t);
      const Vec2 b1 = lerp(a1, a2, t0, t2, t);
      const Vec2 b2 = lerp(a2, a3, t1, t3, t);
      out.nodes.push_back(lerp(b1, b2, t1, t2, t));
    }
  }
  out.nodes.push_back(p.back());
  return out;
}

/// Baseline "random paths": start and goal on opposite image borders with
/// three uniformly drawn interior waypoints between them.
inline std::vector<GlobalPath> random_border_paths(int width, int height, std::size_t count, std::uint64_t seed) {
  if (width < 2 || height < 2) throw InvalidInput("random_border_paths: image too small");
  std::vector<GlobalPath> out;
  const double w = width - 1.0, h = height - 1.0;
  for (std::size_t a = 0; a < count; ++a) {
    Rng rng(derive_seed(seed, {a}));
    GlobalPath p;
    const bool horizontal = rng.coin();
    const bool flip = rng.coin();
    Vec2 start, goal;
    if (horizontal) {
      start = {0.0, rng.uniform(0.0, h)};
      goal = {w, rng.uniform(0.0, h)};
    } else {
      start = {rng.uniform(0.0, w), 0.0};
      goal = {rng.uniform(0.0, w), h};
    }
    if (flip) std::swap(start, goal);
    p.nodes.push_back(start);
    for (int k = 0; k < 3; ++k) p.nodes.push_back({rng.uniform(0.0, w), rng.uniform(0.0, h)});
    p.nodes.push_back(goal);
    out.push_back(std::move(p));
  }
  return out;
}

inline constexpr std::string_view kPathHeader = "path_id,node_index,x,y";
inline constexpr std::string_view kAgentPathHeader = "agent_id,path_id,node_index,x,y";

inline void save_paths(const std::vector<GlobalPath>& paths, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << kPathHeader << '\n';
  for (std::size_t id = 0; id < paths.size(); ++id) {
    for (std::size_t k = 0; k < paths[id].nodes.size(); ++k) {
      out << id << ',' << k << ',' << csv::fmt(paths[id].nodes[k].x) << ',' << csv::fmt(paths[id].nodes[k].y)
          << '\n';
    }
  }
}

/// Paths in id order; node rows of a path must be contiguous and numbered 0, 1, ...
inline std::vector<GlobalPath> load_paths(const std::string& path) {
  std::map<long long, GlobalPath> byid;
  csv::read_file(path, kPathHeader, [&](const auto& f, std::size_t line) {
    const long long id = csv::parse_int(f[0], line, "path_id");
    const long long k = csv::parse_int(f[1], line, "node_index");
    const Vec2 v{csv::parse_double(f[2], line, "x"), csv::parse_double(f[3], line, "y")};
    auto& gp = byid[id];
    if (k != static_cast<long long>(gp.nodes.size())) {
      throw ParseError("line " + std::to_string(line) + ": node_index out of sequence", line);
    }
    gp.nodes.push_back(v);
  });
  std::vector<GlobalPath> out;
  for (auto& [id, gp] : byid) out.push_back(std::move(gp));
  return out;
}

struct AgentPath {
  long long agent_id = 0;
  long long path_id = 0;
  GlobalPath path;
};

inline void save_agent_paths(const std::vector<AgentPath>& paths, const std::string& file) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write " + file);
  out << kAgentPathHeader << '\n';
  for (const auto& ap : paths) {
    for (std::size_t k = 0; k < ap.path.nodes.size(); ++k) {
      out << ap.agent_id << ',' << ap.path_id << ',' << k << ',' << csv::fmt(ap.path.nodes[k].x) << ','
          << csv::fmt(ap.path.nodes[k].y) << '\n';
    }
  }
}

}  // namespace crowdsynth
