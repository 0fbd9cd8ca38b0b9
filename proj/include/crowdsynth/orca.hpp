#pragma once

// Optimal reciprocal collision avoidance: half-plane construction from
// truncated velocity obstacles and the low-dimensional linear program that
// picks the admissible velocity closest to the preferred one.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "crowdsynth/core.hpp"

namespace crowdsynth::orca {

inline constexpr double kEpsilon = 1e-9;

/// Directed line in velocity space; admissible velocities lie on its left:
/// det(direction, v - point) >= 0.
struct HalfPlane {
  Vec2 point;
  Vec2 direction;  // unit length
};

/// The half-plane n·v >= b (n need not be unit length).
inline HalfPlane from_normal(Vec2 n, double b) {
  const double len = norm(n);
  if (len == 0.0) throw InvalidInput("half-plane normal must be nonzero");
  const Vec2 unit = n / len;
  return {unit * (b / len), Vec2{unit.y, -unit.x}};
}

/// Signed violation of a half-plane; positive when v lies outside.
inline double violation(const HalfPlane& h, Vec2 v) { return det(h.direction, h.point - v); }

namespace detail {

// Optimum on line `line_no` subject to lines [0, line_no) and the speed disk.
inline bool linear_program1(const std::vector<HalfPlane>& lines, std::size_t line_no, double radius,
                            Vec2 opt, bool direction_opt, Vec2& result) {
  const HalfPlane& L = lines[line_no];
  const double dp = dot(L.point, L.direction);
  const double disc = dp * dp + radius * radius - abs_sq(L.point);
  if (disc < 0.0) return false;  // speed disk misses the line entirely
  const double sq = std::sqrt(disc);
  double t_left = -dp - sq;
  double t_right = -dp + sq;

  for (std::size_t i = 0; i < line_no; ++i) {
    const double denom = det(L.direction, lines[i].direction);
    const double numer = det(lines[i].direction, L.point - lines[i].point);
    if (std::fabs(denom) <= kEpsilon) {
      if (numer < 0.0) return false;  // parallel and excluded
      continue;
    }
    const double t = numer / denom;
    if (denom >= 0.0) {
      t_right = std::min(t_right, t);
    } else {
      t_left = std::max(t_left, t);
    }
    if (t_left > t_right) return false;
  }

  if (direction_opt) {
    result = dot(opt, L.direction) > 0.0 ? L.point + t_right * L.direction : L.point + t_left * L.direction;
  } else {
    const double t = std::clamp(dot(L.direction, opt - L.point), t_left, t_right);
    result = L.point + t * L.direction;
  }
  return true;
}

// Incremental 2-D LP. Returns lines.size() on success, otherwise the index
// of the first line that could not be satisfied.
inline std::size_t linear_program2(const std::vector<HalfPlane>& lines, double radius, Vec2 opt,
                                   bool direction_opt, Vec2& result) {
  if (direction_opt) {
    result = opt * radius;
  } else if (abs_sq(opt) > radius * radius) {
    result = normalize(opt) * radius;
  } else {
    result = opt;
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (violation(lines[i], result) > 0.0) {
      const Vec2 keep = result;
      if (!linear_program1(lines, i, radius, opt, direction_opt, result)) {
        result = keep;
        return i;
      }
    }
  }
  return lines.size();
}

// Infeasible case: minimise the largest violation of the soft lines
// [hard_lines, end) while keeping the first `hard_lines` satisfied.
inline void linear_program3(const std::vector<HalfPlane>& lines, std::size_t hard_lines, std::size_t begin,
                            double radius, Vec2& result) {
  double distance = 0.0;
  for (std::size_t i = begin; i < lines.size(); ++i) {
    if (violation(lines[i], result) <= distance) continue;
    std::vector<HalfPlane> proj(lines.begin(), lines.begin() + static_cast<std::ptrdiff_t>(hard_lines));
    for (std::size_t j = hard_lines; j < i; ++j) {
      HalfPlane line;
      const double d = det(lines[i].direction, lines[j].direction);
      if (std::fabs(d) <= kEpsilon) {
        if (dot(lines[i].direction, lines[j].direction) > 0.0) continue;  // same direction
        line.point = 0.5 * (lines[i].point + lines[j].point);
      } else {
        line.point = lines[i].point +
                     (det(lines[j].direction, lines[i].point - lines[j].point) / d) * lines[i].direction;
      }
      line.direction = normalize(lines[j].direction - lines[i].direction);
      proj.push_back(line);
    }
    const Vec2 keep = result;
    if (linear_program2(proj, radius, Vec2{-lines[i].direction.y, lines[i].direction.x}, true, result) <
        proj.size()) {
      // Only reachable through rounding; the previous result is already admissible.
      result = keep;
    }
    distance = violation(lines[i], result);
  }
}

}  // namespace detail

/// Velocity closest to `pref` satisfying every half-plane and |v| <= max_speed.
/// When no such velocity exists, returns the velocity in the speed disk that
/// minimises the largest violation of the soft constraints; the first
/// `hard_lines` constraints (obstacles) are never relaxed.
inline Vec2 solve_velocity(const std::vector<HalfPlane>& lines, Vec2 pref, double max_speed,
                           std::size_t hard_lines = 0) {
  Vec2 result;
  const std::size_t fail = detail::linear_program2(lines, max_speed, pref, false, result);
  if (fail < lines.size()) detail::linear_program3(lines, std::min(hard_lines, fail), fail, max_speed, result);
  return result;
}

/// Counterclockwise simple polygon.
struct Obstacle {
  std::vector<Vec2> vertices;

  double signed_area() const {
    double a = 0.0;
    for (std::size_t i = 0; i < vertices.size(); ++i) {
      a += det(vertices[i], vertices[(i + 1) % vertices.size()]);
    }
    return 0.5 * a;
  }

  void validate() const {
    const std::size_t n = vertices.size();
    if (n < 3) throw InvalidInput("obstacle needs at least 3 vertices");
    if (!(signed_area() > 0.0)) throw InvalidInput("obstacle vertices must be counterclockwise");
    auto seg_cross = [](Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
      const double d1 = det(b - a, c - a), d2 = det(b - a, d - a);
      const double d3 = det(d - c, a - c), d4 = det(d - c, b - c);
      return ((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0));
    };
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 2; j < n; ++j) {
        if (i == 0 && j == n - 1) continue;  // adjacent through the wrap
        if (seg_cross(vertices[i], vertices[(i + 1) % n], vertices[j], vertices[(j + 1) % n])) {
          throw InvalidInput("obstacle polygon is self-intersecting");
        }
      }
    }
  }
};

/// Obstacle edges in the linked-vertex form the constraint builder walks.
class ObstacleSet {
 public:
  struct Vertex {
    Vec2 point;
    Vec2 unit_dir;  // towards next vertex
    bool convex = true;
    std::size_t next = 0;
    std::size_t prev = 0;
  };

  ObstacleSet() = default;
  explicit ObstacleSet(const std::vector<Obstacle>& obstacles) {
    for (const auto& ob : obstacles) {
      ob.validate();
      const std::size_t base = vertices_.size();
      const std::size_t n = ob.vertices.size();
      for (std::size_t k = 0; k < n; ++k) {
        Vertex v;
        v.point = ob.vertices[k];
        v.next = base + (k + 1) % n;
        v.prev = base + (k + n - 1) % n;
        v.unit_dir = normalize(ob.vertices[(k + 1) % n] - ob.vertices[k]);
        const Vec2 a = ob.vertices[(k + n - 1) % n], b = ob.vertices[k], c = ob.vertices[(k + 1) % n];
        v.convex = det(a - c, b - a) >= 0.0;
        vertices_.push_back(v);
      }
    }
  }

  const std::vector<Vertex>& vertices() const { return vertices_; }
  bool empty() const { return vertices_.empty(); }

  /// Edges (by start vertex) facing `pos` within range, nearest first.
  std::vector<std::size_t> edges_near(Vec2 pos, double range_sq) const {
    std::vector<std::pair<double, std::size_t>> found;
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
      const Vec2 a = vertices_[i].point;
      const Vec2 b = vertices_[vertices_[i].next].point;
      const double left_of = det(a - pos, b - a);
      if (left_of >= 0.0) continue;  // agent behind the edge
      const Vec2 ab = b - a;
      const double r = dot(pos - a, ab) / abs_sq(ab);
      double dsq;
      if (r < 0.0) {
        dsq = abs_sq(pos - a);
      } else if (r > 1.0) {
        dsq = abs_sq(pos - b);
      } else {
        dsq = abs_sq(pos - (a + r * ab));
      }
      if (dsq < range_sq) found.emplace_back(dsq, i);
    }
    std::sort(found.begin(), found.end());
    std::vector<std::size_t> out;
    out.reserve(found.size());
    for (const auto& f : found) out.push_back(f.second);
    return out;
  }

 private:
  std::vector<Vertex> vertices_;
};

/// Kinematic state the constraint builder needs for one body.
struct Body {
  Vec2 position;
  Vec2 velocity;
  double radius = 0.3;
};

/// Reciprocal constraint induced on `self` by `other` (each side takes half
/// of the required change). Exactly head-on approaches deflect to the left.
inline HalfPlane agent_halfplane(const Body& self, const Body& other, double time_horizon, double dt) {
  const Vec2 rel_pos = other.position - self.position;
  const Vec2 rel_vel = self.velocity - other.velocity;
  const double dist_sq = abs_sq(rel_pos);
  const double r = self.radius + other.radius;
  const double r_sq = r * r;
  const double inv_tau = 1.0 / time_horizon;

  HalfPlane line;
  Vec2 u;
  if (dist_sq > r_sq) {
    const Vec2 w = rel_vel - inv_tau * rel_pos;
    const double w_len_sq = abs_sq(w);
    const double dp = dot(w, rel_pos);
    const double w_len = std::sqrt(w_len_sq);
    // Relative velocity exactly on the cone axis inside the truncated cone:
    // the cut-off circle would only brake, so escape along the left leg.
    const bool on_axis = std::fabs(det(rel_pos, rel_vel)) <= 1e-12 * std::sqrt(dist_sq) * norm(rel_vel) &&
                         dot(rel_pos, rel_vel) > 0.0;
    const bool cutoff = dp < 0.0 && dp * dp > r_sq * w_len_sq;
    if (cutoff && !(on_axis && w_len < r * inv_tau)) {
      const Vec2 unit_w = w / w_len;
      line.direction = {unit_w.y, -unit_w.x};
      u = (r * inv_tau - w_len) * unit_w;
    } else {
      const double leg = std::sqrt(dist_sq - r_sq);
      if (det(rel_pos, w) >= 0.0) {
        line.direction = Vec2{rel_pos.x * leg - rel_pos.y * r, rel_pos.x * r + rel_pos.y * leg} / dist_sq;
      } else {
        line.direction = -Vec2{rel_pos.x * leg + rel_pos.y * r, -rel_pos.x * r + rel_pos.y * leg} / dist_sq;
      }
      u = dot(rel_vel, line.direction) * line.direction - rel_vel;
    }
  } else {
    // Overlapping: resolve the penetration within one step.
    const double inv_dt = 1.0 / dt;
    const Vec2 w = rel_vel - inv_dt * rel_pos;
    double w_len = norm(w);
    Vec2 unit_w = w_len > 0.0 ? w / w_len : normalize(-rel_pos);
    if (abs_sq(unit_w) == 0.0) unit_w = {-1.0, 0.0};  // coincident centres
    line.direction = {unit_w.y, -unit_w.x};
    u = (r * inv_dt - w_len) * unit_w;
  }
  line.point = self.velocity + 0.5 * u;
  return line;
}

/// Constraints from static obstacle edges (full responsibility). Appends to
/// `lines`, skipping edges already covered by earlier obstacle lines.
inline void obstacle_halfplanes(const Body& self, const ObstacleSet& obstacles,
                                const std::vector<std::size_t>& edges, double time_horizon,
                                std::vector<HalfPlane>& lines) {
  const double inv_tau = 1.0 / time_horizon;
  const double radius = self.radius;
  const double radius_sq = radius * radius;
  const auto& verts = obstacles.vertices();

  for (std::size_t e : edges) {
    const auto* ob1 = &verts[e];
    const auto* ob2 = &verts[ob1->next];
    const Vec2 rel1 = ob1->point - self.position;
    const Vec2 rel2 = ob2->point - self.position;

    bool covered = false;
    for (const auto& l : lines) {
      if (det(inv_tau * rel1 - l.point, l.direction) - inv_tau * radius >= -kEpsilon &&
          det(inv_tau * rel2 - l.point, l.direction) - inv_tau * radius >= -kEpsilon) {
        covered = true;
        break;
      }
    }
    if (covered) continue;

    const double dist_sq1 = abs_sq(rel1);
    const double dist_sq2 = abs_sq(rel2);
    const Vec2 ob_vec = ob2->point - ob1->point;
    const double s = dot(-rel1, ob_vec) / abs_sq(ob_vec);
    const double dist_sq_line = abs_sq(-rel1 - s * ob_vec);

    HalfPlane line;
    if (s < 0.0 && dist_sq1 <= radius_sq) {
      if (ob1->convex) lines.push_back({Vec2{}, normalize(Vec2{-rel1.y, rel1.x})});
      continue;
    }
    if (s > 1.0 && dist_sq2 <= radius_sq) {
      if (ob2->convex && det(rel2, ob2->unit_dir) >= 0.0) {
        lines.push_back({Vec2{}, normalize(Vec2{-rel2.y, rel2.x})});
      }
      continue;
    }
    if (s >= 0.0 && s <= 1.0 && dist_sq_line <= radius_sq) {
      lines.push_back({Vec2{}, -ob1->unit_dir});
      continue;
    }

    Vec2 left_leg, right_leg;
    if (s < 0.0 && dist_sq_line <= radius_sq) {
      // Seen obliquely: the left vertex alone defines the obstacle.
      if (!ob1->convex) continue;
      ob2 = ob1;
      const double leg1 = std::sqrt(dist_sq1 - radius_sq);
      left_leg = Vec2{rel1.x * leg1 - rel1.y * radius, rel1.x * radius + rel1.y * leg1} / dist_sq1;
      right_leg = Vec2{rel1.x * leg1 + rel1.y * radius, -rel1.x * radius + rel1.y * leg1} / dist_sq1;
    } else if (s > 1.0 && dist_sq_line <= radius_sq) {
      if (!ob2->convex) continue;
      ob1 = ob2;
      const double leg2 = std::sqrt(dist_sq2 - radius_sq);
      left_leg = Vec2{rel2.x * leg2 - rel2.y * radius, rel2.x * radius + rel2.y * leg2} / dist_sq2;
      right_leg = Vec2{rel2.x * leg2 + rel2.y * radius, -rel2.x * radius + rel2.y * leg2} / dist_sq2;
    } else {
      if (ob1->convex) {
        const double leg1 = std::sqrt(dist_sq1 - radius_sq);
        left_leg = Vec2{rel1.x * leg1 - rel1.y * radius, rel1.x * radius + rel1.y * leg1} / dist_sq1;
      } else {
        left_leg = -ob1->unit_dir;
      }
      if (ob2->convex) {
        const double leg2 = std::sqrt(dist_sq2 - radius_sq);
        right_leg = Vec2{rel2.x * leg2 + rel2.y * radius, -rel2.x * radius + rel2.y * leg2} / dist_sq2;
      } else {
        right_leg = ob1->unit_dir;
      }
    }

    // A leg pointing into the neighbouring edge is replaced by that edge.
    const auto* left_neighbor = &verts[ob1->prev];
    bool left_foreign = false, right_foreign = false;
    if (ob1->convex && det(left_leg, -left_neighbor->unit_dir) >= 0.0) {
      left_leg = -left_neighbor->unit_dir;
      left_foreign = true;
    }
    if (ob2->convex && det(right_leg, ob2->unit_dir) <= 0.0) {
      right_leg = ob2->unit_dir;
      right_foreign = true;
    }

    const Vec2 left_cut = inv_tau * (ob1->point - self.position);
    const Vec2 right_cut = inv_tau * (ob2->point - self.position);
    const Vec2 cut_vec = right_cut - left_cut;
    const bool same = ob1 == ob2;
    const double t = same ? 0.5 : dot(self.velocity - left_cut, cut_vec) / abs_sq(cut_vec);
    const double t_left = dot(self.velocity - left_cut, left_leg);
    const double t_right = dot(self.velocity - right_cut, right_leg);

    if ((t < 0.0 && t_left < 0.0) || (same && t_left < 0.0 && t_right < 0.0)) {
      const Vec2 unit_w = normalize(self.velocity - left_cut);
      line.direction = {unit_w.y, -unit_w.x};
      line.point = left_cut + radius * inv_tau * unit_w;
      lines.push_back(line);
      continue;
    }
    if (t > 1.0 && t_right < 0.0) {
      const Vec2 unit_w = normalize(self.velocity - right_cut);
      line.direction = {unit_w.y, -unit_w.x};
      line.point = right_cut + radius * inv_tau * unit_w;
      lines.push_back(line);
      continue;
    }

    constexpr double kInf = std::numeric_limits<double>::infinity();
    const double d_cut = (t < 0.0 || t > 1.0 || same) ? kInf : abs_sq(self.velocity - (left_cut + t * cut_vec));
    const double d_left = t_left < 0.0 ? kInf : abs_sq(self.velocity - (left_cut + t_left * left_leg));
    const double d_right = t_right < 0.0 ? kInf : abs_sq(self.velocity - (right_cut + t_right * right_leg));

    if (d_cut <= d_left && d_cut <= d_right) {
      line.direction = -ob1->unit_dir;
      line.point = left_cut + radius * inv_tau * Vec2{-line.direction.y, line.direction.x};
      lines.push_back(line);
      continue;
    }
    if (d_left <= d_right) {
      if (left_foreign) continue;
      line.direction = left_leg;
      line.point = left_cut + radius * inv_tau * Vec2{-line.direction.y, line.direction.x};
      lines.push_back(line);
      continue;
    }
    if (right_foreign) continue;
    line.direction = -right_leg;
    line.point = right_cut + radius * inv_tau * Vec2{-line.direction.y, line.direction.x};
    lines.push_back(line);
  }
}

}  // namespace crowdsynth::orca
