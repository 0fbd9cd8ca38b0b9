#pragma once

// Goal-stack agents advanced by ORCA velocity selection.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "crowdsynth/core.hpp"
#include "crowdsynth/csv.hpp"
#include "crowdsynth/orca.hpp"
#include "crowdsynth/parallel.hpp"
#include "crowdsynth/pathgen.hpp"
#include "crowdsynth/random.hpp"

namespace crowdsynth {

using orca::HalfPlane;
using orca::Obstacle;

enum class GoalMode { kTight, kLoose };

inline GoalMode parse_goal_mode(const std::string& s) {
  if (s == "tight") return GoalMode::kTight;
  if (s == "loose") return GoalMode::kLoose;
  throw InvalidInput("unknown goal_mode '" + s + "'");
}
inline std::string to_string(GoalMode m) { return m == GoalMode::kTight ? "tight" : "loose"; }

/// Waypoints with the current target on top (the back of the vector).
class GoalStack {
 public:
  GoalStack() = default;
  GoalStack(const std::vector<Vec2>& route, double arrival_radius) : arrival_radius_(arrival_radius) {
    goals_.assign(route.rbegin(), route.rend());
  }

  bool empty() const { return goals_.empty(); }
  std::size_t depth() const { return goals_.size(); }
  const Vec2& top() const {
    if (goals_.empty()) throw std::logic_error("goal stack is empty");
    return goals_.back();
  }
  const Vec2& bottom() const {
    if (goals_.empty()) throw std::logic_error("goal stack is empty");
    return goals_.front();
  }
  void push(Vec2 subgoal) { goals_.push_back(subgoal); }
  double arrival_radius() const { return arrival_radius_; }

  /// Pops every goal already within the arrival radius of `position`.
  std::size_t pop_reached(Vec2 position) {
    std::size_t popped = 0;
    while (!goals_.empty() && norm(goals_.back() - position) <= arrival_radius_) {
      goals_.pop_back();
      ++popped;
    }
    return popped;
  }

  bool operator==(const GoalStack&) const = default;

 private:
  std::vector<Vec2> goals_;
  double arrival_radius_ = 0.15;
};

struct Agent {
  long long id = 0;
  Vec2 position;
  Vec2 velocity;
  double radius = 0.3;
  double pref_speed = 1.4;
  double max_speed = 2.0;
  GoalStack goals;
  long long path_id = 0;
  std::uint64_t agent_seed = 0;
  long long entry_step = 0;

  bool operator==(const Agent&) const = default;
};

struct SimParams {
  double dt = 0.1;
  double time_horizon = 2.0;
  double neighbor_dist = 10.0;
  int max_neighbors = 10;
  double obstacle_time_horizon = 2.0;
  int population = 10;
  GoalMode goal_mode = GoalMode::kLoose;
  bool respawn = true;
  std::uint64_t seed = 1;

  double radius = 0.3;
  double pref_speed = 1.4;
  double max_speed = 2.0;
  double tight_factor = 0.5;  // arrival radius = factor · agent radius
  double loose_factor = 4.0;
  double entry_window = 10.0;  // seconds over which initial entries are spread

  void validate() const {
    if (!(dt > 0.0)) throw InvalidInput("sim.dt must be > 0");
    if (!(time_horizon > 0.0)) throw InvalidInput("sim.time_horizon must be > 0");
    if (!(obstacle_time_horizon > 0.0)) throw InvalidInput("sim.obstacle_time_horizon must be > 0");
    if (population < 1) throw InvalidInput("sim.population must be >= 1");
    if (!(radius > 0.0)) throw InvalidInput("sim.radius must be > 0");
    if (!(pref_speed > 0.0 && pref_speed <= max_speed)) {
      throw InvalidInput("sim speeds must satisfy 0 < pref_speed <= max_speed");
    }
    if (neighbor_dist < 0.0 || max_neighbors < 0) throw InvalidInput("sim neighbour limits must be >= 0");
    if (entry_window < 0.0) throw InvalidInput("sim.entry_window must be >= 0");
  }

  double arrival_radius() const {
    return (goal_mode == GoalMode::kTight ? tight_factor : loose_factor) * radius;
  }
};

/// How agents obtain their routes: one diversified and smoothed variant of a
/// round-robin source path per agent.
struct SpawnPlan {
  std::vector<GlobalPath> sources;  // world space
  bool diversify = true;
  DiversifyParams diversify_params;
  int samples_per_segment = 4;

  GlobalPath route(std::size_t source, long long agent_id, std::uint64_t seed) const {
    GlobalPath p = sources.at(source);
    if (diversify && p.nodes.size() >= 2) {
      DiversifyParams dp = diversify_params;
      dp.seed = derive_seed(seed, {0xD1u, static_cast<std::uint64_t>(source), static_cast<std::uint64_t>(agent_id)});
      p = crowdsynth::diversify(p, dp);
    }
    if (p.nodes.size() >= 2 && samples_per_segment > 1) p = smooth(p, samples_per_segment);
    return p;
  }
};

struct SimState {
  long long step = 0;
  double time = 0.0;
  std::vector<Agent> agents;   // active
  std::vector<Agent> pending;  // waiting for their entry step / a clear spawn point
  std::vector<Obstacle> obstacles;
  std::optional<SpawnPlan> plan;
  long long next_agent_id = 0;
  long long despawned = 0;
  std::vector<Agent> finished;  // agents removed by the most recent step, in their final state
};

/// Velocity toward the top goal at preferred speed, slowed to land exactly on
/// it when it is closer than one step.
inline Vec2 pref_velocity(const Agent& agent, double dt) {
  if (agent.goals.empty()) throw std::logic_error("pref_velocity: agent has no goals");
  const Vec2 to_goal = agent.goals.top() - agent.position;
  const double dist = norm(to_goal);
  if (dist == 0.0) return {};
  if (dist < agent.pref_speed * dt) return to_goal / dt;
  return to_goal * (agent.pref_speed / dist);
}

struct OrcaConstraints {
  std::vector<HalfPlane> lines;
  std::size_t obstacle_lines = 0;
};

/// Obstacle constraints (hard) followed by one reciprocal constraint per neighbour.
inline OrcaConstraints orca_halfplanes(const Agent& agent, const std::vector<const Agent*>& neighbors,
                                       const orca::ObstacleSet& obstacles, const SimParams& params) {
  OrcaConstraints c;
  const orca::Body self{agent.position, agent.velocity, agent.radius};
  if (!obstacles.empty()) {
    const double range = params.obstacle_time_horizon * agent.max_speed + agent.radius;
    const auto edges = obstacles.edges_near(agent.position, range * range);
    orca::obstacle_halfplanes(self, obstacles, edges, params.obstacle_time_horizon, c.lines);
  }
  c.obstacle_lines = c.lines.size();
  for (const Agent* other : neighbors) {
    c.lines.push_back(orca::agent_halfplane(self, {other->position, other->velocity, other->radius},
                                            params.time_horizon, params.dt));
  }
  return c;
}

inline OrcaConstraints orca_halfplanes(const Agent& agent, const std::vector<const Agent*>& neighbors,
                                       const std::vector<Obstacle>& obstacles, const SimParams& params) {
  return orca_halfplanes(agent, neighbors, orca::ObstacleSet(obstacles), params);
}

using orca::solve_velocity;

/// Neighbours within neighbor_dist, nearest first (ties by id), at most max_neighbors.
inline std::vector<const Agent*> find_neighbors(const std::vector<Agent>& agents, std::size_t self,
                                                const SimParams& params) {
  std::vector<std::pair<double, const Agent*>> cand;
  const double range_sq = params.neighbor_dist * params.neighbor_dist;
  for (std::size_t o = 0; o < agents.size(); ++o) {
    if (o == self) continue;
    const double d = abs_sq(agents[o].position - agents[self].position);
    if (d < range_sq) cand.emplace_back(d, &agents[o]);
  }
  std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
    return a.first < b.first || (a.first == b.first && a.second->id < b.second->id);
  });
  if (cand.size() > static_cast<std::size_t>(params.max_neighbors)) cand.resize(params.max_neighbors);
  std::vector<const Agent*> out;
  out.reserve(cand.size());
  for (const auto& c : cand) out.push_back(c.second);
  return out;
}

namespace detail {

inline Agent make_agent(long long id, long long path_id, const GlobalPath& route, const SimParams& p,
                        long long entry_step) {
  Agent a;
  a.id = id;
  a.path_id = path_id;
  a.agent_seed = derive_seed(p.seed, {static_cast<std::uint64_t>(id)});
  a.position = route.nodes.front();
  a.radius = p.radius;
  a.pref_speed = p.pref_speed;
  a.max_speed = p.max_speed;
  a.goals = GoalStack(route.nodes, p.arrival_radius());
  a.entry_step = entry_step;
  return a;
}

inline bool spawn_clear(const Agent& a, const std::vector<Agent>& active) {
  for (const auto& o : active) {
    if (norm(o.position - a.position) < a.radius + o.radius) return false;
  }
  return true;
}

}  // namespace detail

/// Initial state: population agents assigned round-robin to the source paths,
/// each with its own route variant and a staggered entry step.
inline SimState spawn_from_paths(const std::vector<GlobalPath>& paths, const SimParams& params,
                                 SpawnPlan plan = {}) {
  params.validate();
  if (paths.empty()) throw InvalidInput("spawn_from_paths: no paths");
  for (const auto& p : paths) {
    if (p.nodes.empty()) throw InvalidInput("spawn_from_paths: empty path");
  }
  plan.sources = paths;
  SimState s;
  for (int a = 0; a < params.population; ++a) {
    const auto source = static_cast<std::size_t>(a) % paths.size();
    const GlobalPath route = plan.route(source, a, params.seed);
    Rng rng(derive_seed(params.seed, {0xE7u, static_cast<std::uint64_t>(a)}));
    const double entry_time = params.entry_window > 0.0 ? rng.uniform(0.0, params.entry_window) : 0.0;
    const auto entry_step = static_cast<long long>(std::floor(entry_time / params.dt));
    s.pending.push_back(detail::make_agent(a, static_cast<long long>(source), route, params, entry_step));
  }
  std::stable_sort(s.pending.begin(), s.pending.end(), [](const Agent& a, const Agent& b) {
    return a.entry_step < b.entry_step || (a.entry_step == b.entry_step && a.id < b.id);
  });
  s.next_agent_id = params.population;
  s.plan = std::move(plan);
  return s;
}

/// One synchronous ORCA step. Velocities for all agents are computed from the
/// same snapshot, then positions and goal stacks are updated; finished agents
/// are removed and, with respawn on, replaced on a freshly diversified route.
inline SimState step(const SimState& state, const SimParams& params, unsigned jobs = 1) {
  SimState next = state;

  // Admit waiting agents whose entry time has come and whose spawn point is free.
  std::vector<Agent> still_waiting;
  for (auto& a : next.pending) {
    if (a.entry_step <= next.step && detail::spawn_clear(a, next.agents)) {
      a.goals.pop_reached(a.position);
      if (!a.goals.empty()) next.agents.push_back(std::move(a));
    } else {
      still_waiting.push_back(std::move(a));
    }
  }
  next.pending = std::move(still_waiting);

  const orca::ObstacleSet obstacles(next.obstacles);
  const std::vector<Agent>& snapshot = next.agents;
  std::vector<Vec2> velocities(snapshot.size());
  parallel_for(snapshot.size(), jobs, [&](std::size_t i) {
    const Agent& a = snapshot[i];
    const auto neighbors = find_neighbors(snapshot, i, params);
    const auto c = orca_halfplanes(a, neighbors, obstacles, params);
    velocities[i] = solve_velocity(c.lines, pref_velocity(a, params.dt), a.max_speed, c.obstacle_lines);
  });

  for (std::size_t i = 0; i < next.agents.size(); ++i) {
    Agent& a = next.agents[i];
    a.velocity = velocities[i];
    a.position += a.velocity * params.dt;
    a.goals.pop_reached(a.position);
  }

  ++next.step;
  next.time = static_cast<double>(next.step) * params.dt;

  std::vector<Agent> kept;
  kept.reserve(next.agents.size());
  next.finished.clear();
  for (auto& a : next.agents) {
    if (!a.goals.empty()) {
      kept.push_back(std::move(a));
      continue;
    }
    ++next.despawned;
    next.finished.push_back(a);
    if (params.respawn && next.plan && !next.plan->sources.empty()) {
      const long long id = next.next_agent_id++;
      const auto source = static_cast<std::size_t>(id) % next.plan->sources.size();
      const GlobalPath route = next.plan->route(source, id, params.seed);
      next.pending.push_back(detail::make_agent(id, static_cast<long long>(source), route, params, next.step));
    }
  }
  next.agents = std::move(kept);
  return next;
}

struct TrajectoryRow {
  long long step = 0;
  long long agent_id = 0;
  Vec2 position;
  Vec2 velocity;

  bool operator==(const TrajectoryRow&) const = default;
};

/// Rows for the active agents and for those that finished in the last step, by id.
inline void append_rows(const SimState& s, std::vector<TrajectoryRow>& rows) {
  const std::size_t first = rows.size();
  for (const auto& a : s.agents) rows.push_back({s.step, a.id, a.position, a.velocity});
  for (const auto& a : s.finished) rows.push_back({s.step, a.id, a.position, a.velocity});
  std::sort(rows.begin() + static_cast<std::ptrdiff_t>(first), rows.end(),
            [](const TrajectoryRow& a, const TrajectoryRow& b) { return a.agent_id < b.agent_id; });
}

/// Runs `steps` steps. Rows are recorded for the initial state (step 0) and
/// after every step; an agent's final row is the position where its last goal
/// was reached.
inline std::vector<TrajectoryRow> run(SimState& state, const SimParams& params, long long steps,
                                      unsigned jobs = 1) {
  std::vector<TrajectoryRow> rows;
  append_rows(state, rows);
  for (long long k = 0; k < steps; ++k) {
    state = step(state, params, jobs);
    append_rows(state, rows);
  }
  return rows;
}

inline constexpr std::string_view kTrajectoryHeader = "step,agent_id,x,y,vx,vy";

inline void save_trajectories(const std::vector<TrajectoryRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << kTrajectoryHeader << '\n';
  for (const auto& r : rows) {
    out << r.step << ',' << r.agent_id << ',' << csv::fmt(r.position.x) << ',' << csv::fmt(r.position.y) << ','
        << csv::fmt(r.velocity.x) << ',' << csv::fmt(r.velocity.y) << '\n';
  }
}

inline std::vector<TrajectoryRow> load_trajectories(const std::string& path) {
  std::vector<TrajectoryRow> rows;
  csv::read_file(path, kTrajectoryHeader, [&](const auto& f, std::size_t line) {
    TrajectoryRow r;
    r.step = csv::parse_int(f[0], line, "step");
    r.agent_id = csv::parse_int(f[1], line, "agent_id");
    r.position = {csv::parse_double(f[2], line, "x"), csv::parse_double(f[3], line, "y")};
    r.velocity = {csv::parse_double(f[4], line, "vx"), csv::parse_double(f[5], line, "vy")};
    rows.push_back(r);
  });
  return rows;
}

}  // namespace crowdsynth
