#pragma once

// Pipeline configuration: one JSON document, every tunable with a default,
// unknown keys rejected, `section.key=value` overrides applied before parsing.

#include <cmath>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "crowdsynth/core.hpp"
#include "crowdsynth/flow.hpp"
#include "crowdsynth/grid.hpp"
#include "crowdsynth/pathgen.hpp"
#include "crowdsynth/scene.hpp"
#include "crowdsynth/score.hpp"
#include "crowdsynth/sim.hpp"
#include "crowdsynth/spectral.hpp"

namespace crowdsynth {

using json = nlohmann::json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class PathSource { kExtracted, kRandom };

struct PipelineConfig {
  // input
  std::string frames;  // exemplar frame directory
  double fps = 25.0;

  FlowParams flow;
  int cells_x = 40;
  int cells_y = 40;

  int min_support = 10;
  std::optional<double> support_per_frame;  // when set, min_support = ceil(rate · frame pairs)

  DominantOptions dominant;

  double angle_tol = kPi / 8.0;
  PathSource path_source = PathSource::kExtracted;
  int random_paths = 8;

  bool diversify = true;
  DiversifyParams diversify_params{DiversifyMethod::kCircle, 0.5, 1, 0.125};
  int samples_per_segment = 4;

  SimParams sim;
  std::optional<double> duration;  // seconds; defaults to the exemplar's length
  double warmup = 0.0;             // seconds simulated before recording starts

  std::vector<Obstacle> obstacles;

  std::optional<Homography> homography;  // image -> world
  double metres_per_pixel = 0.05;

  RenderSpec render;
  std::optional<double> render_fps;  // defaults to input fps
  int width = 0;                     // 0: take from the exemplar
  int height = 0;

  int window = 60;
  int stride = 30;
  EmptyWindowPolicy empty_policy = EmptyWindowPolicy::kPenalizeOneSided;

  std::string output = "out";
  bool overlays = true;
  int chunks = 1;

  std::vector<int> populations{15, 30};  // experiment grid

  unsigned jobs = 1;

  Homography image_to_world() const { return homography ? *homography : Homography::scale(metres_per_pixel); }
};

namespace detail {

/// Reads known keys out of one JSON object and complains about leftovers.
class Section {
 public:
  Section(const json& j, std::string name) : j_(j), name_(std::move(name)) {
    if (!j_.is_object()) throw ConfigError("config: '" + name_ + "' must be an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config: " + qualified(key) + ": " + e.what());
    }
  }

  template <typename T>
  void get(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) return;
    T v{};
    get(key, v);
    out = v;
  }

  bool has(const char* key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }
  const json& raw(const char* key) const { return j_.at(key); }
  std::string qualified(const char* key) const { return name_.empty() ? key : name_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError("config: unknown key '" + qualified(k.c_str()) + "'");
    }
  }

 private:
  const json& j_;
  std::string name_;
  std::set<std::string> seen_;
};

}  // namespace detail

/// Applies `a.b.c=value` to the document. The value is parsed as JSON when it
/// is valid JSON, otherwise taken as a string.
inline void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty component");
    if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

inline PipelineConfig parse_config(const json& doc) {
  using detail::Section;
  PipelineConfig c;
  Section top(doc, "");
  auto sub = [&](const char* name) -> json {
    if (!top.has(name)) return json::object();
    return top.raw(name);
  };

  const json input = sub("input");
  {
    Section s(input, "input");
    s.get("frames", c.frames);
    s.get("fps", c.fps);
    s.finish();
  }
  const json flow = sub("flow");
  {
    Section s(flow, "flow");
    auto& f = c.flow;
    s.get("max_corners", f.max_corners);
    s.get("quality", f.quality);
    s.get("min_distance", f.min_distance);
    s.get("block_size", f.block_size);
    s.get("window", f.window);
    s.get("pyramid_levels", f.pyramid_levels);
    s.get("max_iterations", f.max_iterations);
    s.get("epsilon", f.epsilon);
    s.get("min_eigen", f.min_eigen);
    s.get("max_residual", f.max_residual);
    s.get("stride", f.stride);
    s.get("min_magnitude", f.min_magnitude);
    s.get("border", f.border);
    s.finish();
  }
  const json grid = sub("grid");
  {
    Section s(grid, "grid");
    s.get("cells_x", c.cells_x);
    s.get("cells_y", c.cells_y);
    s.finish();
  }
  const json prune = sub("prune");
  {
    Section s(prune, "prune");
    s.get("min_support", c.min_support);
    s.get("support_per_frame", c.support_per_frame);
    s.finish();
  }
  const json cl = sub("cluster");
  {
    Section s(cl, "cluster");
    auto& o = c.dominant.cluster;
    s.get("k_nn", o.k_nn);
    s.get("k_max", o.k_max);
    s.get("restarts", o.restarts);
    s.get("seed", o.seed);
    s.get("eigengap_guard", o.eigengap_guard);
    s.get("min_cluster_size", c.dominant.min_cluster_size);
    s.finish();
  }
  const json paths = sub("paths");
  {
    Section s(paths, "paths");
    s.get("angle_tol", c.angle_tol);
    std::string src = "extracted";
    s.get("source", src);
    if (src == "extracted") c.path_source = PathSource::kExtracted;
    else if (src == "random") c.path_source = PathSource::kRandom;
    else throw ConfigError("config: paths.source must be 'extracted' or 'random'");
    s.get("random_count", c.random_paths);
    s.finish();
  }
  const json div = sub("diversify");
  {
    Section s(div, "diversify");
    s.get("enabled", c.diversify);
    std::string method = to_string(c.diversify_params.method);
    s.get("method", method);
    try {
      c.diversify_params.method = parse_diversify_method(method);
    } catch (const InvalidInput& e) {
      throw ConfigError(std::string("config: diversify.method: ") + e.what());
    }
    s.get("size", c.diversify_params.size);
    std::optional<double> coupling;
    s.get("radius_coupling", coupling);
    c.diversify_params.radius_coupling = coupling ? *coupling : c.diversify_params.size / 4.0;
    s.get("samples_per_segment", c.samples_per_segment);
    s.finish();
  }
  const json sim = sub("sim");
  {
    Section s(sim, "sim");
    auto& p = c.sim;
    s.get("dt", p.dt);
    s.get("time_horizon", p.time_horizon);
    s.get("neighbor_dist", p.neighbor_dist);
    s.get("max_neighbors", p.max_neighbors);
    s.get("obstacle_time_horizon", p.obstacle_time_horizon);
    s.get("population", p.population);
    std::string mode = to_string(p.goal_mode);
    s.get("goal_mode", mode);
    try {
      p.goal_mode = parse_goal_mode(mode);
    } catch (const InvalidInput& e) {
      throw ConfigError(std::string("config: sim.goal_mode: ") + e.what());
    }
    s.get("respawn", p.respawn);
    s.get("seed", p.seed);
    s.get("radius", p.radius);
    s.get("pref_speed", p.pref_speed);
    s.get("max_speed", p.max_speed);
    s.get("tight_factor", p.tight_factor);
    s.get("loose_factor", p.loose_factor);
    s.get("entry_window", p.entry_window);
    s.get("duration", c.duration);
    s.get("warmup", c.warmup);
    s.finish();
  }
  if (top.has("obstacles")) {
    const json& obs = top.raw("obstacles");
    if (!obs.is_array()) throw ConfigError("config: obstacles must be an array of polygons");
    for (std::size_t k = 0; k < obs.size(); ++k) {
      Obstacle o;
      try {
        for (const auto& v : obs[k]) o.vertices.push_back({v.at(0).get<double>(), v.at(1).get<double>()});
        o.validate();
      } catch (const std::exception& e) {
        throw ConfigError("config: obstacles[" + std::to_string(k) + "]: " + e.what());
      }
      c.obstacles.push_back(std::move(o));
    }
  }
  const json scene = sub("scene");
  {
    Section s(scene, "scene");
    std::optional<std::vector<double>> h;
    s.get("homography", h);
    if (h) {
      try {
        c.homography = Homography::from_row_major(*h);
      } catch (const InvalidInput& e) {
        throw ConfigError(std::string("config: scene.homography: ") + e.what());
      }
    }
    s.get("metres_per_pixel", c.metres_per_pixel);
    s.get("width", c.width);
    s.get("height", c.height);
    s.finish();
  }
  const json render = sub("render");
  {
    Section s(render, "render");
    auto& r = c.render;
    s.get("fps", c.render_fps);
    s.get("agent_color", r.agent_color);
    s.get("rim_color", r.rim_color);
    s.get("background", r.background);
    s.get("agent_draw_radius", r.agent_draw_radius);
    s.get("rgb", r.rgb);
    s.finish();
  }
  const json sc = sub("score");
  {
    Section s(sc, "score");
    s.get("window", c.window);
    s.get("stride", c.stride);
    std::string policy = "penalize";
    s.get("empty_windows", policy);
    if (policy == "penalize") c.empty_policy = EmptyWindowPolicy::kPenalizeOneSided;
    else if (policy == "ignore") c.empty_policy = EmptyWindowPolicy::kIgnoreEmpty;
    else throw ConfigError("config: score.empty_windows must be 'penalize' or 'ignore'");
    s.finish();
  }
  const json out = sub("output");
  {
    Section s(out, "output");
    s.get("dir", c.output);
    s.get("overlays", c.overlays);
    s.get("chunks", c.chunks);
    s.finish();
  }
  const json exp = sub("experiment");
  {
    Section s(exp, "experiment");
    s.get("populations", c.populations);
    s.finish();
  }
  top.get("jobs", c.jobs);
  top.finish();

  // component invariants
  try {
    c.flow.validate();
    c.sim.validate();
    c.diversify_params.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.render.agent_radius_m = c.sim.radius;
  c.diversify_params.seed = c.sim.seed;
  if (!(c.fps > 0.0)) throw ConfigError("config: input.fps must be > 0");
  if (c.render_fps && !(*c.render_fps > 0.0)) throw ConfigError("config: render.fps must be > 0");
  if (c.cells_x < 1 || c.cells_y < 1) throw ConfigError("config: grid cells must be >= 1");
  if (c.min_support < 0) throw ConfigError("config: prune.min_support must be >= 0");
  if (c.dominant.cluster.k_nn < 1 || c.dominant.cluster.k_max < 1)
    throw ConfigError("config: cluster.k_nn and cluster.k_max must be >= 1");
  if (!(c.angle_tol > 0.0)) throw ConfigError("config: paths.angle_tol must be > 0");
  if (c.random_paths < 1) throw ConfigError("config: paths.random_count must be >= 1");
  if (c.samples_per_segment < 1) throw ConfigError("config: diversify.samples_per_segment must be >= 1");
  if (c.duration && *c.duration < 0.0) throw ConfigError("config: sim.duration must be >= 0");
  if (c.warmup < 0.0) throw ConfigError("config: sim.warmup must be >= 0");
  if (!(c.metres_per_pixel > 0.0)) throw ConfigError("config: scene.metres_per_pixel must be > 0");
  if (c.width < 0 || c.height < 0) throw ConfigError("config: scene width/height must be >= 0");
  if (!(c.stride >= 1 && c.window >= c.stride)) throw ConfigError("config: score needs window >= stride >= 1");
  if (c.chunks < 1) throw ConfigError("config: output.chunks must be >= 1");
  for (int p : c.populations)
    if (p < 1) throw ConfigError("config: experiment.populations entries must be >= 1");
  if (c.jobs < 1) c.jobs = 1;
  return c;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config: " + path + ": " + e.what());
  }
}

/// Loads the file (or an empty document when `path` is empty) and applies
/// the overrides in order.
inline PipelineConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  json doc = path.empty() ? json::object() : read_json_file(path);
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_config(doc);
}

/// Effective configuration with every default filled in, minus the output
/// directory so that runs into different directories compare equal.
inline json to_json(const PipelineConfig& c) {
  json j;
  j["input"] = {{"frames", c.frames}, {"fps", c.fps}};
  const auto& f = c.flow;
  j["flow"] = {{"max_corners", f.max_corners},     {"quality", f.quality},
               {"min_distance", f.min_distance},   {"block_size", f.block_size},
               {"window", f.window},               {"pyramid_levels", f.pyramid_levels},
               {"max_iterations", f.max_iterations}, {"epsilon", f.epsilon},
               {"min_eigen", f.min_eigen},         {"max_residual", f.max_residual},
               {"stride", f.stride},               {"min_magnitude", f.min_magnitude},
               {"border", f.border}};
  j["grid"] = {{"cells_x", c.cells_x}, {"cells_y", c.cells_y}};
  j["prune"] = {{"min_support", c.min_support},
                {"support_per_frame", c.support_per_frame ? json(*c.support_per_frame) : json(nullptr)}};
  const auto& o = c.dominant.cluster;
  j["cluster"] = {{"k_nn", o.k_nn},       {"k_max", o.k_max},
                  {"restarts", o.restarts}, {"seed", o.seed},
                  {"eigengap_guard", o.eigengap_guard}, {"min_cluster_size", c.dominant.min_cluster_size}};
  j["paths"] = {{"angle_tol", c.angle_tol},
                {"source", c.path_source == PathSource::kRandom ? "random" : "extracted"},
                {"random_count", c.random_paths}};
  j["diversify"] = {{"enabled", c.diversify},
                    {"method", to_string(c.diversify_params.method)},
                    {"size", c.diversify_params.size},
                    {"radius_coupling", c.diversify_params.radius_coupling},
                    {"samples_per_segment", c.samples_per_segment}};
  const auto& p = c.sim;
  j["sim"] = {{"dt", p.dt},
              {"time_horizon", p.time_horizon},
              {"neighbor_dist", p.neighbor_dist},
              {"max_neighbors", p.max_neighbors},
              {"obstacle_time_horizon", p.obstacle_time_horizon},
              {"population", p.population},
              {"goal_mode", to_string(p.goal_mode)},
              {"respawn", p.respawn},
              {"seed", p.seed},
              {"radius", p.radius},
              {"pref_speed", p.pref_speed},
              {"max_speed", p.max_speed},
              {"tight_factor", p.tight_factor},
              {"loose_factor", p.loose_factor},
              {"entry_window", p.entry_window},
              {"duration", c.duration ? json(*c.duration) : json(nullptr)},
              {"warmup", c.warmup}};
  json obs = json::array();
  for (const auto& ob : c.obstacles) {
    json poly = json::array();
    for (const auto& v : ob.vertices) poly.push_back({v.x, v.y});
    obs.push_back(poly);
  }
  j["obstacles"] = obs;
  json h = nullptr;
  if (c.homography) {
    h = json::array();
    for (const auto& row : c.homography->matrix())
      for (double v : row) h.push_back(v);
  }
  j["scene"] = {{"homography", h}, {"metres_per_pixel", c.metres_per_pixel}, {"width", c.width}, {"height", c.height}};
  j["render"] = {{"fps", c.render_fps ? json(*c.render_fps) : json(nullptr)},
                 {"agent_color", c.render.agent_color},
                 {"rim_color", c.render.rim_color},
                 {"background", c.render.background},
                 {"agent_draw_radius", c.render.agent_draw_radius},
                 {"rgb", c.render.rgb}};
  j["score"] = {{"window", c.window},
                {"stride", c.stride},
                {"empty_windows", c.empty_policy == EmptyWindowPolicy::kIgnoreEmpty ? "ignore" : "penalize"}};
  j["output"] = {{"overlays", c.overlays}, {"chunks", c.chunks}};
  j["experiment"] = {{"populations", c.populations}};
  return j;
}

}  // namespace crowdsynth
