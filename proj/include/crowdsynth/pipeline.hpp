#pragma once

// The four pipeline stages and the full run. Each stage reads and writes the
// documented files so it can be run on its own or chained.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "crowdsynth/config.hpp"
#include "crowdsynth/flow.hpp"
#include "crowdsynth/grid.hpp"
#include "crowdsynth/image_io.hpp"
#include "crowdsynth/pathgen.hpp"
#include "crowdsynth/scene.hpp"
#include "crowdsynth/score.hpp"
#include "crowdsynth/sim.hpp"
#include "crowdsynth/spectral.hpp"

namespace crowdsynth {

namespace fs = std::filesystem;

/// Error carrying the stage it came from; the CLI prints it as "<stage>: <what>".
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

template <typename Fn>
auto run_stage(const std::string& stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

inline std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 15];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return os.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

// ---------------------------------------------------------------- analyze

struct AnalyzeResult {
  std::vector<MotionVector> vectors;
  std::vector<DominantDirection> directions;
  std::vector<GlobalPath> paths;
  int width = 0;
  int height = 0;
  std::size_t frames = 0;
};

inline AnalyzeResult analyze_sequence(const FrameSequence& seq, const PipelineConfig& cfg) {
  AnalyzeResult r;
  r.width = seq.width();
  r.height = seq.height();
  r.frames = seq.size();
  r.vectors = extract_flow(seq, cfg.flow, cfg.jobs);
  const GridSpec grid{cfg.cells_x, cfg.cells_y, r.width, r.height};
  const auto field = bin_vectors(r.vectors, grid);
  const std::size_t pairs = seq.size() > 1 ? (seq.size() - 1) / static_cast<std::size_t>(cfg.flow.stride) : 0;
  const int support = cfg.support_per_frame ? per_frame_support(*cfg.support_per_frame, pairs) : cfg.min_support;
  const auto pruned = prune(field, support);
  r.directions = dominant_directions(pruned, cfg.dominant, cfg.jobs);
  r.paths = r.directions.empty() ? std::vector<GlobalPath>{} : grow_paths(r.directions, grid, cfg.angle_tol);
  return r;
}

inline RgbImage render_paths(const std::vector<GlobalPath>& paths, int width, int height,
                             const GrayImage* background = nullptr) {
  RgbImage img = background ? to_rgb(*background) : RgbImage(width, height, {255, 255, 255});
  for (const auto& p : paths) {
    const Rgb color = draw::orientation_color(mean_segment_orientation(p));
    for (std::size_t k = 1; k < p.nodes.size(); ++k) {
      const bool last = k + 1 == p.nodes.size();
      if (last) draw::arrow(img, p.nodes[k - 1], p.nodes[k], color, 2.0);
      else draw::line(img, p.nodes[k - 1], p.nodes[k], color, 2.0);
    }
  }
  return img;
}

inline void write_analysis(const AnalyzeResult& r, const FrameSequence& seq, const fs::path& dir, bool overlays,
                           const PipelineConfig& cfg) {
  fs::create_directories(dir);
  save_vectors(r.vectors, (dir / "vectors.csv").string());
  save_directions(r.directions, (dir / "directions.csv").string());
  save_paths(r.paths, (dir / "paths.csv").string());
  if (!overlays) return;
  const GrayImage* bg = seq.frames.empty() ? nullptr : &seq.frames.front();
  const GridSpec grid{cfg.cells_x, cfg.cells_y, r.width, r.height};
  io::write_png(render_cell_overlay(prune(bin_vectors(r.vectors, grid), 0), bg), dir / "cells.png");
  io::write_png(render_directions(r.directions, r.width, r.height, 1.5 * grid.cell_width(), bg), dir / "directions.png");
  io::write_png(render_paths(r.paths, r.width, r.height, bg), dir / "paths.png");
}

/// Analyze stage. With chunks > 1 every temporal chunk is analysed on its own
/// into chunk_NN/ and the whole clip result is written at the top level.
inline AnalyzeResult cmd_analyze(const PipelineConfig& cfg, const fs::path& out_dir) {
  return run_stage("analyze", [&] {
    if (cfg.frames.empty()) throw InvalidInput("input.frames is not set");
    const FrameSequence seq = io::read_frame_dir(cfg.frames, cfg.fps);
    if (seq.size() < 2) throw InvalidInput("need at least 2 frames in " + cfg.frames);
    AnalyzeResult r = analyze_sequence(seq, cfg);
    write_analysis(r, seq, out_dir, cfg.overlays, cfg);
    if (cfg.chunks > 1) {
      const std::size_t n = seq.size();
      for (int c = 0; c < cfg.chunks; ++c) {
        const std::size_t a = n * static_cast<std::size_t>(c) / cfg.chunks;
        const std::size_t b = n * static_cast<std::size_t>(c + 1) / cfg.chunks;
        if (b - a < 2) continue;
        FrameSequence part;
        part.fps = seq.fps;
        part.frames.assign(seq.frames.begin() + static_cast<std::ptrdiff_t>(a),
                           seq.frames.begin() + static_cast<std::ptrdiff_t>(b));
        std::ostringstream name;
        name << "chunk_" << std::setw(2) << std::setfill('0') << c;
        write_analysis(analyze_sequence(part, cfg), part, out_dir / name.str(), cfg.overlays, cfg);
      }
    }
    return r;
  });
}

// ------------------------------------------------------------- synthesize

/// Resolution and length of the target video: from the config if given,
/// otherwise from the exemplar frames.
struct SceneExtent {
  int width = 0;
  int height = 0;
  double fps = 25.0;
  double duration = 0.0;
};

inline SceneExtent scene_extent(const PipelineConfig& cfg) {
  SceneExtent e;
  e.width = cfg.width;
  e.height = cfg.height;
  e.fps = cfg.render_fps ? *cfg.render_fps : cfg.fps;
  std::size_t frames = 0;
  if ((e.width == 0 || e.height == 0 || !cfg.duration) && !cfg.frames.empty()) {
    const auto files = io::list_frames(cfg.frames);
    if (!files.empty()) {
      const GrayImage first = io::read_image(files.front());
      if (e.width == 0) e.width = first.width;
      if (e.height == 0) e.height = first.height;
      frames = files.size();
    }
  }
  if (e.width <= 0 || e.height <= 0) throw InvalidInput("scene size unknown: set scene.width/height or input.frames");
  e.duration = cfg.duration ? *cfg.duration : static_cast<double>(frames) / cfg.fps;
  if (!(e.duration > 0.0)) throw InvalidInput("duration unknown: set sim.duration or input.frames");
  return e;
}

struct SynthesisResult {
  std::vector<TrajectoryRow> rows;
  std::vector<AgentPath> routes;  // world metres
  long long steps = 0;
};

/// Runs the simulation on image-space source paths. Recording starts after
/// the warm-up so the first rendered frame already shows a populated scene.
inline SynthesisResult synthesize_paths(const std::vector<GlobalPath>& image_paths, const PipelineConfig& cfg,
                                        const SceneExtent& extent) {
  std::vector<GlobalPath> sources = image_paths;
  if (cfg.path_source == PathSource::kRandom) {
    sources = random_border_paths(extent.width, extent.height, static_cast<std::size_t>(cfg.random_paths),
                                  derive_seed(cfg.sim.seed, {0x5Au}));
  }
  sources.erase(std::remove_if(sources.begin(), sources.end(), [](const GlobalPath& p) { return p.nodes.size() < 2; }),
                sources.end());
  if (sources.empty()) throw InvalidInput("no usable paths (need at least one path with 2 nodes)");
  const Homography h = cfg.image_to_world();
  const auto world = project_paths(sources, h);

  SpawnPlan plan;
  plan.diversify = cfg.diversify;
  plan.diversify_params = cfg.diversify_params;
  plan.samples_per_segment = cfg.samples_per_segment;
  SimState state = spawn_from_paths(world, cfg.sim, plan);
  state.obstacles = cfg.obstacles;

  const auto warm = static_cast<long long>(std::llround(cfg.warmup / cfg.sim.dt));
  for (long long k = 0; k < warm; ++k) state = step(state, cfg.sim, cfg.jobs);
  const auto steps = static_cast<long long>(std::ceil(extent.duration / cfg.sim.dt - 1e-9));

  SynthesisResult r;
  r.steps = steps;
  r.rows = run(state, cfg.sim, steps, cfg.jobs);
  for (auto& row : r.rows) row.step -= warm;

  std::vector<long long> ids;
  for (const auto& row : r.rows) ids.push_back(row.agent_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  for (long long id : ids) {
    const auto source = static_cast<std::size_t>(id) % world.size();
    r.routes.push_back({id, static_cast<long long>(source), state.plan->route(source, id, cfg.sim.seed)});
  }
  return r;
}

inline SynthesisResult cmd_synthesize(const PipelineConfig& cfg, const fs::path& paths_file, const fs::path& out_dir) {
  return run_stage("synthesize", [&] {
    std::vector<GlobalPath> paths;
    if (cfg.path_source == PathSource::kExtracted) {
      paths = load_paths(paths_file.string());
      if (paths.empty()) throw InvalidInput("paths file " + paths_file.string() + " contains no paths");
    }
    const SceneExtent extent = scene_extent(cfg);
    SynthesisResult r = synthesize_paths(paths, cfg, extent);
    fs::create_directories(out_dir);
    save_trajectories(r.rows, (out_dir / "trajectories.csv").string());
    save_agent_paths(r.routes, (out_dir / "agent_paths.csv").string());
    return r;
  });
}

// ----------------------------------------------------------------- render

inline FrameSequence cmd_render(const PipelineConfig& cfg, const fs::path& trajectories, const fs::path& frames_dir) {
  return run_stage("render", [&] {
    const SceneExtent extent = scene_extent(cfg);
    const auto rows = load_trajectories(trajectories.string());
    RenderSpec spec = cfg.render;
    spec.width = extent.width;
    spec.height = extent.height;
    spec.fps = extent.fps;
    FrameSequence seq = render(rows, cfg.image_to_world(), spec, cfg.sim.dt, extent.duration, cfg.jobs);
    if (fs::exists(frames_dir)) {
      for (const auto& old : io::list_frames(frames_dir)) fs::remove(old);
    }
    io::write_frame_dir(seq, frames_dir, spec.rgb);
    return seq;
  });
}

// ------------------------------------------------------------------ score

struct ScoreResult {
  MotionHistogramField a;
  MotionHistogramField b;
  ScoreReport report;
};

inline ScoreResult score_sequences(const FrameSequence& a, const FrameSequence& b, const PipelineConfig& cfg) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw InvalidInput("frame sets have different resolutions (" + std::to_string(a.width()) + "x" +
                       std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                       std::to_string(b.height()) + ")");
  }
  ScoreResult r;
  r.a = build_hom(extract_flow(a, cfg.flow, cfg.jobs), a.width(), a.height(), cfg.window, cfg.stride);
  r.b = build_hom(extract_flow(b, cfg.flow, cfg.jobs), b.width(), b.height(), cfg.window, cfg.stride);
  r.report = score(r.a, r.b, cfg.empty_policy);
  return r;
}

inline void write_score(const ScoreResult& r, const fs::path& out_dir, bool overlays) {
  fs::create_directories(out_dir);
  write_score_csv(r.report, r.a, (out_dir / "score.csv").string());
  write_text(out_dir / "score.txt", score_text(r.report));
  if (overlays) {
    io::write_png(render_hom(r.a), out_dir / "hom_a.png");
    io::write_png(render_hom(r.b), out_dir / "hom_b.png");
  }
}

/// Scores frame directory `b` against `a`. Both are read at the input fps
/// and pass through identical flow extraction.
inline ScoreResult cmd_score(const PipelineConfig& cfg, const fs::path& frames_a, const fs::path& frames_b,
                             const fs::path& out_dir) {
  return run_stage("score", [&] {
    const FrameSequence a = io::read_frame_dir(frames_a, cfg.fps);
    const FrameSequence b = io::read_frame_dir(frames_b, cfg.render_fps ? *cfg.render_fps : cfg.fps);
    ScoreResult r = score_sequences(a, b, cfg);
    write_score(r, out_dir, cfg.overlays);
    return r;
  });
}

// --------------------------------------------------------------- pipeline

/// Writes manifest.json: every regular file under `dir` (except the manifest
/// itself) with its SHA-256, sorted by relative path.
inline json write_manifest(const fs::path& dir) {
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), dir).generic_string();
    if (rel == "manifest.json") continue;
    files.push_back(rel);
  }
  std::sort(files.begin(), files.end());
  json m;
  m["artifacts"] = json::array();
  for (const auto& f : files) m["artifacts"].push_back({{"path", f}, {"sha256", sha256_file(dir / f)}});
  write_text(dir / "manifest.json", m.dump(2) + "\n");
  return m;
}

struct PipelineResult {
  ScoreReport report;
  json manifest;
};

/// analyze -> synthesize -> render -> score, each through its stage command
/// so the result equals chaining the subcommands by hand.
inline PipelineResult cmd_pipeline(const PipelineConfig& cfg) {
  const fs::path out = cfg.output;
  fs::create_directories(out);
  write_text(out / "config.json", to_json(cfg).dump(2) + "\n");
  cmd_analyze(cfg, out / "analyze");
  cmd_synthesize(cfg, out / "analyze" / "paths.csv", out / "synthesize");
  cmd_render(cfg, out / "synthesize" / "trajectories.csv", out / "render");
  PipelineResult r;
  r.report = cmd_score(cfg, cfg.frames, out / "render", out / "score").report;
  r.manifest = run_stage("pipeline", [&] { return write_manifest(out); });
  return r;
}

struct GridScenario {
  int population = 0;
  GoalMode goal_mode = GoalMode::kLoose;
  std::string paths;  // diversified, plain, random
  ScoreReport report;

  std::string name() const {
    return "p" + std::to_string(population) + "_" + to_string(goal_mode) + "_" + paths;
  }
};

/// Experiment sweep: populations x {tight, loose} x {diversified, plain,
/// random}, each scored against the exemplar. The exemplar is analysed once.
inline std::vector<GridScenario> cmd_grid(const PipelineConfig& base) {
  const fs::path out = base.output;
  fs::create_directories(out);
  cmd_analyze(base, out / "analyze");
  std::vector<GridScenario> results;
  for (int pop : base.populations) {
    for (GoalMode mode : {GoalMode::kTight, GoalMode::kLoose}) {
      for (const char* kind : {"diversified", "plain", "random"}) {
        GridScenario sc{pop, mode, kind, {}};
        PipelineConfig cfg = base;
        cfg.sim.population = pop;
        cfg.sim.goal_mode = mode;
        cfg.diversify = std::string(kind) == "diversified";
        cfg.path_source = std::string(kind) == "random" ? PathSource::kRandom : PathSource::kExtracted;
        const fs::path dir = out / "grid" / sc.name();
        cmd_synthesize(cfg, out / "analyze" / "paths.csv", dir / "synthesize");
        cmd_render(cfg, dir / "synthesize" / "trajectories.csv", dir / "render");
        sc.report = cmd_score(cfg, cfg.frames, dir / "render", dir / "score").report;
        results.push_back(sc);
      }
    }
  }
  std::ostringstream table;
  table << "population,goal_mode,paths,score,windows\n";
  for (const auto& sc : results) {
    table << sc.population << ',' << to_string(sc.goal_mode) << ',' << sc.paths << ',' << csv::fmt(sc.report.score)
        << ',' << sc.report.windows << '\n';
  }
  run_stage("pipeline", [&] {
    write_text(out / "grid.csv", table.str());
    return 0;
  });
  return results;
}

}  // namespace crowdsynth
