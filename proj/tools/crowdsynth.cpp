// crowdsynth: analyze an exemplar crowd video, synthesize and render a
// matching virtual crowd, and score the two against each other.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "crowdsynth/fixtures.hpp"
#include "crowdsynth/pipeline.hpp"

namespace cs = crowdsynth;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  unsigned jobs = 0;

  cs::PipelineConfig load() const {
    cs::PipelineConfig c = cs::load_config(config, overrides);
    if (jobs > 0) c.jobs = jobs;
    return c;
  }
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("-c,--config", c.config, "JSON config file");
  app->add_option("--set", c.overrides, "override a config value, e.g. --set sim.population=20")->take_all();
  app->add_option("-j,--jobs", c.jobs, "worker threads (default: config value)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Crowd analysis, synthesis, rendering and similarity scoring"};
  app.require_subcommand(1);

  Common common;
  std::string out;

  auto* analyze = app.add_subcommand("analyze", "extract motion vectors, dominant directions and global paths");
  add_common(analyze, common);
  analyze->add_option("-o,--out", out, "output directory (default: <output.dir>/analyze)");

  std::string paths_file;
  auto* synth = app.add_subcommand("synthesize", "simulate agents on the extracted paths");
  add_common(synth, common);
  synth->add_option("-p,--paths", paths_file, "paths CSV (default: <output.dir>/analyze/paths.csv)");
  synth->add_option("-o,--out", out, "output directory (default: <output.dir>/synthesize)");

  std::string traj_file;
  auto* rend = app.add_subcommand("render", "render trajectories into a frame directory");
  add_common(rend, common);
  rend->add_option("-t,--trajectories", traj_file, "trajectory CSV (default: <output.dir>/synthesize/trajectories.csv)");
  rend->add_option("-o,--out", out, "frame directory (default: <output.dir>/render)");

  std::string frames_a, frames_b;
  auto* sc = app.add_subcommand("score", "compare two frame directories with histograms of motion");
  add_common(sc, common);
  sc->add_option("a", frames_a, "reference frame directory")->required();
  sc->add_option("b", frames_b, "compared frame directory")->required();
  sc->add_option("-o,--out", out, "report directory (default: <output.dir>/score)");

  bool grid = false;
  auto* pipe = app.add_subcommand("pipeline", "run analyze, synthesize, render and score");
  add_common(pipe, common);
  pipe->add_flag("--grid", grid, "sweep populations x goal modes x path kinds instead of a single run");

  std::string fixture_kind = "two-stream";
  std::string fixture_dir;
  double fixture_noise = cs::fixtures::TwoStreamSpec{}.noise;
  auto* fix = app.add_subcommand("fixture", "write a procedural test video");
  fix->add_option("kind", fixture_kind, "two-stream or disks")->check(CLI::IsMember({"two-stream", "disks"}));
  fix->add_option("-o,--out", fixture_dir, "frame directory")->required();
  fix->add_option("--noise", fixture_noise, "two-stream sensor noise std-dev in grey levels")->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fix) {
      cs::fixtures::TwoStreamSpec spec;
      spec.noise = fixture_noise;
      cs::FrameSequence seq = fixture_kind == "two-stream"
                                  ? cs::fixtures::two_stream(spec)
                                  : cs::fixtures::translating_disks(128, 128, 64, {2.0, 0.0}, 12, 9.0, 3).video;
      cs::io::write_frame_dir(seq, fixture_dir);
      std::cout << "wrote " << seq.size() << " frames to " << fixture_dir << '\n';
      return 0;
    }

    cs::PipelineConfig cfg;
    try {
      cfg = common.load();
    } catch (const std::exception& e) {
      throw cs::StageError("config", e.what());
    }
    const cs::fs::path base = cfg.output;

    if (*analyze) {
      const auto r = cs::cmd_analyze(cfg, out.empty() ? base / "analyze" : cs::fs::path(out));
      std::cout << r.vectors.size() << " vectors, " << r.directions.size() << " dominant directions, "
                << r.paths.size() << " paths\n";
    } else if (*synth) {
      const auto r = cs::cmd_synthesize(cfg, paths_file.empty() ? base / "analyze" / "paths.csv" : cs::fs::path(paths_file),
                                        out.empty() ? base / "synthesize" : cs::fs::path(out));
      std::cout << r.rows.size() << " trajectory rows over " << r.steps << " steps\n";
    } else if (*rend) {
      const auto seq =
          cs::cmd_render(cfg, traj_file.empty() ? base / "synthesize" / "trajectories.csv" : cs::fs::path(traj_file),
                         out.empty() ? base / "render" : cs::fs::path(out));
      std::cout << "rendered " << seq.size() << " frames\n";
    } else if (*sc) {
      const auto r = cs::cmd_score(cfg, frames_a, frames_b, out.empty() ? base / "score" : cs::fs::path(out));
      std::cout << cs::score_text(r.report);
    } else if (*pipe) {
      if (grid) {
        for (const auto& s : cs::cmd_grid(cfg)) {
          std::cout << s.name() << " score=" << cs::csv::fmt(s.report.score) << '\n';
        }
      } else {
        const auto r = cs::cmd_pipeline(cfg);
        std::cout << cs::score_text(r.report);
      }
    }
  } catch (const cs::StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
