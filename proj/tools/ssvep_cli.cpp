#include <fmt/format.h>

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <numeric>

#include "ssvep/errors.hpp"
#include "ssvep/harness.hpp"
#include "ssvep/io.hpp"
#include "ssvep/session.hpp"

using namespace ssvep;

namespace {

ExperimentConfig config_from(const std::string& path) {
  if (path.empty()) {
    ExperimentConfig cfg;
    resolve_course(cfg);
    return cfg;
  }
  return load_config(path);
}

std::vector<std::uint64_t> read_seeds(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open seeds file " + path);
  std::vector<std::uint64_t> seeds;
  std::string tok;
  while (in >> tok) {
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw InvalidArgument("bad seed '" + tok + "' in " + path);
    }
  }
  if (seeds.empty()) throw InvalidArgument("seeds file " + path + " is empty");
  return seeds;
}

void print_run(const RunOutcome& o) {
  const auto& r = o.report;
  fmt::print("seed {}: {} ppv {} tp_c {:.2f}/min fp_c {:.2f}/min fp_nc {:.2f}/min time {}\n", o.seed,
             to_string(o.state.phase), r.ppv ? fmt::format("{:.1f}%", *r.ppv * 100) : "n/a",
             r.tp_c_rate, r.fp_c_rate, r.fp_nc_rate,
             r.time_to_completion ? fmt::format("{:.2f}s", *r.time_to_completion) : "n/a");
  if (!o.dir.empty()) fmt::print("artifacts: {}\n", o.dir.string());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulated SSVEP navigation experiments"};
  app.require_subcommand(1);

  std::string config_path, out_dir, seeds_file, presets_out;
  std::uint64_t seed = 0, seed_base = 0;
  int runs = 0, port = -1;
  unsigned threads = 0;

  auto* run = app.add_subcommand("run", "one closed-loop run");
  run->add_option("--config", config_path, "experiment config (JSON)");
  auto* run_seed = run->add_option("--seed", seed, "run seed");
  auto* run_out = run->add_option("--out", out_dir, "output directory");

  auto* batch = app.add_subcommand("batch", "independent seeded runs plus a summary table");
  batch->add_option("--config", config_path, "experiment config (JSON)");
  batch->add_option("--runs", runs, "number of runs")->check(CLI::PositiveNumber);
  auto* seeds_opt = batch->add_option("--seeds", seeds_file, "file of whitespace separated seeds");
  auto* base_opt = batch->add_option("--seed-base", seed_base, "first seed; runs use base, base+1, ...");
  seeds_opt->excludes(base_opt);
  auto* batch_out = batch->add_option("--out", out_dir, "output directory");
  batch->add_option("--threads", threads, "worker threads (0: hardware concurrency)");

  auto* serve = app.add_subcommand("serve", "live session over WebSocket");
  serve->add_option("--config", config_path, "experiment config (JSON)");
  serve->add_option("--port", port, "listen port (0: any free port)")->check(CLI::Range(0, 65535));
  auto* serve_seed = serve->add_option("--seed", seed, "run seed");
  auto* serve_out = serve->add_option("--out", out_dir, "output directory");

  auto* tune = app.add_subcommand("calibrate-presets", "tune the subject presets and write the presets file");
  tune->add_option("--config", config_path, "base experiment config (JSON)");
  tune->add_option("--runs", runs, "runs per grid point")->check(CLI::PositiveNumber);
  tune->add_option("--seed-base", seed_base, "first tuning seed");
  tune->add_option("--out", presets_out, "presets file to write")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    ExperimentConfig cfg = config_from(config_path);

    if (*run) {
      if (*run_seed) cfg.seed = seed;
      if (*run_out) cfg.out_dir = out_dir;
      const RunOutcome o = run_single(cfg, cfg.seed, cfg.out_dir);
      print_run(o);
      return 0;
    }

    if (*batch) {
      if (*batch_out) cfg.out_dir = out_dir;
      std::vector<std::uint64_t> seeds;
      if (*seeds_opt) {
        seeds = read_seeds(seeds_file);
        if (runs > 0 && static_cast<std::size_t>(runs) < seeds.size()) seeds.resize(runs);
      } else {
        const std::uint64_t first = *base_opt ? seed_base : cfg.seed;
        seeds.resize(runs > 0 ? runs : cfg.runs);
        std::iota(seeds.begin(), seeds.end(), first);
      }
      const BatchResult b = run_batch(cfg, seeds, cfg.out_dir, threads);
      for (const auto& f : b.failures) fmt::print(stderr, "{}\n", f);
      if (!b.summary) return 1;
      std::vector<std::string> names;
      for (const auto& r : b.runs)
        if (r) names.push_back(fmt::format("seed {}", r->seed));
      fmt::print("{}", format_summary_table(names, b.reports(), *b.summary));
      if (!cfg.out_dir.empty()) fmt::print("summary: {}\n", (std::filesystem::path(cfg.out_dir) / "summary.json").string());
      return b.failures.empty() ? 0 : 1;
    }

    if (*serve) {
      cfg.mode = Mode::Live;
      cfg.realtime = true;
      cfg.runs = 1;
      if (port >= 0) cfg.live.port = port;
      if (*serve_seed) cfg.seed = seed;
      if (*serve_out) cfg.out_dir = out_dir;
      const SessionResult r = serve_session(cfg, cfg.seed, [](unsigned short p) {
        fmt::print("listening on ws://127.0.0.1:{}\n", p);
        std::fflush(stdout);
      });
      if (r.outcome) print_run(*r.outcome);
      return 0;
    }

    if (*tune) {
      std::vector<std::uint64_t> seeds(runs > 0 ? runs : 30);
      std::iota(seeds.begin(), seeds.end(), seed_base > 0 ? seed_base : 9000);
      const PresetTuning t = tune_presets(cfg, seeds);
      for (const auto& line : t.log) fmt::print("{}\n", line);
      fmt::print("experienced: gain {:.2f} ppv {:.3f} completion {:.2f}\n", t.experienced.harmonic_gains[0],
                 t.experienced_summary.ppv.mean, t.experienced_summary.completion_fraction);
      fmt::print("naive: gain {:.2f} ppv {:.3f} completion {:.2f}\n", t.naive.harmonic_gains[0],
                 t.naive_summary.ppv.mean, t.naive_summary.completion_fraction);
      write_text(presets_out, presets_to_json({t.experienced, t.naive, SubjectProfile::noiseless_ideal()}));
      fmt::print("wrote {}\n", presets_out);
      return 0;
    }
  } catch (const ConfigError& e) {
    fmt::print(stderr, "{}\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
