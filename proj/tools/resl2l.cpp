// Command-line front end: train / eval / baseline / probe / export.
//
// Exit codes: 0 success, 2 config error, 3 numerical divergence, 4 I/O error.
// RESL2L_OUT sets the default output root when --out-dir is not given.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "resl2l/baselines.hpp"
#include "resl2l/checkpoint.hpp"
#include "resl2l/metrics.hpp"
#include "resl2l/outer_loop.hpp"

namespace fs = std::filesystem;
using namespace resl2l;

namespace {

std::string iso_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

std::string default_out_root() {
  if (const char* env = std::getenv("RESL2L_OUT")) return env;
  return "runs";
}

struct CommonOpts {
  std::string preset;
  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  std::int64_t seed = -1;
  int iterations = -1;
  int workers = -1;

  void attach(CLI::App* app, bool with_preset = true) {
    if (with_preset) {
      app->add_option("--preset", preset, "experiment preset name");
      app->add_option("--config", config_path, "config JSON file");
    }
    app->add_option("--seed", seed, "master seed");
    app->add_option("--iterations", iterations, "outer-loop iterations");
    app->add_option("--workers", workers, "worker threads");
    app->add_option("--out-dir", out_dir, "output directory");
    app->add_option("--set", overrides, "dotted-key config override key=value")
        ->take_all();
  }

  // Layers flag values over a base config.
  RunConfig resolve(RunConfig cfg) const {
    if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
    if (iterations >= 0) cfg.iterations = iterations;
    if (workers >= 0) cfg.workers = workers;
    for (const auto& kv : overrides) apply_override(cfg, kv);
    validate(cfg);
    return cfg;
  }

  RunConfig base_config() const {
    if (!preset.empty() && !config_path.empty())
      throw ConfigError("give either --preset or --config, not both");
    if (!preset.empty()) return preset_config(preset);
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is) throw IoError("cannot open config file '" + config_path + "'");
      nlohmann::json j;
      is >> j;
      return j.get<RunConfig>();
    }
    throw ConfigError("a config source is required: --preset, --config, or --manifest");
  }
};

void write_manifest(const RunConfig& cfg, const fs::path& path) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write manifest '" + path.string() + "'");
  os << nlohmann::json(RunManifest::make(cfg, iso_now())).dump(2) << '\n';
  if (!os.flush()) throw IoError("failed writing manifest '" + path.string() + "'");
}

fs::path train_out_dir(const CommonOpts& o, const RunConfig& cfg) {
  if (!o.out_dir.empty()) return o.out_dir;
  const std::string label = cfg.preset.empty() ? "custom" : cfg.preset;
  return fs::path(default_out_root()) / (label + "-s" + std::to_string(cfg.seed));
}

// ---------- train ----------

int cmd_train(const CommonOpts& opts, const std::string& manifest_path,
              const std::string& resume_path) {
  RunConfig cfg;
  Checkpoint resume_ck;
  const bool resuming = !resume_path.empty();
  if (resuming) {
    resume_ck = load_checkpoint(resume_path);
    cfg = opts.resolve(resume_ck.cfg);
    resume_ck.cfg = cfg;
  } else if (!manifest_path.empty()) {
    std::ifstream is(manifest_path);
    if (!is) throw IoError("cannot open manifest '" + manifest_path + "'");
    nlohmann::json j;
    is >> j;
    cfg = opts.resolve(j.get<RunManifest>().resolve());
  } else {
    cfg = opts.resolve(opts.base_config());
  }

  const fs::path out = train_out_dir(opts, cfg);
  fs::create_directories(out);
  write_manifest(cfg, out / "manifest.json");

  MetricsWriter metrics((out / "metrics.jsonl").string(), /*include_wall=*/false);
  std::ofstream timings(out / "timings.jsonl", std::ios::trunc);
  const fs::path ck_path = out / "checkpoint.bin";

  TrainCallbacks cb;
  cb.on_metrics = [&](const MetricsRow& r) {
    metrics.write(r);
    timings << nlohmann::json{{"iter", r.iter}, {"wall_ms", r.wall_ms}}.dump() << '\n';
    timings.flush();
    std::printf("iter %6lld  loss %.6g  reg %.6g  rate %.2f Hz  (%.0f ms)\n",
                static_cast<long long>(r.iter), r.loss, r.reg_loss, r.mean_rate_hz,
                r.wall_ms);
    std::fflush(stdout);
  };
  cb.on_checkpoint = [&](const Checkpoint& c) { save_checkpoint(c, ck_path.string()); };

  TrainResult res;
  try {
    res = resuming ? meta_train_resume(resume_ck, cb) : meta_train(cfg, cb);
  } catch (const NumericalError& e) {
    // the divergence checkpoint was already flushed by the callback
    std::fprintf(stderr, "resl2l: diverged: %s\n", e.what());
    return 3;
  }

  save_checkpoint(Checkpoint{cfg, res.iteration, res.params, res.adam}, ck_path.string());
  std::printf("done: %s\n", out.string().c_str());
  return 0;
}

// ---------- eval ----------

nlohmann::json summary_json(const EvalSummary& s) {
  return {{"n_tasks", s.n_tasks},
          {"mean_mse", s.mean_mse},
          {"std_mse", s.std_mse},
          {"mean_rate_hz", s.mean_rate_hz},
          {"curve", s.curve},
          {"task_mse", s.task_mse}};
}

void write_eval_records(const RunConfig& cfg, const ReservoirParams& params,
                        int n_tasks, const fs::path& dir) {
  fs::create_directories(dir);
  const Reservoir res(NeuronConstants::from_config(cfg), params);
  for (int b = 0; b < n_tasks; ++b) {
    Rng task_rng =
        Rng::derive(cfg.seed, {stream_tag("eval-task"), static_cast<std::uint64_t>(b)});
    EpisodeRecord rec;
    if (cfg.experiment == "exp1") {
      const VolterraTask task = sample_volterra(task_rng, volterra_config(cfg));
      rec = eval_exp1_task(res, cfg, task, cfg.eval_chunks, /*full=*/true);
    } else {
      const AnyTask task = sample_task(cfg, task_rng);
      Rng ep_rng = Rng::derive(cfg.seed,
                               {stream_tag("eval-episode"), static_cast<std::uint64_t>(b)});
      rec = eval_exp2_task(res, cfg, task, ep_rng, /*full=*/true);
    }
    char name[32];
    std::snprintf(name, sizeof name, "task_%06d.rec", b);
    save_record(rec, (dir / name).string());
  }
}

int cmd_eval(const CommonOpts& opts, const std::string& ck_path, int n_tasks, bool random,
             const std::string& records_out, const std::string& out_path) {
  const Checkpoint ck = load_checkpoint(ck_path);
  const RunConfig cfg = opts.resolve(ck.cfg);
  if (n_tasks < 0) n_tasks = cfg.eval_n_tasks;

  const EvalSummary s =
      random ? random_reservoir_eval(cfg, n_tasks) : evaluate(cfg, ck.params, n_tasks);
  if (!records_out.empty()) {
    if (random) throw ConfigError("--records-out needs the trained params, drop --random");
    write_eval_records(cfg, ck.params, n_tasks, records_out);
  }

  const std::string text = summary_json(s).dump(2) + "\n";
  if (out_path.empty()) {
    std::fputs(text.c_str(), stdout);
  } else {
    std::ofstream os(out_path);
    if (!(os << text).flush()) throw IoError("cannot write summary '" + out_path + "'");
  }
  return 0;
}

// ---------- baseline ----------

int cmd_baseline(const CommonOpts& opts, const std::string& name,
                 const std::string& ck_path, int n_tasks, const std::string& out_path) {
  RunConfig cfg;
  ReservoirParams params;
  bool have_params = false;
  if (!ck_path.empty()) {
    const Checkpoint ck = load_checkpoint(ck_path);
    cfg = opts.resolve(ck.cfg);
    params = ck.params;
    have_params = true;
  } else {
    cfg = opts.resolve(opts.base_config());
  }
  if (n_tasks < 0) n_tasks = cfg.eval_n_tasks;

  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::trunc);
    if (!file) throw IoError("cannot write baseline output '" + out_path + "'");
    os = &file;
  }
  auto row = [&](std::int64_t iter, double loss, double reg, double rate) {
    nlohmann::json j = metrics_json({iter, loss, reg, rate, 0.0}, false);
    j["baseline"] = name;
    (*os) << j.dump() << '\n';
  };

  if (name == "random") {
    const EvalSummary s = random_reservoir_eval(cfg, n_tasks);
    row(0, s.mean_mse, s.std_mse, s.mean_rate_hz);
  } else if (name == "backprop") {
    const BaselineCurve c = backprop_baseline(cfg, n_tasks, cfg.seed);
    for (int s = 0; s < c.mean.size(); ++s) row(s, c.mean[s], c.stddev[s], 0.0);
  } else if (name == "ridge") {
    if (!have_params) {
      Rng init_rng = Rng::derive(cfg.seed, {stream_tag("init")});
      params = init_reservoir(cfg, init_rng);
    }
    const Reservoir res(NeuronConstants::from_config(cfg), params);
    for (int b = 0; b < n_tasks; ++b) {
      Rng task_rng =
          Rng::derive(cfg.seed, {stream_tag("eval-task"), static_cast<std::uint64_t>(b)});
      const AnyTask task = sample_task(cfg, task_rng);
      Rng ep_rng = Rng::derive(cfg.seed,
                               {stream_tag("eval-episode"), static_cast<std::uint64_t>(b)});
      const EpisodeRecord rec = eval_exp2_task(res, cfg, task, ep_rng, /*full=*/true);
      const RidgeResult r = ridge_fit_eval(rec);
      row(b, r.test_mse, r.train_mse, rec.mean_rate_hz());
    }
  } else {
    throw ConfigError("unknown baseline '" + name + "'; valid: ridge backprop random");
  }
  if (os == &file && !file.flush())
    throw IoError("failed writing baseline output '" + out_path + "'");
  return 0;
}

// ---------- probe ----------

int cmd_probe(const CommonOpts& opts, const std::string& ck_path, int grid_n,
              int warm_steps, std::uint64_t task_index, const std::string& out_path) {
  const Checkpoint ck = load_checkpoint(ck_path);
  const RunConfig cfg = opts.resolve(ck.cfg);
  if (grid_n < 1) throw ConfigError("--grid-n must be at least 1");
  if (cfg.experiment != "exp2")
    throw ConfigError("probe is defined for experiment-2 presets");

  const Reservoir res(NeuronConstants::from_config(cfg), ck.params);
  Rng task_rng = Rng::derive(cfg.seed, {stream_tag("eval-task"), task_index});
  const AnyTask task = sample_task(cfg, task_rng);
  Rng ep_rng = Rng::derive(cfg.seed, {stream_tag("eval-episode"), task_index});
  const Exp2Episode ep = make_exp2_episode(cfg, task, ep_rng);

  if (warm_steps < 0 || warm_steps > static_cast<int>(ep.y.size()))
    throw ConfigError("--warm-steps outside the episode");
  NetworkState state = res.make_state();
  double prev_target = 0.0;
  if (warm_steps > 0) {
    Exp2Episode head = ep;
    const int bins = cfg.bins_per_step();
    head.xs = ep.xs.leftCols(warm_steps);
    head.y = ep.y.head(warm_steps);
    head.raster = ep.raster.leftCols(static_cast<Eigen::Index>(warm_steps) * bins);
    forward_exp2_episode(res, cfg, head, state, SpikeMode::hard);
    prev_target = ep.y[warm_steps - 1];
  }

  // grid over the analog input channels; one row per point
  const auto ranges = channel_ranges(cfg);
  const int n_analog = cfg.n_channels() - 1;
  const Eigen::Index P = n_analog == 1 ? grid_n : static_cast<Eigen::Index>(grid_n) * grid_n;
  Mat grid(n_analog, P);
  auto coord = [&](int axis, int i) {
    const auto [lo, hi] = ranges[static_cast<size_t>(axis)];
    return grid_n == 1 ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (grid_n - 1);
  };
  if (n_analog == 1) {
    for (int i = 0; i < grid_n; ++i) grid(0, i) = coord(0, i);
  } else {
    Eigen::Index k = 0;
    for (int i = 0; i < grid_n; ++i)
      for (int j = 0; j < grid_n; ++j, ++k) {
        grid(0, k) = coord(0, i);
        grid(1, k) = coord(1, j);
      }
  }

  const ProbeResult pr = probe_internal_model(res, cfg, state, prev_target, grid,
                                              cfg.seed ^ 0x70726f6265ULL);
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::trunc);
    if (!file) throw IoError("cannot write probe output '" + out_path + "'");
    os = &file;
  }
  for (Eigen::Index k = 0; k < pr.predictions.size(); ++k) {
    for (int c = 0; c < n_analog; ++c) (*os) << pr.points(c, k) << ',';
    (*os) << pr.predictions[k] << '\n';
  }
  if (os == &file && !file.flush())
    throw IoError("failed writing probe output '" + out_path + "'");
  return 0;
}

// ---------- export ----------

int cmd_export(const std::string& record_path, const std::string& format,
               const std::string& out_path) {
  const EpisodeRecord rec = load_record(record_path);
  std::ostream* os = &std::cout;
  std::ofstream file;
  if (!out_path.empty()) {
    file.open(out_path, std::ios::trunc);
    if (!file) throw IoError("cannot write export output '" + out_path + "'");
    os = &file;
  }
  if (format == "jsonl") {
    export_record_jsonl(rec, *os);
  } else if (format == "csv") {
    // one row per readout step
    for (int s = 0; s < rec.n_steps(); ++s)
      (*os) << s << ',' << rec.predictions[static_cast<size_t>(s)] << ','
            << rec.targets[static_cast<size_t>(s)] << '\n';
  } else {
    throw ConfigError("unknown export format '" + format + "'; valid: jsonl csv");
  }
  if (os == &file && !file.flush())
    throw IoError("failed writing export output '" + out_path + "'");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spiking-reservoir learning-to-learn experiments"};
  app.require_subcommand(1);

  CommonOpts train_opts, eval_opts, baseline_opts, probe_opts;
  std::string manifest_path, resume_path;
  auto* train = app.add_subcommand("train", "meta-train a reservoir");
  train_opts.attach(train);
  train->add_option("--manifest", manifest_path, "rerun from a manifest file");
  train->add_option("--resume", resume_path, "continue from a checkpoint");

  std::string eval_ck, eval_records_out, eval_out;
  int eval_n_tasks = -1;
  bool eval_random = false;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on held-out tasks");
  eval_opts.attach(eval, /*with_preset=*/false);
  eval->add_option("--checkpoint", eval_ck, "checkpoint file")->required();
  eval->add_option("--n-tasks", eval_n_tasks, "number of held-out tasks");
  eval->add_flag("--random", eval_random, "score a fresh random reservoir instead");
  eval->add_option("--records-out", eval_records_out, "directory for full episode records");
  eval->add_option("--out", eval_out, "summary JSON path (default stdout)");

  std::string bl_name, bl_ck, bl_out;
  int bl_n_tasks = -1;
  auto* baseline = app.add_subcommand("baseline", "run a comparison system");
  baseline_opts.attach(baseline);
  baseline->add_option("--name", bl_name, "ridge | backprop | random")->required();
  baseline->add_option("--checkpoint", bl_ck, "reservoir checkpoint (ridge)");
  baseline->add_option("--n-tasks", bl_n_tasks, "number of tasks");
  baseline->add_option("--out", bl_out, "JSON-lines output path (default stdout)");

  std::string probe_ck, probe_out;
  int probe_grid_n = 20, probe_warm = 0;
  std::uint64_t probe_task = 0;
  auto* probe = app.add_subcommand("probe", "query the internal model on an input grid");
  probe_opts.attach(probe, /*with_preset=*/false);
  probe->add_option("--checkpoint", probe_ck, "checkpoint file")->required();
  probe->add_option("--grid-n", probe_grid_n, "grid points per input axis");
  probe->add_option("--warm-steps", probe_warm, "episode steps to run before probing");
  probe->add_option("--task-index", probe_task, "held-out task index");
  probe->add_option("--out", probe_out, "CSV path (default stdout)");

  std::string exp_record, exp_format = "csv", exp_out;
  auto* exp = app.add_subcommand("export", "convert a binary episode record");
  exp->add_option("--record", exp_record, "record file")->required();
  exp->add_option("--format", exp_format, "jsonl | csv");
  exp->add_option("--out", exp_out, "output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) return cmd_train(train_opts, manifest_path, resume_path);
    if (eval->parsed())
      return cmd_eval(eval_opts, eval_ck, eval_n_tasks, eval_random, eval_records_out,
                      eval_out);
    if (baseline->parsed())
      return cmd_baseline(baseline_opts, bl_name, bl_ck, bl_n_tasks, bl_out);
    if (probe->parsed())
      return cmd_probe(probe_opts, probe_ck, probe_grid_n, probe_warm, probe_task,
                       probe_out);
    if (exp->parsed()) return cmd_export(exp_record, exp_format, exp_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "resl2l: config error: %s\n", e.what());
    return 2;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "resl2l: numerical divergence: %s\n", e.what());
    return 3;
  } catch (const IoError& e) {
    std::fprintf(stderr, "resl2l: i/o error: %s\n", e.what());
    return 4;
  }
  return 2;
}
