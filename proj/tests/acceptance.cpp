// Acceptance gate. Runs every criterion the library must satisfy and prints
// one PASS/FAIL line each, with the tolerances pinned in code. Exit status is
// the number of failed criteria. The full-scale reproduction (criterion 7)
// takes many hours and is opt-in via --full-scale; it is reported as SKIP
// otherwise.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "resl2l/baselines.hpp"
#include "resl2l/outer_loop.hpp"

using namespace resl2l;

namespace {

int g_failures = 0;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void report(int id, const char* name, bool ok, const std::string& detail) {
  std::printf("[%s] %d %s: %s\n", ok ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

void report_skip(int id, const char* name, const std::string& why) {
  std::printf("[SKIP] %d %s: %s\n", id, name, why.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

bool params_equal(const ReservoirParams& a, const ReservoirParams& b) {
  return (a.w_in.array() == b.w_in.array()).all() &&
         (a.w_rec.array() == b.w_rec.array()).all() &&
         (a.w_out.array() == b.w_out.array()).all() &&
         (a.delays.array() == b.delays.array()).all();
}

// --- 1: reverse-mode gradients vs central finite differences ---------------

void criterion_gradients() {
  const auto t0 = std::chrono::steady_clock::now();
  gradcheck::FdStats st;
  int instances = 0;
  for (int k = 0; k < 10; ++k) {
    st.merge(gradcheck::fd_check_exp1(100 + k, 12, k % 2 ? 10 : 8, 30));
    ++instances;
  }
  for (int k = 0; k < 5; ++k) {
    st.merge(gradcheck::fd_check_exp2(200 + k, 12, k % 2 ? 10 : 8, 6, "sine"));
    st.merge(gradcheck::fd_check_exp2(300 + k, 12, k % 2 ? 8 : 10, 6, "tn"));
    instances += 2;
  }
  const double dt = seconds_since(t0);
  const bool ok = instances >= 20 && st.pass_fraction() >= 0.99 && dt < 60.0;
  report(1, "bptt-vs-finite-differences", ok,
         fmt("%d instances, %ld coords tested, %.2f%% within rel 1e-4 (need >=99%%), "
             "max_rel=%.3g, %ld flip-excluded, %.1fs (need <60s)",
             instances, st.tested, 100.0 * st.pass_fraction(), st.max_rel, st.excluded,
             dt));
}

// --- 2: meta-gradient through one plastic readout update --------------------

void criterion_plasticity_chain() {
  // Single neuron, one applied readout update inside the loss window: the
  // 20-step chunk has two 10-step accumulation windows, so the first window's
  // update lands at step 10 and shapes every prediction the loss sees.
  RunConfig cfg = gradcheck::small_exp1_config(1, 20);
  cfg.accumulation_window_ms = 10;
  cfg.loss_window_ms = 10;
  cfg.eta = 0.05;
  cfg.seed = 41;

  Rng init_rng = Rng::derive(cfg.seed, {stream_tag("init")});
  ReservoirParams params = init_reservoir(cfg, init_rng);
  params.w_in *= 0.2;
  Rng task_rng = Rng::derive(cfg.seed, {stream_tag("task")});
  const VolterraTask task = sample_volterra(task_rng, volterra_config(cfg));

  const Reservoir res(NeuronConstants::from_config(cfg), params);
  Exp1Tape tape;
  NetworkState state = res.make_state();
  Mat W = params.w_out;
  const int S = cfg.steps_per_chunk();
  const Vec x = gen_input(task, S);
  const Vec y = apply_volterra(task, x);
  forward_exp1_chunk(res, cfg, x, y, state, W, SpikeMode::smoothed, &tape);
  const double spikes = tape.net.spike_mass().sum();

  Gradients g = Gradients::zeros_like(params);
  exp1_task_gradient(res, cfg, task, g, SpikeMode::smoothed);
  const Vec oracle = oracles::plastic_meta_grad(tape, cfg.eta);
  const Vec bptt = g.d_w_out.row(0).transpose();
  const double rel = (bptt - oracle).cwiseAbs().maxCoeff() /
                     std::max(1e-12, oracle.cwiseAbs().maxCoeff());
  const bool ok = spikes > 0 && rel <= 1e-8;
  report(2, "plastic-readout-meta-gradient", ok,
         fmt("1 neuron, 2 windows, spike_mass=%.0f, rel=%.3g (need <=1e-8)", spikes,
             rel));
}

// --- 3: fast Volterra application vs naive double sum -----------------------

void criterion_volterra() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0;
  for (int k = 0; k < 20; ++k) {
    RunConfig cfg = gradcheck::small_exp1_config(4, 30);
    cfg.volterra_kernel_bins = 30 + 5 * (k % 4);
    Rng rng = Rng::derive(7000 + k, {stream_tag("task")});
    const VolterraTask task = sample_volterra(rng, volterra_config(cfg));
    const Vec x = gen_input(task, 200);
    const Vec fast = apply_volterra(task, x);
    const Vec naive = oracles::naive_volterra(task, x);
    const double rel = (fast - naive).cwiseAbs().maxCoeff() /
                       std::max(1e-300, naive.cwiseAbs().maxCoeff());
    worst = std::max(worst, rel);
  }

  Rng srng(9001);
  double worst_det = 0;
  double min_eig = 1e300;
  for (int k = 0; k < 10000; ++k) {
    const double u = srng.uniform(-12.0, 12.0);
    const double v = srng.uniform(-12.0, 12.0);
    const Mat sig = volterra_sigma(u, v);
    const double det = sig(0, 0) * sig(1, 1) - sig(0, 1) * sig(1, 0);
    worst_det = std::max(worst_det, std::abs(det - 1.0));
    const double half_tr = 0.5 * (sig(0, 0) + sig(1, 1));
    const double disc = std::sqrt(std::max(0.0, half_tr * half_tr - det));
    min_eig = std::min(min_eig, half_tr - disc);
  }
  const double dt = seconds_since(t0);
  const bool ok = worst <= 1e-10 && worst_det <= 1e-9 && min_eig > 0 && dt < 60.0;
  report(3, "volterra-oracle", ok,
         fmt("20 instances max_rel=%.3g (need <=1e-10); 1e4 covariances "
             "max|det-1|=%.3g (need <=1e-9), min_eig=%.3g (need >0), %.1fs",
             worst, worst_det, min_eig, dt));
}

// --- 4: population-code rates, exact peak and empirical ---------------------

void criterion_encoding() {
  const PopulationCode code = make_population_code(-1.0, 1.0, 16, 0.1, 200.0);
  bool exact = true;
  for (int i = 0; i < 16; ++i)
    if (rates(code, code.m[i])[i] != 200.0) exact = false;

  // empirical check at the peak and on a flank, 1e5 one-millisecond bins
  const int n_bins = 100000;
  const double dt_s = 1e-3;
  double worst_err = 0;
  Rng rng(90210);
  const double zs[2] = {code.m[7], 0.5 * (code.m[7] + code.m[8])};
  for (const double z : zs) {
    const Vec r = rates(code, z);
    SpikeMat raster(16, n_bins);
    spikes_from_rates(r, n_bins, dt_s, rng, raster, 0);
    for (int i = 6; i <= 9; ++i) {
      const double hz = raster.row(i).cast<double>().sum() * 1000.0 / n_bins;
      worst_err = std::max(worst_err, std::abs(hz - r[i]));
    }
  }
  const bool ok = exact && worst_err <= 5.0;
  report(4, "population-code-rates", ok,
         fmt("peak rate exact at all 16 centers: %s; empirical worst |err|=%.2f Hz "
             "over 1e5 bins (need <=5)",
             exact ? "yes" : "NO", worst_err));
}

// --- 5 and 8: experiment-2 regression (sine family), regularized rates ------

void criterion_exp2_regression() {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg = preset_config("exp2-sine-desk");
  cfg.seed = 1;
  const TrainResult tr = meta_train(cfg);
  const EvalSummary trained = evaluate(cfg, tr.params, 50);
  const EvalSummary random = random_reservoir_eval(cfg, 50);

  const size_t q = trained.curve.size() / 4;
  double first_q = 0, last_q = 0;
  for (size_t i = 0; i < q; ++i) first_q += trained.curve[i] / q;
  for (size_t i = trained.curve.size() - q; i < trained.curve.size(); ++i)
    last_q += trained.curve[i] / q;

  const double dt = seconds_since(t0);
  const bool margin_ok = trained.mean_mse <= 0.7 * random.mean_mse;
  const bool within_ok = last_q < first_q;
  report(5, "sine-family-regression", margin_ok && within_ok && dt <= 1800.0,
         fmt("trained mse=%.4g vs random mse=%.4g (need <=70%%: %.1f%%); "
             "episode first-quarter=%.4g final-quarter=%.4g (need decrease); "
             "%.0fs (need <=1800)",
             trained.mean_mse, random.mean_mse,
             100.0 * trained.mean_mse / random.mean_mse, first_q, last_q, dt));

  const bool rate_ok = trained.mean_rate_hz >= 10.0 && trained.mean_rate_hz <= 30.0;
  report(8, "regularized-firing-rate", rate_ok,
         fmt("trained mean rate %.1f Hz (need 20 +/- 10)", trained.mean_rate_hz));
}

// --- 6: experiment-1 regression (plastic readout on Volterra tasks) ---------

void criterion_exp1_regression() {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg = preset_config("exp1-volterra-desk");
  cfg.seed = 1;
  const TrainResult tr = meta_train(cfg);
  const EvalSummary trained = evaluate(cfg, tr.params, 50);
  const EvalSummary random = random_reservoir_eval(cfg, 50);

  // learning curves are per accumulation window (1 s); compare every window
  // that starts at or after 10 s of readout training
  const size_t from = static_cast<size_t>(10000 / cfg.accumulation_window_ms);
  bool below = trained.curve.size() == random.curve.size() &&
               trained.curve.size() > from;
  size_t n_cmp = 0;
  for (size_t i = from; i < trained.curve.size(); ++i, ++n_cmp)
    if (!(trained.curve[i] < random.curve[i])) below = false;

  const double dt = seconds_since(t0);
  std::string windows;
  for (size_t i = from; i < trained.curve.size(); ++i)
    windows += fmt(" %.3g<%.3g", trained.curve[i], random.curve[i]);
  report(6, "volterra-family-regression", below && dt <= 3600.0,
         fmt("optimized below random at all %zu windows past 10s:%s; "
             "mse %.4g vs %.4g; %.0fs (need <=3600)",
             n_cmp, windows.c_str(), trained.mean_mse, random.mean_mse, dt));
}

// --- 7: full-scale reproduction (opt-in) -------------------------------------

void criterion_full_scale(bool enabled) {
  if (!enabled) {
    report_skip(7, "full-scale-reproduction",
                "pass --full-scale to run (hours of compute); target mse "
                "0.0056 +/- 0.0039 vs baseline 0.0217");
    return;
  }
  RunConfig cfg = preset_config("exp2-tn");
  cfg.seed = 1;
  const TrainResult tr = meta_train(cfg);
  const EvalSummary trained = evaluate(cfg, tr.params, 200);
  const EvalSummary random = random_reservoir_eval(cfg, 200);
  const bool ok = trained.mean_mse * 2.0 <= random.mean_mse &&
                  std::abs(trained.mean_mse - 0.0056) <= 3.0 * 0.0039;
  report(7, "full-scale-reproduction", ok,
         fmt("trained mse=%.4g vs random=%.4g (need 2x better and within "
             "0.0056 +/- 0.0117)",
             trained.mean_mse, random.mean_mse));
}

// --- 9: bit-identical reruns and checkpoint resume ---------------------------

void criterion_determinism() {
  RunConfig cfg = preset_config("exp2-sine-desk");
  cfg.n_neurons = 40;
  cfg.steps_per_episode = 100;
  cfg.pop_n_units = 20;
  cfg.batch_size = 5;
  cfg.iterations = 4;
  cfg.checkpoint_every = 2;
  cfg.seed = 12345;

  Checkpoint mid;
  bool got_mid = false;
  TrainCallbacks cb;
  cb.on_checkpoint = [&](const Checkpoint& ck) {
    if (ck.iteration == 2) {
      mid = ck;
      got_mid = true;
    }
  };
  const TrainResult a = meta_train(cfg, cb);
  const TrainResult b = meta_train(cfg);
  const bool rerun_ok = metrics_canonical_hash(a.metrics) == metrics_canonical_hash(b.metrics);

  bool resume_ok = got_mid;
  if (got_mid) {
    const TrainResult c = meta_train_resume(mid);
    resume_ok = c.metrics.size() == 2 &&
                metrics_json(c.metrics[0], false) == metrics_json(a.metrics[2], false) &&
                metrics_json(c.metrics[1], false) == metrics_json(a.metrics[3], false) &&
                params_equal(c.params, a.params);
  }
  report(9, "determinism-and-resume", rerun_ok && resume_ok,
         fmt("rerun metrics hash %s; resume from iteration 2 %s",
             rerun_ok ? "identical" : "DIFFERS",
             resume_ok ? "bit-exact" : "MISMATCH"));
}

}  // namespace

int main(int argc, char** argv) {
  bool full_scale = false;
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--full-scale") == 0) {
      full_scale = true;
    } else if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      for (const char* p = argv[++i]; *p; ++p)
        if (*p >= '1' && *p <= '9') only.push_back(*p - '0');
    } else {
      std::fprintf(stderr, "usage: acceptance [--full-scale] [--only 1249]\n");
      return 64;
    }
  }
  auto want = [&](int id) {
    if (only.empty()) return true;
    for (const int o : only)
      if (o == id) return true;
    return false;
  };

  if (want(1)) criterion_gradients();
  if (want(2)) criterion_plasticity_chain();
  if (want(3)) criterion_volterra();
  if (want(4)) criterion_encoding();
  if (want(5) || want(8)) criterion_exp2_regression();
  if (want(6)) criterion_exp1_regression();
  if (want(7) || full_scale) criterion_full_scale(full_scale);
  if (want(9)) criterion_determinism();

  std::printf("%s: %d criterion failure(s)\n", g_failures ? "FAIL" : "OK", g_failures);
  return g_failures;
}
