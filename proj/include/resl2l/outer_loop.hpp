#pragma once

// Meta-training orchestration: batches of task gradients, gradient clipping,
// Adam updates, metrics, periodic checkpoints, and held-out evaluation.
//
// Determinism: every task draws its randomness from streams derived from
// (master seed, iteration, batch index). Per-task gradients are stored by
// batch index and reduced in order, so results are independent of the worker
// count and bit-stable across reruns.

#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

#include "resl2l/adam.hpp"
#include "resl2l/checkpoint.hpp"
#include "resl2l/inner_loop.hpp"
#include "resl2l/metrics.hpp"

namespace resl2l {

// Mean over the batch of: squared errors summed over the loss windows, plus
// the firing-rate penalty from each record's spike counts.
inline double outer_loss(const std::vector<EpisodeRecord>& records, const RunConfig& cfg) {
  if (records.empty()) return 0.0;
  double total = 0;
  for (const EpisodeRecord& r : records) {
    double pred = 0;
    if (cfg.experiment == "exp1") {
      const int spc = cfg.steps_per_chunk();
      const int loss_steps = static_cast<int>(std::lround(cfg.loss_window_ms / cfg.dt_ms));
      const int chunks = r.n_steps() / spc;
      for (int c = 0; c < chunks; ++c)
        for (int t = spc - loss_steps; t < spc; ++t) pred += r.sq_err(c * spc + t);
    } else {
      pred = r.sum_sq_err();
    }
    double reg = 0;
    const double dur_s = r.duration_s();
    for (const auto cnt : r.spike_counts) {
      const double dev = cnt / dur_s - cfg.target_rate_hz;
      reg += dev * dev;
    }
    total += pred + cfg.reg_alpha * reg;
  }
  return total / static_cast<double>(records.size());
}

namespace detail {

// Static partition of batch indices over threads; exceptions are replayed in
// worker order after the join.
template <typename Fn>
inline void parallel_batch(int batch, int workers, Fn&& fn) {
  const int w = std::max(1, std::min(workers, batch));
  if (w == 1) {
    for (int b = 0; b < batch; ++b) fn(b);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<size_t>(w));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(w));
  for (int k = 0; k < w; ++k) {
    pool.emplace_back([&, k] {
      try {
        for (int b = k; b < batch; b += w) fn(b);
      } catch (...) {
        errors[static_cast<size_t>(k)] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

struct TrainCallbacks {
  std::function<void(const MetricsRow&)> on_metrics;
  std::function<void(const Checkpoint&)> on_checkpoint;  // periodic and on abort
};

struct TrainResult {
  ReservoirParams params;
  AdamState adam;
  std::int64_t iteration = 0;
  std::vector<MetricsRow> metrics;
};

// Runs outer iterations [start_iter, cfg.iterations). Pass a loaded
// checkpoint's params/adam/iteration to resume a run bit-exactly.
inline TrainResult meta_train_from(const RunConfig& cfg, ReservoirParams init,
                                   AdamState adam, std::int64_t start_iter,
                                   const TrainCallbacks& cb = {}) {
  validate(cfg);
  Reservoir res(NeuronConstants::from_config(cfg), std::move(init));
  AdamConfig adam_cfg;
  adam_cfg.lr = cfg.lr;
  adam_cfg.beta1 = cfg.adam_beta1;
  adam_cfg.beta2 = cfg.adam_beta2;
  adam_cfg.eps = cfg.adam_eps;
  adam_cfg.amsgrad = cfg.adam_amsgrad;

  TrainResult out;
  out.adam = std::move(adam);
  const int B = cfg.batch_size;
  std::vector<Gradients> grads(static_cast<size_t>(B));
  std::vector<TaskRunStats> stats(static_cast<size_t>(B));

  for (std::int64_t it = start_iter; it < cfg.iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      detail::parallel_batch(B, cfg.workers, [&](int b) {
        grads[static_cast<size_t>(b)] = Gradients::zeros_like(res.params());
        Rng task_rng = Rng::derive(
            cfg.seed, {stream_tag("task"), static_cast<std::uint64_t>(it),
                       static_cast<std::uint64_t>(b)});
        if (cfg.experiment == "exp1") {
          const VolterraTask task = sample_volterra(task_rng, volterra_config(cfg));
          stats[static_cast<size_t>(b)] =
              exp1_task_gradient(res, cfg, task, grads[static_cast<size_t>(b)]);
        } else {
          const AnyTask task = sample_task(cfg, task_rng);
          Rng ep_rng = Rng::derive(
              cfg.seed, {stream_tag("episode"), static_cast<std::uint64_t>(it),
                         static_cast<std::uint64_t>(b)});
          stats[static_cast<size_t>(b)] =
              exp2_task_gradient(res, cfg, task, ep_rng, grads[static_cast<size_t>(b)]);
        }
      });
    } catch (const NumericalError&) {
      if (cb.on_checkpoint)
        cb.on_checkpoint(Checkpoint{cfg, it, res.params(), out.adam});
      throw;
    }

    Gradients g = Gradients::zeros_like(res.params());
    for (int b = 0; b < B; ++b) g.add_scaled(grads[static_cast<size_t>(b)], 1.0 / B);
    clip_global_norm(g, cfg.grad_clip);
    out.adam.apply(res.mutable_params(), g, adam_cfg);
    res.refresh();

    MetricsRow row;
    row.iter = it;
    for (int b = 0; b < B; ++b) {
      row.loss += stats[static_cast<size_t>(b)].loss / B;
      row.reg_loss += stats[static_cast<size_t>(b)].reg_loss / B;
      row.mean_rate_hz += stats[static_cast<size_t>(b)].mean_rate_hz / B;
    }
    row.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    out.metrics.push_back(row);
    if (cb.on_metrics) cb.on_metrics(row);

    if (cb.on_checkpoint && cfg.checkpoint_every > 0 &&
        (it + 1) % cfg.checkpoint_every == 0 && it + 1 < cfg.iterations)
      cb.on_checkpoint(Checkpoint{cfg, it + 1, res.params(), out.adam});
  }

  out.params = res.params();
  out.iteration = std::max<std::int64_t>(start_iter, cfg.iterations);
  return out;
}

// Fresh run: initialize weights from the master seed and train from zero.
inline TrainResult meta_train(const RunConfig& cfg, const TrainCallbacks& cb = {}) {
  Rng init_rng = Rng::derive(cfg.seed, {stream_tag("init")});
  ReservoirParams params = init_reservoir(cfg, init_rng);
  AdamState adam(params);
  return meta_train_from(cfg, std::move(params), std::move(adam), 0, cb);
}

inline TrainResult meta_train_resume(const Checkpoint& ck, const TrainCallbacks& cb = {}) {
  return meta_train_from(ck.cfg, ck.params, ck.adam, ck.iteration, cb);
}

// ---------------------------------------------------------------------------
// Held-out evaluation. Task and episode streams derive from the master seed
// and the task index only, so different parameter sets (say, trained versus
// random) are measured on identical task samples and inputs.

struct EvalSummary {
  int n_tasks = 0;
  double mean_mse = 0;             // per-tick mean squared error, averaged over tasks
  double std_mse = 0;
  double mean_rate_hz = 0;
  std::vector<double> curve;       // per-window (exp1) or per-step (exp2) mean sq err
  std::vector<double> task_mse;    // one entry per task
};

inline EvalSummary evaluate(const RunConfig& cfg, const ReservoirParams& params,
                            int n_tasks) {
  validate(cfg);
  const Reservoir res(NeuronConstants::from_config(cfg), params);
  EvalSummary sum;
  sum.n_tasks = n_tasks;
  if (n_tasks == 0) return sum;

  std::vector<std::vector<double>> curves(static_cast<size_t>(n_tasks));
  std::vector<double> mses(static_cast<size_t>(n_tasks), 0.0);
  std::vector<double> rates(static_cast<size_t>(n_tasks), 0.0);

  detail::parallel_batch(n_tasks, cfg.workers, [&](int b) {
    Rng task_rng =
        Rng::derive(cfg.seed, {stream_tag("eval-task"), static_cast<std::uint64_t>(b)});
    EpisodeRecord rec;
    if (cfg.experiment == "exp1") {
      const VolterraTask task = sample_volterra(task_rng, volterra_config(cfg));
      rec = eval_exp1_task(res, cfg, task, cfg.eval_chunks);
      curves[static_cast<size_t>(b)] = per_window_mse(rec, cfg.steps_per_window());
    } else {
      const AnyTask task = sample_task(cfg, task_rng);
      Rng ep_rng = Rng::derive(cfg.seed,
                               {stream_tag("eval-episode"), static_cast<std::uint64_t>(b)});
      rec = eval_exp2_task(res, cfg, task, ep_rng);
      curves[static_cast<size_t>(b)].resize(static_cast<size_t>(rec.n_steps()));
      for (int i = 0; i < rec.n_steps(); ++i)
        curves[static_cast<size_t>(b)][static_cast<size_t>(i)] = rec.sq_err(i);
    }
    mses[static_cast<size_t>(b)] = rec.sum_sq_err() / rec.n_steps();
    rates[static_cast<size_t>(b)] = rec.mean_rate_hz();
  });

  sum.task_mse = mses;
  for (int b = 0; b < n_tasks; ++b) {
    sum.mean_mse += mses[static_cast<size_t>(b)] / n_tasks;
    sum.mean_rate_hz += rates[static_cast<size_t>(b)] / n_tasks;
  }
  double var = 0;
  for (const double m : mses) var += (m - sum.mean_mse) * (m - sum.mean_mse);
  sum.std_mse = n_tasks > 1 ? std::sqrt(var / (n_tasks - 1)) : 0.0;

  sum.curve.assign(curves[0].size(), 0.0);
  for (const auto& c : curves)
    for (size_t i = 0; i < sum.curve.size(); ++i) sum.curve[i] += c[i] / n_tasks;
  return sum;
}

// The untrained comparison point: fresh weights from an init stream that is
// disjoint from the trained run's, evaluated on the same task seeds.
inline EvalSummary random_reservoir_eval(const RunConfig& cfg, int n_tasks,
                                         std::uint64_t init_salt = 0) {
  Rng init_rng = Rng::derive(cfg.seed, {stream_tag("random-eval-init"), init_salt});
  const ReservoirParams params = init_reservoir(cfg, init_rng);
  return evaluate(cfg, params, n_tasks);
}

}  // namespace resl2l
