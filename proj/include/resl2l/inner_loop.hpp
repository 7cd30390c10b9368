#pragma once

// Inner-loop execution for both experiments.
//
// Experiment 1 (readout-plastic): a Volterra trajectory streamed in 3 s
// chunks, the readout adapting at 1 s boundaries from the running
// error-times-trace accumulator. Network state persists across chunks;
// gradients are truncated at chunk entry.
//
// Experiment 2 (dynamics-only): 400-step episodes of population-coded
// (input, previous-target) channels, a fixed linear readout of per-step
// spike counts, and full-episode backpropagation.

#include <variant>
#include <vector>

#include "resl2l/autodiff.hpp"
#include "resl2l/config.hpp"
#include "resl2l/encoding.hpp"
#include "resl2l/lif.hpp"
#include "resl2l/record.hpp"
#include "resl2l/tasks.hpp"

namespace resl2l {

using AnyTask = std::variant<VolterraTask, TargetNetwork, SineTask>;

inline VolterraConfig volterra_config(const RunConfig& cfg) {
  VolterraConfig c;
  c.kernel_bins = cfg.volterra_kernel_bins;
  c.bin_s = cfg.dt_ms / 1000.0;
  c.t1_s = cfg.volterra_t1_s;
  c.t2_s = cfg.volterra_t2_s;
  c.k2_time_unit_s = cfg.volterra_k2_time_unit_s;
  c.k2_scale = cfg.volterra_k2_scale;
  c.k1_l1_min = cfg.volterra_k1_l1_min;
  c.k2_rank_tol = cfg.volterra_k2_rank_tol;
  return c;
}

inline TargetNetworkConfig tn_config(const RunConfig& cfg) {
  TargetNetworkConfig c;
  c.n_hidden = cfg.tn_n_hidden;
  c.output_sigmoid = cfg.tn_output_sigmoid;
  c.input_lo = cfg.tn_input_lo;
  c.input_hi = cfg.tn_input_hi;
  return c;
}

inline SineConfig sine_config(const RunConfig& cfg) {
  SineConfig c;
  c.amp_lo = cfg.sine_amp_lo;
  c.amp_hi = cfg.sine_amp_hi;
  c.input_lo = cfg.sine_input_lo;
  c.input_hi = cfg.sine_input_hi;
  return c;
}

inline AnyTask sample_task(const RunConfig& cfg, Rng& rng) {
  if (cfg.task_family == "volterra") return sample_volterra(rng, volterra_config(cfg));
  if (cfg.task_family == "tn") return sample_target_network(rng, tn_config(cfg));
  if (cfg.task_family == "sine") return sample_sine(rng, sine_config(cfg));
  throw ConfigError("unknown task family '" + cfg.task_family + "'");
}

struct TaskRunStats {
  double loss = 0;  // prediction + regularization, per-task objective
  double pred_loss = 0;
  double reg_loss = 0;
  double mean_rate_hz = 0;
};

// ---------------------------------------------------------------------------
// Experiment 1

struct Exp1ChunkStats {
  double pred_loss = 0;
  double reg_loss = 0;
  double spike_mass = 0;
};

// Runs one chunk from the given state with the live plastic readout W [1 x 1+n].
// x/y are the chunk's slices of the task signal. Captures the tape when given;
// appends per-tick predictions (and full detail at column rec_col0) to rec.
inline Exp1ChunkStats forward_exp1_chunk(const Reservoir& res, const RunConfig& cfg,
                                         const Eigen::Ref<const Vec>& x,
                                         const Eigen::Ref<const Vec>& y,
                                         NetworkState& state, Mat& W, SpikeMode mode,
                                         Exp1Tape* tape = nullptr,
                                         EpisodeRecord* rec = nullptr, int rec_col0 = 0) {
  const ReservoirParams& p = res.params();
  const int n = res.n();
  const int S = static_cast<int>(x.size());
  const int spw = cfg.steps_per_window();
  const int loss_from = S - static_cast<int>(std::lround(cfg.loss_window_ms / cfg.dt_ms));
  if (W.rows() != 1 || W.cols() != 1 + n)
    throw ConfigError("readout shape must be [1 x 1+n_neurons]");

  if (tape) {
    tape->net.resize(n, S);
    tape->h.resize(n, S);
    tape->x = x;
    tape->y = y;
    tape->yhat.resize(S);
    tape->w_versions.clear();
    tape->steps_per_window = spw;
    tape->loss_from = loss_from;
  }

  Exp1ChunkStats out;
  StepTrace trace;
  Vec acc_h = Vec::Zero(n);
  Vec mass = Vec::Zero(n);
  for (int t = 0; t < S; ++t) {
    if (tape && t % spw == 0) tape->w_versions.push_back(W);
    res.step(state, p.w_in.col(0) * x[t], &trace, mode);
    const double yhat = W(0, 0) * x[t] + W.row(0).tail(n).dot(state.h);
    const double e = y[t] - yhat;
    acc_h += e * state.h;
    if (t >= loss_from) out.pred_loss += e * e;
    for (const Spike& sp : trace.spikes) mass[sp.j] += sp.amp;
    if (tape) {
      tape->net.capture(t, trace);
      tape->h.col(t) = state.h;
      tape->yhat[t] = yhat;
    }
    if (rec) {
      rec->predictions.push_back(yhat);
      rec->targets.push_back(y[t]);
      for (const Spike& sp : trace.spikes) rec->spike_counts[static_cast<size_t>(sp.j)]++;
      if (rec->full) {
        const int col = rec_col0 + t;
        for (int j = 0; j < n; ++j) rec->spikes(j, col) = 0;
        for (const Spike& sp : trace.spikes)
          rec->spikes(sp.j, col) = static_cast<std::uint8_t>(1);
        rec->traces.col(col) = state.h.cast<float>();
        rec->inputs(0, col) = static_cast<float>(x[t]);
      }
    }
    if (t % spw == spw - 1) {
      W.row(0).tail(n) += cfg.eta * acc_h.transpose();
      acc_h.setZero();
      if (!W.allFinite()) throw NumericalError("plastic readout diverged", state.t);
    }
  }
  const double dur_s = S * cfg.dt_ms / 1000.0;
  out.spike_mass = mass.sum();
  out.reg_loss =
      cfg.reg_alpha * ((mass / dur_s).array() - cfg.target_rate_hz).square().sum();
  return out;
}

inline EpisodeRecord make_exp1_record(const RunConfig& cfg, int n_chunks, bool full,
                                      std::uint64_t seed) {
  EpisodeRecord rec;
  rec.dt_ms = cfg.dt_ms;
  rec.bins_per_step = 1;
  rec.n_neurons = cfg.n_neurons;
  rec.n_input_units = 1;
  rec.seed = seed;
  rec.spike_counts.assign(static_cast<size_t>(cfg.n_neurons), 0);
  rec.full = full;
  if (full) {
    const int T = n_chunks * cfg.steps_per_chunk();
    rec.spikes.setZero(cfg.n_neurons, T);
    rec.traces.setZero(cfg.n_neurons, T);
    rec.inputs.setZero(1, T);
  }
  return rec;
}

// Per-task meta-gradient: all chunks forward + backward, summed over chunks
// (the outer loss averages over the batch only). Adds the task's gradient
// into g.
inline TaskRunStats exp1_task_gradient(const Reservoir& res, const RunConfig& cfg,
                                       const VolterraTask& task, Gradients& g,
                                       SpikeMode mode = SpikeMode::hard) {
  const int S = cfg.steps_per_chunk();
  const int C = cfg.chunks_per_task;
  const Vec x = gen_input(task, static_cast<long>(C) * S);
  const Vec y = apply_volterra(task, x);

  NetworkState state = res.make_state();
  Mat W = res.params().w_out;
  Exp1Tape tape;
  TaskRunStats out;
  double mass = 0;
  for (int c = 0; c < C; ++c) {
    const Exp1ChunkStats fs = forward_exp1_chunk(res, cfg, x.segment(c * S, S),
                                                 y.segment(c * S, S), state, W, mode, &tape);
    double reg = 0;
    out.pred_loss += backward_exp1_chunk(tape, res, cfg, g, c == 0, &reg);
    out.reg_loss += reg;
    mass += fs.spike_mass;
  }
  out.loss = out.pred_loss + out.reg_loss;
  out.mean_rate_hz = mass / (cfg.n_neurons * C * S * cfg.dt_ms / 1000.0);
  return out;
}

// Evaluation run over n_chunks chunks (no gradient, plasticity live).
inline EpisodeRecord eval_exp1_task(const Reservoir& res, const RunConfig& cfg,
                                    const VolterraTask& task, int n_chunks,
                                    bool full = false) {
  const int S = cfg.steps_per_chunk();
  const Vec x = gen_input(task, static_cast<long>(n_chunks) * S);
  const Vec y = apply_volterra(task, x);
  EpisodeRecord rec = make_exp1_record(cfg, n_chunks, full, cfg.seed);
  NetworkState state = res.make_state();
  Mat W = res.params().w_out;
  for (int c = 0; c < n_chunks; ++c)
    forward_exp1_chunk(res, cfg, x.segment(c * S, S), y.segment(c * S, S), state, W,
                       SpikeMode::hard, nullptr, &rec, c * S);
  return rec;
}

// Mean squared error of each consecutive window of readout ticks.
inline std::vector<double> per_window_mse(const EpisodeRecord& r, int ticks_per_window) {
  const int n_windows = r.n_steps() / ticks_per_window;
  std::vector<double> mse(static_cast<size_t>(n_windows), 0.0);
  for (int w = 0; w < n_windows; ++w) {
    double s = 0;
    for (int i = 0; i < ticks_per_window; ++i) s += r.sq_err(w * ticks_per_window + i);
    mse[static_cast<size_t>(w)] = s / ticks_per_window;
  }
  return mse;
}

// ---------------------------------------------------------------------------
// Experiment 2

struct Exp2Episode {
  Mat xs;           // [n_analog x S] task inputs per step
  Vec y;            // [S] targets
  SpikeMat raster;  // [n_input_units x S*bins] encoder spikes
};

inline double eval_task_point(const AnyTask& task, const Vec& x) {
  if (const auto* tn = std::get_if<TargetNetwork>(&task)) return eval_tn(*tn, x[0], x[1]);
  if (const auto* sine = std::get_if<SineTask>(&task)) return eval_sine(*sine, x[0]);
  throw ConfigError("task family has no pointwise evaluation");
}

// Samples the step inputs, computes targets, and encodes the full raster.
// The target channel carries the previous step's target; step 0 carries 0.
inline Exp2Episode make_exp2_episode(const RunConfig& cfg, const AnyTask& task, Rng& rng) {
  const int S = cfg.steps_per_episode;
  const int bins = cfg.bins_per_step();
  const ChannelEncoder enc = make_channel_encoder(cfg);
  const int n_analog = cfg.n_channels() - 1;
  const auto ranges = channel_ranges(cfg);

  Exp2Episode ep;
  ep.xs.resize(n_analog, S);
  ep.y.resize(S);
  for (int s = 0; s < S; ++s) {
    for (int c = 0; c < n_analog; ++c)
      ep.xs(c, s) = rng.uniform(ranges[static_cast<size_t>(c)].first,
                                ranges[static_cast<size_t>(c)].second);
    ep.y[s] = eval_task_point(task, ep.xs.col(s));
  }
  ep.raster.resize(enc.n_units(), static_cast<Eigen::Index>(S) * bins);
  std::vector<double> values(static_cast<size_t>(n_analog) + 1);
  for (int s = 0; s < S; ++s) {
    for (int c = 0; c < n_analog; ++c) values[static_cast<size_t>(c)] = ep.xs(c, s);
    values.back() = s == 0 ? 0.0 : ep.y[s - 1];
    enc.encode_step(values, bins, cfg.dt_ms / 1000.0, rng, ep.raster, s * bins);
  }
  return ep;
}

struct Exp2EpisodeStats {
  double pred_loss = 0;
  double reg_loss = 0;
  double spike_mass = 0;
};

// Runs one episode from the given state. Captures the tape and/or record.
inline Exp2EpisodeStats forward_exp2_episode(const Reservoir& res, const RunConfig& cfg,
                                             const Exp2Episode& ep, NetworkState& state,
                                             SpikeMode mode, Exp2Tape* tape = nullptr,
                                             EpisodeRecord* rec = nullptr) {
  const ReservoirParams& p = res.params();
  const int n = res.n();
  const int S = static_cast<int>(ep.y.size());
  const int bins = cfg.bins_per_step();
  const int T = S * bins;
  const int n_units = static_cast<int>(ep.raster.rows());
  if (p.w_in.cols() != n_units)
    throw ConfigError("input weights do not match the encoder raster");

  if (tape) {
    tape->net.resize(n, T);
    tape->bins_per_step = bins;
    tape->raster = ep.raster;
    tape->phi.resize(n, S);
    tape->yhat.resize(S);
    tape->y = ep.y;
  }

  Exp2EpisodeStats out;
  StepTrace trace;
  Vec i_ext(n), counts(n);
  Vec mass = Vec::Zero(n);
  for (int s = 0; s < S; ++s) {
    counts.setZero();
    for (int b = 0; b < bins; ++b) {
      const int t = s * bins + b;
      i_ext.setZero();
      for (int u = 0; u < n_units; ++u)
        if (ep.raster(u, t)) i_ext += p.w_in.col(u);
      res.step(state, i_ext, &trace, mode);
      for (const Spike& sp : trace.spikes) counts[sp.j] += sp.amp;
      if (tape) tape->net.capture(t, trace);
      if (rec) {
        for (const Spike& sp : trace.spikes)
          rec->spike_counts[static_cast<size_t>(sp.j)]++;
        if (rec->full) {
          for (int j = 0; j < n; ++j) rec->spikes(j, t) = 0;
          for (const Spike& sp : trace.spikes)
            rec->spikes(sp.j, t) = static_cast<std::uint8_t>(1);
          rec->traces.col(t) = state.h.cast<float>();
          for (int u = 0; u < n_units; ++u)
            rec->inputs(u, t) = static_cast<float>(ep.raster(u, t));
        }
      }
    }
    mass += counts;
    // Readout feature: per-step mean firing rate, spike count over the 20 ms
    // window divided by the bin count.
    const Vec phi = counts / static_cast<double>(bins);
    const double yhat = p.w_out.row(0).dot(phi);
    const double e = yhat - ep.y[s];
    out.pred_loss += e * e;
    if (tape) {
      tape->phi.col(s) = phi;
      tape->yhat[s] = yhat;
    }
    if (rec) {
      rec->predictions.push_back(yhat);
      rec->targets.push_back(ep.y[s]);
    }
  }
  const double dur_s = T * cfg.dt_ms / 1000.0;
  out.spike_mass = mass.sum();
  out.reg_loss =
      cfg.reg_alpha * ((mass / dur_s).array() - cfg.target_rate_hz).square().sum();
  return out;
}

inline EpisodeRecord make_exp2_record(const RunConfig& cfg, bool full, std::uint64_t seed) {
  EpisodeRecord rec;
  rec.dt_ms = cfg.dt_ms;
  rec.bins_per_step = cfg.bins_per_step();
  rec.n_neurons = cfg.n_neurons;
  rec.n_input_units = cfg.n_input_units();
  rec.seed = seed;
  rec.spike_counts.assign(static_cast<size_t>(cfg.n_neurons), 0);
  rec.full = full;
  if (full) {
    const int T = cfg.steps_per_episode * cfg.bins_per_step();
    rec.spikes.setZero(cfg.n_neurons, T);
    rec.traces.setZero(cfg.n_neurons, T);
    rec.inputs.setZero(cfg.n_input_units(), T);
  }
  return rec;
}

// Meta-gradient over one episode (pregenerated, so evaluations are repeatable).
inline TaskRunStats exp2_episode_gradient(const Reservoir& res, const RunConfig& cfg,
                                          const Exp2Episode& ep, Gradients& g,
                                          SpikeMode mode = SpikeMode::hard) {
  Exp2Tape tape;
  NetworkState state = res.make_state();
  forward_exp2_episode(res, cfg, ep, state, mode, &tape);
  TaskRunStats out;
  out.pred_loss = backward_exp2(tape, res, cfg.reg_alpha, cfg.target_rate_hz, g,
                                &out.reg_loss, cfg.detach_reset);
  out.loss = out.pred_loss + out.reg_loss;
  const double dur_s = tape.net.T * cfg.dt_ms / 1000.0;
  out.mean_rate_hz = tape.net.spike_mass().sum() / (cfg.n_neurons * dur_s);
  return out;
}

inline TaskRunStats exp2_task_gradient(const Reservoir& res, const RunConfig& cfg,
                                       const AnyTask& task, Rng& episode_rng, Gradients& g,
                                       SpikeMode mode = SpikeMode::hard) {
  return exp2_episode_gradient(res, cfg, make_exp2_episode(cfg, task, episode_rng), g, mode);
}

inline EpisodeRecord eval_exp2_task(const Reservoir& res, const RunConfig& cfg,
                                    const AnyTask& task, Rng& episode_rng,
                                    bool full = false) {
  const Exp2Episode ep = make_exp2_episode(cfg, task, episode_rng);
  EpisodeRecord rec = make_exp2_record(cfg, full, cfg.seed);
  NetworkState state = res.make_state();
  forward_exp2_episode(res, cfg, ep, state, SpikeMode::hard, nullptr, &rec);
  return rec;
}

// ---------------------------------------------------------------------------
// Internal-model probe: query the readout across a grid of inputs from a
// frozen state copy, never advancing the live network.

struct ProbeResult {
  Mat points;       // [n_analog x P]
  Vec predictions;  // [P]
};

inline ProbeResult probe_internal_model(const Reservoir& res, const RunConfig& cfg,
                                        const NetworkState& state, double prev_target,
                                        const Mat& grid_points, std::uint64_t probe_seed) {
  const ReservoirParams& p = res.params();
  const int n = res.n();
  const int bins = cfg.bins_per_step();
  const ChannelEncoder enc = make_channel_encoder(cfg);
  const int n_analog = cfg.n_channels() - 1;
  if (grid_points.rows() != n_analog)
    throw ConfigError("probe grid must have one row per input channel");

  ProbeResult out;
  out.points = grid_points;
  out.predictions.resize(grid_points.cols());
  SpikeMat raster(enc.n_units(), bins);
  std::vector<double> values(static_cast<size_t>(n_analog) + 1);
  StepTrace trace;
  Vec i_ext(n), counts(n);
  for (Eigen::Index k = 0; k < grid_points.cols(); ++k) {
    Rng rng = Rng::derive(probe_seed, {stream_tag("probe"), static_cast<std::uint64_t>(k)});
    for (int c = 0; c < n_analog; ++c) values[static_cast<size_t>(c)] = grid_points(c, k);
    values.back() = prev_target;
    enc.encode_step(values, bins, cfg.dt_ms / 1000.0, rng, raster, 0);

    NetworkState probe_state = state;  // frozen copy per grid point
    counts.setZero();
    for (int b = 0; b < bins; ++b) {
      i_ext.setZero();
      for (int u = 0; u < raster.rows(); ++u)
        if (raster(u, b)) i_ext += p.w_in.col(u);
      res.step(probe_state, i_ext, &trace, SpikeMode::hard);
      for (const Spike& sp : trace.spikes) counts[sp.j] += sp.amp;
    }
    out.predictions[k] = p.w_out.row(0).dot(counts) / static_cast<double>(bins);
  }
  return out;
}

}  // namespace resl2l
