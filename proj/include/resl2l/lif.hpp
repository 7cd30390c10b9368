#pragma once

// Discrete-time leaky integrate-and-fire reservoir with per-synapse integer
// delays, strict refractoriness, reset by subtraction, and exponentially
// filtered spike traces.
//
//   V(t+1) = rho V(t) + (1-rho) R_m I(t) - v_th z(t)
//   z_j(t) = 1  iff  (V_j(t) - v_th)/v_th > 0 and not refractory
//   h(t)   = kappa h(t-1) + z(t)
//
// A spike of neuron j at step t reaches neuron i's input current at step
// t + delays(i, j).

#include <cstdint>
#include <vector>

#include "resl2l/common.hpp"
#include "resl2l/config.hpp"
#include "resl2l/rng.hpp"

namespace resl2l {

struct NeuronConstants {
  double dt_ms = 1.0;
  double rho = 0.951;
  double kappa = 0.951;
  double r_m = 1.0;
  double v_th = 0.03;
  double gamma = 0.4;
  int refractory_steps = 5;
  int delay_min = 0;
  int delay_max = 5;

  static NeuronConstants from_config(const RunConfig& cfg) {
    NeuronConstants c;
    c.dt_ms = cfg.dt_ms;
    c.rho = cfg.rho();
    c.kappa = cfg.kappa();
    c.v_th = cfg.v_th;
    c.gamma = cfg.gamma;
    c.refractory_steps = cfg.refractory_steps();
    c.delay_min = cfg.delay_min_steps;
    c.delay_max = cfg.delay_max_steps;
    return c;
  }
  int ring_depth() const { return delay_max + 1; }
};

struct ReservoirParams {
  Mat w_in;     // [n x n_input_units]
  Mat w_rec;    // [n x n], zero diagonal
  Mat w_out;    // [n_outputs x feature_dim]
  IMat delays;  // [n x n] integer steps, frozen at init

  int n() const { return static_cast<int>(w_rec.rows()); }
};

// w_in ~ N(0, 1/3), w_rec ~ N(0, 1/n) with a zero diagonal, w_out uniform
// in +-sqrt(6 / (fan_in + fan_out)), delays uniform integers.
inline ReservoirParams init_reservoir(const RunConfig& cfg, Rng& rng) {
  const int n = cfg.n_neurons;
  ReservoirParams p;
  p.w_in.resize(n, cfg.n_input_units());
  for (int j = 0; j < p.w_in.cols(); ++j)
    for (int i = 0; i < n; ++i) p.w_in(i, j) = rng.normal(0.0, 1.0 / std::sqrt(3.0));
  p.w_rec.resize(n, n);
  const double wrec_std = 1.0 / std::sqrt(static_cast<double>(n));
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) p.w_rec(i, j) = i == j ? 0.0 : rng.normal(0.0, wrec_std);
  const int n_out = cfg.n_outputs;
  const int feat = cfg.feature_dim();
  const double glorot = std::sqrt(6.0 / (feat + n_out));
  p.w_out.resize(n_out, feat);
  for (int j = 0; j < feat; ++j)
    for (int i = 0; i < n_out; ++i) p.w_out(i, j) = rng.uniform(-glorot, glorot);
  p.delays.resize(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i)
      p.delays(i, j) = static_cast<int>(
          rng.uniform_int(cfg.delay_min_steps, cfg.delay_max_steps));
  return p;
}

// A spike with an amplitude: always 1 in the spiking system; the smoothed
// variant used by gradient checks emits fractional amplitudes.
struct Spike {
  int j;
  double amp;
};

struct NetworkState {
  Vec v;                                  // membrane potentials V
  Eigen::VectorXi refrac;                 // remaining blocked steps
  std::vector<std::vector<Spike>> spike_ring;  // slot (t mod depth) = spikes at t
  long t = 0;                             // global step index
  Vec h;                                  // filtered spike traces
  Vec i_work;                             // per-step scratch, not semantic state
  std::vector<int> event_work;            // per-step scratch

  void reset(int n, int ring_depth) {
    v = Vec::Zero(n);
    refrac = Eigen::VectorXi::Zero(n);
    spike_ring.assign(ring_depth, {});
    t = 0;
    h = Vec::Zero(n);
    i_work = Vec::Zero(n);
    event_work.clear();
  }
};

// C1 antiderivative of the surrogate derivative gamma*max(0, 1-|v|),
// saturating at gamma for v >= 1.
inline double smoothed_spike(double v, double gamma) {
  if (v <= -1.0) return 0.0;
  if (v < 0.0) return gamma * 0.5 * (v + 1.0) * (v + 1.0);
  if (v < 1.0) return gamma * (0.5 + v - 0.5 * v * v);
  return gamma;
}

// Spike nonlinearity. `hard` is the production system: binary spikes from a
// threshold crossing. `smoothed` replaces the step with the C1 antiderivative
// of the surrogate derivative, so BPTT on its tape is an exact gradient; the
// refractory trigger stays the hard condition in both modes.
enum class SpikeMode { hard, smoothed };

// Per-step capture for BPTT and records.
struct StepTrace {
  Vec v_norm;                  // normalized potential the spike decision saw
  std::vector<Spike> spikes;   // nonzero spike outputs
  std::vector<int> events;     // hard threshold crossings (refractory triggers)
  std::vector<std::uint8_t> blocked;  // refractory mask at decision time
};

class Reservoir {
 public:
  Reservoir(NeuronConstants consts, ReservoirParams params)
      : c_(consts), p_(std::move(params)) {
    if (p_.w_rec.rows() != p_.w_rec.cols())
      throw ConfigError("w_rec must be square");
    if (p_.delays.rows() != p_.w_rec.rows() || p_.delays.cols() != p_.w_rec.cols())
      throw ConfigError("delays must match w_rec");
    if (p_.delays.size() > 0 &&
        (p_.delays.minCoeff() < c_.delay_min || p_.delays.maxCoeff() > c_.delay_max))
      throw ConfigError("delay entries outside [delay_min, delay_max]");
    refresh();
  }

  int n() const { return p_.n(); }
  const NeuronConstants& consts() const { return c_; }
  const ReservoirParams& params() const { return p_; }
  ReservoirParams& mutable_params() { return p_; }  // call refresh() afterwards

  // Rebuild the per-delay weight slices after any w_rec change.
  void refresh() {
    const int n = p_.n();
    w_d_.assign(c_.delay_max - c_.delay_min + 1, Mat::Zero(n, n));
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i)
        if (i != j) w_d_[p_.delays(i, j) - c_.delay_min](i, j) = p_.w_rec(i, j);
  }

  const Mat& delay_slice(int d) const { return w_d_[d - c_.delay_min]; }

  NetworkState make_state() const {
    NetworkState s;
    s.reset(p_.n(), c_.ring_depth());
    return s;
  }

  // Advance one step given the external input current. Fills `trace` when
  // non-null. Returns the spike list for this step.
  const std::vector<Spike>& step(NetworkState& s, const Vec& i_ext,
                                 StepTrace* trace = nullptr,
                                 SpikeMode mode = SpikeMode::hard) const {
    const int n = p_.n();
    if (s.v.size() != n) throw ConfigError("state does not match reservoir size");
    if (i_ext.size() != n) throw ConfigError("external current must have one entry per neuron");

    // spike decision from the current membrane state; the refractory trigger
    // is the hard crossing in both modes
    const int depth = c_.ring_depth();
    auto& z = s.spike_ring[static_cast<size_t>(s.t % depth)];
    z.clear();
    auto& events = s.event_work;
    events.clear();
    Vec v_norm = (s.v.array() - c_.v_th) / c_.v_th;
    for (int j = 0; j < n; ++j) {
      if (s.refrac[j] != 0) continue;
      if (v_norm[j] > 0.0) events.push_back(j);
      if (mode == SpikeMode::hard) {
        if (v_norm[j] > 0.0) z.push_back({j, 1.0});
      } else {
        const double amp = smoothed_spike(v_norm[j], c_.gamma);
        if (amp > 0.0) z.push_back({j, amp});
      }
    }
    if (trace) {
      trace->events = events;
      trace->blocked.resize(n);
      for (int j = 0; j < n; ++j) trace->blocked[j] = s.refrac[j] > 0 ? 1 : 0;
      trace->v_norm = std::move(v_norm);
      trace->spikes = z;
    }

    // delayed recurrent input plus external drive
    s.i_work = i_ext;
    for (int d = c_.delay_min; d <= c_.delay_max; ++d) {
      const long src = s.t - d;
      if (src < 0) continue;
      const Mat& wd = w_d_[d - c_.delay_min];
      for (const Spike& sp : s.spike_ring[static_cast<size_t>(src % depth)])
        s.i_work += sp.amp * wd.col(sp.j);
    }

    // membrane update, reset by subtraction, refractoriness, traces
    s.v = c_.rho * s.v + (1.0 - c_.rho) * c_.r_m * s.i_work;
    for (int j = 0; j < n; ++j)
      if (s.refrac[j] > 0) --s.refrac[j];
    for (const Spike& sp : z) s.v[sp.j] -= c_.v_th * sp.amp;
    for (int j : events) s.refrac[j] = c_.refractory_steps;
    s.h *= c_.kappa;
    for (const Spike& sp : z) s.h[sp.j] += sp.amp;
    if (!s.v.allFinite())
      throw NumericalError("membrane potential diverged", s.t);
    s.t += 1;
    return z;
  }

 private:
  NeuronConstants c_;
  ReservoirParams p_;
  std::vector<Mat> w_d_;
};

}  // namespace resl2l
