#pragma once

// Backpropagation through time over the reservoir dynamics, with the spike
// discontinuity crossed by the dampened triangular pseudo-derivative
//
//   dz/dv = gamma * max(0, 1 - |v|),   zero while refractory.
//
// The same sweep serves both experiments through a hooks object that injects
// the readout couplings: the plastic-readout chain of experiment 1 (whose
// weight updates are themselves on the tape) or the fixed spike-count readout
// of experiment 2. Gradients flow through the reset term by default.

#include <vector>

#include "resl2l/common.hpp"
#include "resl2l/config.hpp"
#include "resl2l/lif.hpp"

namespace resl2l {

struct Gradients {
  Mat d_w_in, d_w_rec, d_w_out;

  static Gradients zeros_like(const ReservoirParams& p) {
    Gradients g;
    g.d_w_in = Mat::Zero(p.w_in.rows(), p.w_in.cols());
    g.d_w_rec = Mat::Zero(p.w_rec.rows(), p.w_rec.cols());
    g.d_w_out = Mat::Zero(p.w_out.rows(), p.w_out.cols());
    return g;
  }
  void add_scaled(const Gradients& o, double c) {
    d_w_in += c * o.d_w_in;
    d_w_rec += c * o.d_w_rec;
    d_w_out += c * o.d_w_out;
  }
  void scale(double c) {
    d_w_in *= c;
    d_w_rec *= c;
    d_w_out *= c;
  }
  double squared_norm() const {
    return d_w_in.squaredNorm() + d_w_rec.squaredNorm() + d_w_out.squaredNorm();
  }
  bool all_finite() const {
    return d_w_in.allFinite() && d_w_rec.allFinite() && d_w_out.allFinite();
  }
};

// Scales the gradient so its global L2 norm does not exceed max_norm.
inline void clip_global_norm(Gradients& g, double max_norm) {
  const double norm = std::sqrt(g.squared_norm());
  if (norm > max_norm) g.scale(max_norm / norm);
}

// Forward capture of the network-side quantities every backward pass needs.
struct NetTape {
  int n = 0, T = 0;
  Mat v_norm;                              // [n x T]
  SpikeMat blocked;                        // [n x T]
  std::vector<std::vector<Spike>> spikes;  // per step

  void resize(int n_, int T_) {
    n = n_;
    T = T_;
    v_norm.resize(n, T);
    blocked.resize(n, T);
    spikes.assign(static_cast<size_t>(T), {});
  }
  void capture(int t, const StepTrace& trace) {
    v_norm.col(t) = trace.v_norm;
    for (int j = 0; j < n; ++j) blocked(j, t) = trace.blocked[j];
    spikes[static_cast<size_t>(t)] = trace.spikes;
  }
  // spike counts (amplitude mass) per neuron
  Vec spike_mass() const {
    Vec mass = Vec::Zero(n);
    for (const auto& list : spikes)
      for (const Spike& sp : list) mass[sp.j] += sp.amp;
    return mass;
  }
};

// Firing-rate regularization  alpha * sum_j (f_j - target)^2  with f_j in Hz
// computed from the tape's spike mass over its duration.
struct RateReg {
  double loss = 0;
  Vec dz_const;  // dL/dz_j(t), identical for every step

  RateReg(const NetTape& tape, double alpha, double target_hz, double dt_ms) {
    const double dur_s = tape.T * dt_ms / 1000.0;
    const Vec f = tape.spike_mass() / dur_s;
    const Vec dev = f.array() - target_hz;
    loss = alpha * dev.squaredNorm();
    dz_const = 2.0 * alpha / dur_s * dev;
  }
};

// Reverse sweep over one tape. Hooks must provide:
//   static constexpr bool kTracePath;      // readout consumes traces h(t)
//   void add_dz(int t, Vec& lz);           // direct dL/dz(t) contributions
//   Vec trace_grad(int t);                 // direct dL/dh(t)  (kTracePath only)
//   void grad_w_in(int t, const Vec& li, Mat& d_w_in);
// and may accumulate d_w_out internally (see the per-experiment heads).
template <typename Hooks>
inline void backward_network(const NetTape& tape, const Reservoir& res, Hooks& hooks,
                             Gradients& g, bool detach_reset = false) {
  const NeuronConstants& c = res.consts();
  const ReservoirParams& p = res.params();
  const int n = tape.n;
  const int T = tape.T;
  const int depth = c.ring_depth();
  const double i_gain = (1.0 - c.rho) * c.r_m;

  Vec lv_next = Vec::Zero(n);             // dL/dV(t+1)
  Vec lh_next = Vec::Zero(n);             // dL/dh(t+1) carried through the decay
  std::vector<Vec> li_ring(static_cast<size_t>(depth), Vec::Zero(n));
  Vec lz(n), psi(n);

  for (int t = T - 1; t >= 0; --t) {
    // dL/dI(t), entering the ring for the delayed gathers below
    Vec& li = li_ring[static_cast<size_t>(t % depth)];
    li = i_gain * lv_next;

    // dL/dz(t): delayed recurrent fan-out, readout couplings, reset path
    lz.setZero();
    for (int d = c.delay_min; d <= c.delay_max; ++d) {
      if (t + d >= T) continue;
      lz.noalias() += res.delay_slice(d).transpose() *
                      li_ring[static_cast<size_t>((t + d) % depth)];
    }
    hooks.add_dz(t, lz);
    if constexpr (Hooks::kTracePath) {
      lh_next = c.kappa * lh_next + hooks.trace_grad(t);
      lz += lh_next;
    }
    if (!detach_reset) lz -= c.v_th * lv_next;

    // surrogate factor dz/dV, silenced while refractory
    for (int j = 0; j < n; ++j) {
      const double av = std::abs(tape.v_norm(j, t));
      psi[j] = tape.blocked(j, t) ? 0.0
                                  : c.gamma * std::max(0.0, 1.0 - av) / c.v_th;
    }
    lv_next = c.rho * lv_next + psi.cwiseProduct(lz);

    // parameter gradients at this step
    hooks.grad_w_in(t, li, g.d_w_in);
    for (const Spike& sp : tape.spikes[static_cast<size_t>(t)]) {
      for (int i = 0; i < n; ++i) {
        const int d = p.delays(i, sp.j);
        if (t + d >= T) continue;
        g.d_w_rec(i, sp.j) += li_ring[static_cast<size_t>((t + d) % depth)][i] * sp.amp;
      }
    }
  }
  g.d_w_rec.diagonal().setZero();
}

// ---------------------------------------------------------------------------
// Experiment 2 head: fixed linear readout of per-window mean firing rates.

struct Exp2Tape {
  NetTape net;
  int bins_per_step = 20;
  SpikeMat raster;  // [n_input_units x T] encoder spikes
  Mat phi;          // [n x S] window mean rates (counts / bins)
  Vec yhat, y;      // [S]
  int n_steps() const { return static_cast<int>(yhat.size()); }
};

struct Exp2Hooks {
  static constexpr bool kTracePath = false;
  const Exp2Tape& tape;
  Mat lz_by_window;  // [n x S]
  Vec reg_dz;

  Exp2Hooks(const Exp2Tape& t, const ReservoirParams& p, const RateReg& reg,
            Mat& d_w_out)
      : tape(t), reg_dz(reg.dz_const) {
    const Vec ly = 2.0 * (t.yhat - t.y);            // dL/dyhat per window
    d_w_out.noalias() += (t.phi * ly).transpose();  // [1 x n]
    lz_by_window.noalias() = p.w_out.transpose() * ly.transpose() /
                             static_cast<double>(t.bins_per_step);  // [n x S]
  }
  void add_dz(int t, Vec& lz) {
    lz += lz_by_window.col(t / tape.bins_per_step);
    lz += reg_dz;
  }
  Vec trace_grad(int) { return Vec(); }
  void grad_w_in(int t, const Vec& li, Mat& d_w_in) {
    for (int u = 0; u < tape.raster.rows(); ++u)
      if (tape.raster(u, t)) d_w_in.col(u) += li;
  }
};

// Full-episode gradient for the dynamics-only regime. Returns the prediction
// loss; the regularization loss is reported via `reg_loss`.
inline double backward_exp2(const Exp2Tape& tape, const Reservoir& res, double reg_alpha,
                            double target_rate_hz, Gradients& g, double* reg_loss,
                            bool detach_reset = false) {
  const RateReg reg(tape.net, reg_alpha, target_rate_hz, res.consts().dt_ms);
  // dL/dz from the regularizer is uniform over steps; prediction coupling per window
  Exp2Hooks hooks(tape, res.params(), reg, g.d_w_out);
  backward_network(tape.net, res, hooks, g, detach_reset);
  if (reg_loss) *reg_loss = reg.loss;
  return (tape.yhat - tape.y).squaredNorm();
}

// ---------------------------------------------------------------------------
// Experiment 1 head: plastic readout whose accumulated updates sit on the tape.
//
// Within one 3 s chunk the readout W is updated at the end of every 1 s
// window by  W_h += eta * sum_{t in window} (y - yhat) h(t)^T  (the trace
// block only; the input column is touched only by the outer loop). Walking
// windows backwards, lw_after tracks dL/dW(w+1); at the bottom of each window
// the accumulated direct-use gradient folds into it. What is left at the
// bottom of the chunk is dL/dW(chunk entry), which is the W^out,init gradient
// for the first chunk and is discarded (truncation) for later ones.

struct Exp1Tape {
  NetTape net;
  Mat h;                      // [n x T] traces after each step
  Vec x, y, yhat;             // [T] analog input, target, prediction
  std::vector<Mat> w_versions;  // [1 x F] readout used during each window
  int steps_per_window = 1000;
  int loss_from = 0;          // first step index inside the loss window
};

struct Exp1Hooks {
  static constexpr bool kTracePath = true;
  const Exp1Tape& tape;
  double eta;
  Vec reg_dz;
  Mat lw_after;  // [1 x F] dL/dW(version after the current window)
  Mat acc;       // direct-use gradient of the current window
  int n;

  Exp1Hooks(const Exp1Tape& t, double eta_, const RateReg& reg)
      : tape(t), eta(eta_), reg_dz(reg.dz_const), n(t.net.n) {
    const int F = static_cast<int>(t.w_versions[0].cols());
    lw_after = Mat::Zero(1, F);
    acc = Mat::Zero(1, F);
  }

  void add_dz(int, Vec& lz) { lz += reg_dz; }

  Vec trace_grad(int t) {
    const int w = t / tape.steps_per_window;
    const Mat& W = tape.w_versions[static_cast<size_t>(w)];
    const double e = tape.y[t] - tape.yhat[t];
    const auto lw_h = lw_after.row(0).tail(n);  // trace block of dL/dW(w+1)
    double ly = (t >= tape.loss_from) ? 2.0 * (tape.yhat[t] - tape.y[t]) : 0.0;
    ly -= eta * lw_h.dot(tape.h.col(t));
    acc(0, 0) += ly * tape.x[t];
    acc.row(0).tail(n) += ly * tape.h.col(t).transpose();
    Vec lh = W.row(0).tail(n).transpose() * ly;
    lh += eta * e * lw_h.transpose();
    if (t % tape.steps_per_window == 0) {
      lw_after += acc;
      acc.setZero();
    }
    return lh;
  }

  void grad_w_in(int t, const Vec& li, Mat& d_w_in) {
    d_w_in.col(0) += tape.x[t] * li;
  }
};

// Gradient of one chunk. d_w_out receives dL/d(readout at chunk entry), which
// callers add for the first chunk of a task only.
inline double backward_exp1_chunk(const Exp1Tape& tape, const Reservoir& res,
                                  const RunConfig& cfg, Gradients& g, bool first_chunk,
                                  double* reg_loss) {
  const RateReg reg(tape.net, cfg.reg_alpha, cfg.target_rate_hz, res.consts().dt_ms);
  Exp1Hooks hooks(tape, cfg.eta, reg);
  backward_network(tape.net, res, hooks, g, cfg.detach_reset);
  if (first_chunk) g.d_w_out += hooks.lw_after;
  if (reg_loss) *reg_loss = reg.loss;
  double pred = 0;
  for (int t = tape.loss_from; t < tape.net.T; ++t) {
    const double d = tape.yhat[t] - tape.y[t];
    pred += d * d;
  }
  return pred;
}

}  // namespace resl2l
