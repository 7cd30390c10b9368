#pragma once

// Reference implementations used only by tests. Deliberately naive: plain
// loops, no shared code with the library's fast paths.

#include <cmath>
#include <complex>
#include <vector>

#include "resl2l/autodiff.hpp"
#include "resl2l/tasks.hpp"

namespace oracles {

// Direct second-order Volterra sum, O(T * bins^2).
inline resl2l::Vec naive_volterra(const resl2l::VolterraTask& task, const resl2l::Vec& x) {
  const int bins = task.cfg.kernel_bins;
  const long n = x.size();
  resl2l::Vec y = resl2l::Vec::Zero(n);
  for (long t = 0; t < n; ++t) {
    double acc = 0;
    for (int tau = 0; tau < bins; ++tau) {
      if (t - tau < 0) break;
      acc += task.k1[tau] * x[t - tau];
    }
    for (int tau1 = 0; tau1 < bins; ++tau1) {
      if (t - tau1 < 0) break;
      for (int tau2 = 0; tau2 < bins; ++tau2) {
        if (t - tau2 < 0) break;
        acc += task.k2(tau1, tau2) * x[t - tau1] * x[t - tau2];
      }
    }
    y[t] = acc;
  }
  return y;
}

// DFT magnitude at one bin via the Goertzel recurrence.
inline double goertzel_mag(const resl2l::Vec& x, long k) {
  const long n = x.size();
  const double w = 2.0 * M_PI * static_cast<double>(k) / static_cast<double>(n);
  const double coeff = 2.0 * std::cos(w);
  double s0 = 0, s1 = 0, s2 = 0;
  for (long i = 0; i < n; ++i) {
    s0 = x[i] + coeff * s1 - s2;
    s2 = s1;
    s1 = s0;
  }
  const std::complex<double> res =
      std::complex<double>(s1 - s2 * std::cos(w), s2 * std::sin(w));
  return std::abs(res);
}

// Exact meta-gradient of a plastic-readout chunk loss with respect to the
// initial readout row, exploiting that the whole window recursion is affine
// in the readout once the trace tape is fixed:
//
//   omega_{w+1} = omega_w + eta sum_{t in w} (y(t) - u(t)^T omega_w) m(t)
//               = (I - eta M_w) omega_w + eta b_w,     M_w = sum m(t) u(t)^T
//
// with u(t) = [x(t); h(t)] and m(t) = [0; h(t)]. Jacobians J_w propagate as
// J_{w+1} = (I - eta M_w) J_w; the loss gradient sums 2(yhat - y) J_w^T u(t)
// over the loss window. Partial trailing windows never apply their update.
inline resl2l::Vec plastic_meta_grad(const resl2l::Exp1Tape& tape, double eta) {
  using resl2l::Mat;
  using resl2l::Vec;
  const int n = tape.net.n;
  const int T = tape.net.T;
  const int spw = tape.steps_per_window;
  const int F = 1 + n;

  Vec omega = tape.w_versions[0].row(0).transpose();
  Mat J = Mat::Identity(F, F);
  Vec grad = Vec::Zero(F);
  for (int w0 = 0; w0 < T; w0 += spw) {
    const int w_end = std::min(T, w0 + spw);
    Mat M = Mat::Zero(F, F);
    Vec b = Vec::Zero(F);
    for (int t = w0; t < w_end; ++t) {
      Vec u(F);
      u[0] = tape.x[t];
      for (int j = 0; j < n; ++j) u[1 + j] = tape.h(j, t);
      Vec m = u;
      m[0] = 0.0;
      const double yhat = u.dot(omega);
      if (t >= tape.loss_from) grad += 2.0 * (yhat - tape.y[t]) * (J.transpose() * u);
      M += m * u.transpose();
      b += tape.y[t] * m;
    }
    if (w_end - w0 == spw) {
      omega = omega - eta * (M * omega) + eta * b;
      J = J - eta * (M * J);
    }
  }
  return grad;
}

// 2-10-1 logistic network, plain loops.
inline double naive_tn(const resl2l::TargetNetwork& tn, double x1, double x2) {
  double out_pre = 0;
  for (int i = 0; i < tn.cfg.n_hidden; ++i) {
    const double pre = tn.w_hidden(i, 0) * x1 + tn.w_hidden(i, 1) * x2 + tn.b_hidden[i];
    const double h = 1.0 / (1.0 + std::exp(-pre));
    out_pre += tn.w_out[i] * h;
  }
  return tn.cfg.output_sigmoid ? 1.0 / (1.0 + std::exp(-out_pre)) : out_pre;
}

}  // namespace oracles
