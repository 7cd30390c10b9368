#pragma once

// Task families: random second-order Volterra filters over sum-of-sines
// inputs, random 2-10-1 sigmoidal target networks, and random sine functions.
// Task instances are pure values; kernels are rebuilt deterministically from
// the sampled parameters.

#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Eigenvalues>
#include <json.hpp>

#include "resl2l/common.hpp"
#include "resl2l/rng.hpp"

namespace resl2l {

// ---------------------------------------------------------------------------
// Volterra filter tasks

struct VolterraConfig {
  int kernel_bins = 500;        // kernel support in 1 ms bins
  double bin_s = 0.001;         // bin width in seconds
  double t1_s = 0.323;          // input sine periods
  double t2_s = 0.5;
  double k2_time_unit_s = 0.01; // lag unit for the k2 quadratic form
  double k2_scale = 14.0;       // target L1 mass of k2
  double k1_l1_min = 1e-6;      // resample threshold for degenerate k1
  double k2_rank_tol = 1e-14;   // relative eigenvalue cutoff for the fast path
};

inline bool operator==(const VolterraConfig& a, const VolterraConfig& b) {
  return a.kernel_bins == b.kernel_bins && a.bin_s == b.bin_s && a.t1_s == b.t1_s &&
         a.t2_s == b.t2_s && a.k2_time_unit_s == b.k2_time_unit_s &&
         a.k2_scale == b.k2_scale && a.k1_l1_min == b.k1_l1_min &&
         a.k2_rank_tol == b.k2_rank_tol;
}

struct VolterraTask {
  VolterraConfig cfg;
  // Sampled parameters; everything below is derived from them.
  double a[2] = {0, 0};       // k1 mixture coefficients, U[-1,1]
  double b[2] = {0.2, 0.2};   // k1 time constants in seconds, U[0.1,0.3]
  double u = 0, v = 0;        // k2 covariance parameters, U[-12,12]
  double amp[2] = {1, 1};     // input amplitudes, U[0.5,1]
  double phase[2] = {0, 0};   // input phases, U[0,pi/2]

  Vec k1;                     // [bins], L1-normalized
  Mat sigma;                  // 2x2, det == 1, positive definite
  Mat k2;                     // [bins x bins], L1 mass == k2_scale

  // Eigendecomposition of k2 for the fast quadratic term; kernels are stored
  // reversed so the filter reduces to contiguous dots.
  Vec k2_eigvals;             // retained eigenvalues
  Mat k2_eigvecs_rev;         // [bins x rank], each column reversed
  Vec k1_rev;

  void rebuild();
};

inline Mat volterra_sigma(double u, double v) {
  const double s = std::sqrt(1.0 + u * u + v * v);
  Mat m(2, 2);
  m << s + u, v, v, s - u;
  return m;
}

inline void VolterraTask::rebuild() {
  const int n = cfg.kernel_bins;

  Vec k1_raw(n);
  for (int i = 0; i < n; ++i) {
    const double t = i * cfg.bin_s;
    k1_raw[i] = a[0] * std::exp(-t / b[0]) + a[1] * std::exp(-t / b[1]);
  }
  k1 = k1_raw / k1_raw.lpNorm<1>();

  sigma = volterra_sigma(u, v);
  // det(sigma) == 1, so the inverse is the adjugate.
  Mat sigma_inv(2, 2);
  sigma_inv << sigma(1, 1), -sigma(0, 1), -sigma(1, 0), sigma(0, 0);

  Mat k2_raw(n, n);
  for (int i = 0; i < n; ++i) {
    const double t1 = i * cfg.bin_s / cfg.k2_time_unit_s;
    for (int j = 0; j < n; ++j) {
      const double t2 = j * cfg.bin_s / cfg.k2_time_unit_s;
      const double q = sigma_inv(0, 0) * t1 * t1 + 2.0 * sigma_inv(0, 1) * t1 * t2 +
                       sigma_inv(1, 1) * t2 * t2;
      k2_raw(i, j) = std::exp(-q / 24.0);
    }
  }
  k2 = k2_raw * (cfg.k2_scale / k2_raw.lpNorm<1>());

  // k2 is asymmetric for u != 0 but the quadratic form only sees its
  // symmetric part, which also preserves the L1 mass (entries are positive).
  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (k2 + k2.transpose()));
  const Vec& evals = es.eigenvalues();
  const double cutoff = cfg.k2_rank_tol * evals.cwiseAbs().maxCoeff();
  std::vector<int> keep;
  for (int i = 0; i < n; ++i)
    if (std::abs(evals[i]) > cutoff) keep.push_back(i);
  k2_eigvals.resize(static_cast<int>(keep.size()));
  k2_eigvecs_rev.resize(n, static_cast<int>(keep.size()));
  for (int c = 0; c < static_cast<int>(keep.size()); ++c) {
    k2_eigvals[c] = evals[keep[c]];
    k2_eigvecs_rev.col(c) = es.eigenvectors().col(keep[c]).reverse();
  }
  k1_rev = k1.reverse();
}

inline VolterraTask sample_volterra(Rng& rng, const VolterraConfig& cfg = {}) {
  VolterraTask task;
  task.cfg = cfg;
  for (;;) {
    for (int n = 0; n < 2; ++n) {
      task.a[n] = rng.uniform(-1.0, 1.0);
      task.b[n] = rng.uniform(0.1, 0.3);
    }
    // Degenerate nearly-cancelling mixtures make the normalization blow up.
    double l1 = 0;
    for (int i = 0; i < cfg.kernel_bins; ++i) {
      const double t = i * cfg.bin_s;
      l1 += std::abs(task.a[0] * std::exp(-t / task.b[0]) +
                     task.a[1] * std::exp(-t / task.b[1]));
    }
    if (l1 >= cfg.k1_l1_min) break;
  }
  task.u = rng.uniform(-12.0, 12.0);
  task.v = rng.uniform(-12.0, 12.0);
  for (int n = 0; n < 2; ++n) {
    task.amp[n] = rng.uniform(0.5, 1.0);
    task.phase[n] = rng.uniform(0.0, M_PI / 2.0);
  }
  task.rebuild();
  return task;
}

// x(t) = sum_n A_n sin(2 pi t / T_n + phi_n), sampled at bin_s.
inline Vec gen_input(const VolterraTask& task, long n_steps) {
  if (n_steps < 1) throw ConfigError("gen_input: n_steps must be >= 1");
  Vec x(n_steps);
  const double periods[2] = {task.cfg.t1_s, task.cfg.t2_s};
  for (long t = 0; t < n_steps; ++t) {
    const double ts = t * task.cfg.bin_s;
    double val = 0;
    for (int n = 0; n < 2; ++n)
      val += task.amp[n] * std::sin(2.0 * M_PI * ts / periods[n] + task.phase[n]);
    x[t] = val;
  }
  return x;
}

// y(t) = sum_tau k1(tau) x(t-tau) + sum_{tau1,tau2} k2(tau1,tau2) x(t-tau1) x(t-tau2)
// with x(t) = 0 for t < 0. The quadratic term runs through the retained
// eigenpairs of k2: sum_r lambda_r (q_r * x)(t)^2.
inline Vec apply_volterra(const VolterraTask& task, const Vec& x) {
  const int bins = task.cfg.kernel_bins;
  const long n = x.size();
  const int rank = static_cast<int>(task.k2_eigvals.size());
  Vec y(n);
  for (long t = 0; t < n; ++t) {
    const long lo = std::max<long>(0, t - bins + 1);
    const long len = t - lo + 1;
    const long koff = lo - t + bins - 1;
    const auto seg = x.segment(lo, len);
    double val = seg.dot(task.k1_rev.segment(koff, len));
    for (int r = 0; r < rank; ++r) {
      const double c = seg.dot(task.k2_eigvecs_rev.col(r).segment(koff, len));
      val += task.k2_eigvals[r] * c * c;
    }
    y[t] = val;
  }
  return y;
}

inline void to_json(nlohmann::json& j, const VolterraTask& t) {
  j = nlohmann::json{{"family", "volterra"},
                     {"a", {t.a[0], t.a[1]}},
                     {"b", {t.b[0], t.b[1]}},
                     {"u", t.u},
                     {"v", t.v},
                     {"amp", {t.amp[0], t.amp[1]}},
                     {"phase", {t.phase[0], t.phase[1]}},
                     {"kernel_bins", t.cfg.kernel_bins}};
}

inline void from_json(const nlohmann::json& j, VolterraTask& t) {
  t.cfg.kernel_bins = j.at("kernel_bins").get<int>();
  for (int n = 0; n < 2; ++n) {
    t.a[n] = j.at("a")[n].get<double>();
    t.b[n] = j.at("b")[n].get<double>();
    t.amp[n] = j.at("amp")[n].get<double>();
    t.phase[n] = j.at("phase")[n].get<double>();
  }
  t.u = j.at("u").get<double>();
  t.v = j.at("v").get<double>();
  t.rebuild();
}

// ---------------------------------------------------------------------------
// Target-network tasks

struct TargetNetworkConfig {
  int n_hidden = 10;
  bool output_sigmoid = true;  // output unit nonlinearity (no output bias)
  double input_lo = -1.0;      // sampling domain of (x1, x2)
  double input_hi = 1.0;
};

struct TargetNetwork {
  TargetNetworkConfig cfg;
  Mat w_hidden;  // [n_hidden x 2], U[-1,1]
  Vec b_hidden;  // [n_hidden],     U[-1,1]
  Vec w_out;     // [n_hidden],     U[-1,1]
};

inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline TargetNetwork sample_target_network(Rng& rng, const TargetNetworkConfig& cfg = {}) {
  TargetNetwork tn;
  tn.cfg = cfg;
  tn.w_hidden.resize(cfg.n_hidden, 2);
  tn.b_hidden.resize(cfg.n_hidden);
  tn.w_out.resize(cfg.n_hidden);
  for (int i = 0; i < cfg.n_hidden; ++i) {
    tn.w_hidden(i, 0) = rng.uniform(-1.0, 1.0);
    tn.w_hidden(i, 1) = rng.uniform(-1.0, 1.0);
    tn.b_hidden[i] = rng.uniform(-1.0, 1.0);
    tn.w_out[i] = rng.uniform(-1.0, 1.0);
  }
  return tn;
}

inline double eval_tn(const TargetNetwork& tn, double x1, double x2) {
  Eigen::Vector2d x(x1, x2);
  Vec h = tn.w_hidden * x + tn.b_hidden;
  for (int i = 0; i < h.size(); ++i) h[i] = logistic(h[i]);
  const double pre = tn.w_out.dot(h);
  return tn.cfg.output_sigmoid ? logistic(pre) : pre;
}

inline void to_json(nlohmann::json& j, const TargetNetwork& tn) {
  std::vector<double> wh(tn.w_hidden.data(), tn.w_hidden.data() + tn.w_hidden.size());
  j = nlohmann::json{{"family", "tn"},
                     {"n_hidden", tn.cfg.n_hidden},
                     {"output_sigmoid", tn.cfg.output_sigmoid},
                     {"w_hidden", wh},
                     {"b_hidden", std::vector<double>(tn.b_hidden.data(),
                                                      tn.b_hidden.data() + tn.b_hidden.size())},
                     {"w_out", std::vector<double>(tn.w_out.data(),
                                                   tn.w_out.data() + tn.w_out.size())}};
}

inline void from_json(const nlohmann::json& j, TargetNetwork& tn) {
  tn.cfg.n_hidden = j.at("n_hidden").get<int>();
  tn.cfg.output_sigmoid = j.at("output_sigmoid").get<bool>();
  const auto wh = j.at("w_hidden").get<std::vector<double>>();
  tn.w_hidden = Eigen::Map<const Mat>(wh.data(), tn.cfg.n_hidden, 2);
  const auto bh = j.at("b_hidden").get<std::vector<double>>();
  tn.b_hidden = Eigen::Map<const Vec>(bh.data(), tn.cfg.n_hidden);
  const auto wo = j.at("w_out").get<std::vector<double>>();
  tn.w_out = Eigen::Map<const Vec>(wo.data(), tn.cfg.n_hidden);
}

// ---------------------------------------------------------------------------
// Sine tasks

struct SineConfig {
  double amp_lo = 0.1;
  double amp_hi = 5.0;
  double input_lo = -M_PI;  // sampling domain of x
  double input_hi = M_PI;
};

struct SineTask {
  SineConfig cfg;
  double amplitude = 1.0;  // [amp_lo, amp_hi]
  double phase = 0.0;      // [0, 2pi)
};

inline SineTask sample_sine(Rng& rng, const SineConfig& cfg = {}) {
  SineTask t;
  t.cfg = cfg;
  t.amplitude = rng.uniform(cfg.amp_lo, cfg.amp_hi);
  t.phase = rng.uniform(0.0, 2.0 * M_PI);
  return t;
}

inline double eval_sine(const SineTask& t, double x) {
  return t.amplitude * std::sin(x + t.phase);
}

inline void to_json(nlohmann::json& j, const SineTask& t) {
  j = nlohmann::json{{"family", "sine"}, {"amplitude", t.amplitude}, {"phase", t.phase}};
}

inline void from_json(const nlohmann::json& j, SineTask& t) {
  t.amplitude = j.at("amplitude").get<double>();
  t.phase = j.at("phase").get<double>();
}

}  // namespace resl2l
