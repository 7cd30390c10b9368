#pragma once
// Comparison systems: ridge-regression readout on spike traces, and direct
// online backpropagation on a fresh 2-10-1 network fed the same example
// stream. Random-reservoir evaluation lives next to evaluate().

#include <cmath>
#include <cstdint>
#include <vector>

#include "resl2l/adam.hpp"
#include "resl2l/common.hpp"
#include "resl2l/inner_loop.hpp"
#include "resl2l/record.hpp"

namespace resl2l {

// ---------- ridge readout ----------

struct RidgeConfig {
  double l2 = 100.0;
  double train_fraction = 0.8;  // first 320 of 400 steps
  bool intercept = false;
  bool standardize = false;
};

struct RidgeResult {
  Vec weights;  // feature weights; intercept last when enabled
  double train_mse = 0;
  double test_mse = 0;
  double normal_residual = 0;  // relative residual of the normal equations
  int n_train = 0;
  int n_test = 0;
};

// Per-step features: the 1 ms exponential trace averaged within each step.
inline Mat step_mean_traces(const EpisodeRecord& r) {
  if (!r.full) throw ConfigError("ridge baseline needs a full record with traces");
  const int B = r.bins_per_step;
  const int S = static_cast<int>(r.predictions.size());
  const int n = r.n_neurons;
  if (r.traces.cols() < static_cast<Eigen::Index>(S) * B)
    throw ConfigError("record traces shorter than its step count");
  Mat X(S, n);
  for (int s = 0; s < S; ++s) {
    Vec m = Vec::Zero(n);
    for (int b = 0; b < B; ++b) m += r.traces.col(static_cast<Eigen::Index>(s) * B + b).cast<double>();
    X.row(s) = (m / B).transpose();
  }
  return X;
}

// Closed-form solve of (X_trᵀX_tr + λI)w = X_trᵀy_tr on the leading
// train_fraction of rows; the intercept column, when present, is unpenalized.
inline RidgeResult ridge_solve(const Mat& X_in, const Vec& y, const RidgeConfig& rc) {
  if (X_in.rows() != y.size()) throw ConfigError("ridge: feature/target row mismatch");
  if (rc.l2 < 0) throw ConfigError("ridge: negative l2 factor");
  const int S = static_cast<int>(X_in.rows());
  const int n_train = static_cast<int>(std::lround(rc.train_fraction * S));
  if (n_train < 1 || n_train > S) throw ConfigError("ridge: bad train fraction");

  Mat X = X_in;
  if (rc.standardize) {
    for (int j = 0; j < X.cols(); ++j) {
      const double mu = X.col(j).head(n_train).mean();
      double sd = std::sqrt((X.col(j).head(n_train).array() - mu).square().sum() /
                            std::max(1, n_train - 1));
      if (sd < 1e-12) sd = 1.0;
      X.col(j) = (X.col(j).array() - mu) / sd;
    }
  }
  if (rc.intercept) {
    X.conservativeResize(Eigen::NoChange, X.cols() + 1);
    X.col(X.cols() - 1).setOnes();
  }

  const int F = static_cast<int>(X.cols());
  const Mat Xtr = X.topRows(n_train);
  const Vec ytr = y.head(n_train);
  Mat A = Xtr.transpose() * Xtr;
  for (int j = 0; j < (rc.intercept ? F - 1 : F); ++j) A(j, j) += rc.l2;
  const Vec b = Xtr.transpose() * ytr;

  RidgeResult out;
  out.weights = A.ldlt().solve(b);
  if (!out.weights.allFinite()) throw NumericalError("ridge system is singular", 0);
  const double bn = b.norm();
  out.normal_residual = bn > 0 ? (A * out.weights - b).norm() / bn : 0.0;
  out.n_train = n_train;
  out.n_test = S - n_train;

  const Vec pred = X * out.weights;
  out.train_mse = (pred.head(n_train) - ytr).squaredNorm() / n_train;
  out.test_mse = out.n_test > 0
                     ? (pred.tail(out.n_test) - y.tail(out.n_test)).squaredNorm() / out.n_test
                     : 0.0;
  return out;
}

inline RidgeResult ridge_fit_eval(const EpisodeRecord& r, const RidgeConfig& rc = {}) {
  const Mat X = step_mean_traces(r);
  Vec y(r.targets.size());
  for (size_t i = 0; i < r.targets.size(); ++i) y[static_cast<Eigen::Index>(i)] = r.targets[i];
  return ridge_solve(X, y, rc);
}

// ---------- online backprop on the target-network architecture ----------

// 2-10-1 with logistic units throughout and no output bias, the same shape
// the tasks are drawn from.
struct Mlp {
  Mat w1;  // [hidden x 2]
  Mat b1;  // [hidden x 1]
  Mat w2;  // [1 x hidden]

  double forward(double x1, double x2) const {
    Eigen::Vector2d x(x1, x2);
    Vec h = (w1 * x + b1.col(0)).unaryExpr([](double v) { return logistic(v); });
    return logistic((w2 * h)(0, 0));
  }
};

struct MlpGrads {
  Mat w1, b1, w2;
};

inline Mlp glorot_mlp(int n_hidden, Rng& rng) {
  Mlp net;
  const double s1 = std::sqrt(2.0 / (2 + n_hidden));
  const double s2 = std::sqrt(2.0 / (n_hidden + 1));
  net.w1.setZero(n_hidden, 2);
  for (int i = 0; i < n_hidden; ++i)
    for (int j = 0; j < 2; ++j) net.w1(i, j) = s1 * rng.normal();
  net.b1.setZero(n_hidden, 1);
  net.w2.setZero(1, n_hidden);
  for (int i = 0; i < n_hidden; ++i) net.w2(0, i) = s2 * rng.normal();
  return net;
}

// Squared error on one example plus its gradient.
inline double mlp_loss_grad(const Mlp& net, double x1, double x2, double y, MlpGrads& g) {
  Eigen::Vector2d x(x1, x2);
  const Vec pre1 = net.w1 * x + net.b1.col(0);
  const Vec h = pre1.unaryExpr([](double v) { return logistic(v); });
  const double yhat = logistic((net.w2 * h)(0, 0));
  const double err = yhat - y;

  const double d_pre2 = 2.0 * err * yhat * (1.0 - yhat);
  g.w2 = d_pre2 * h.transpose();
  const Vec d_h = net.w2.transpose() * d_pre2;
  const Vec d_pre1 = d_h.array() * h.array() * (1.0 - h.array());
  g.w1 = d_pre1 * x.transpose();
  g.b1 = d_pre1;
  return err * err;
}

// One Adam+AMSGrad step per observed example.
class MlpTrainer {
 public:
  MlpTrainer(Mlp net, const AdamConfig& cfg) : net_(std::move(net)), cfg_(cfg) {
    cfg_.amsgrad = true;
    s_w1_.init(net_.w1);
    s_b1_.init(net_.b1);
    s_w2_.init(net_.w2);
  }

  const Mlp& net() const { return net_; }

  // Returns the squared error before updating on the example.
  double observe(double x1, double x2, double y) {
    MlpGrads g;
    const double sq = mlp_loss_grad(net_, x1, x2, y, g);
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    s_w1_.update(net_.w1, g.w1, cfg_, bc1, bc2);
    s_b1_.update(net_.b1, g.b1, cfg_, bc1, bc2);
    s_w2_.update(net_.w2, g.w2, cfg_, bc1, bc2);
    return sq;
  }

 private:
  Mlp net_;
  AdamConfig cfg_;
  AdamSlot s_w1_, s_b1_, s_w2_;
  std::int64_t step_ = 0;
};

inline AdamConfig backprop_adam_config(const RunConfig& cfg) {
  AdamConfig ac;
  ac.lr = cfg.bp_lr;
  ac.beta1 = cfg.bp_beta1;
  ac.beta2 = cfg.bp_beta2;
  ac.weight_decay = cfg.bp_weight_decay;
  ac.amsgrad = true;
  return ac;
}

// Per-example training error of a fresh net on one episode's example stream.
inline Vec backprop_baseline_curve(const Exp2Episode& ep, const RunConfig& cfg, Rng& init_rng) {
  if (cfg.task_family != "tn") throw ConfigError("backprop baseline is defined for the tn family");
  MlpTrainer tr(glorot_mlp(10, init_rng), backprop_adam_config(cfg));
  const int S = static_cast<int>(ep.y.size());
  Vec curve(S);
  for (int s = 0; s < S; ++s) curve[s] = tr.observe(ep.xs(0, s), ep.xs(1, s), ep.y[s]);
  return curve;
}

struct BaselineCurve {
  Vec mean;
  Vec stddev;
  int n_tasks = 0;
};

// Mean and std of the per-example error over sampled tasks. Task and episode
// streams use the evaluation derivations, so with the same seed the nets see
// exactly the examples the reservoir was scored on.
inline BaselineCurve backprop_baseline(const RunConfig& cfg, int n_tasks, std::uint64_t seed) {
  BaselineCurve out;
  out.n_tasks = n_tasks;
  if (n_tasks <= 0) return out;
  const int S = cfg.steps_per_episode;
  Mat curves(n_tasks, S);
  for (int b = 0; b < n_tasks; ++b) {
    Rng task_rng = Rng::derive(seed, {stream_tag("eval-task"), static_cast<std::uint64_t>(b)});
    const AnyTask task = sample_task(cfg, task_rng);
    Rng ep_rng = Rng::derive(seed, {stream_tag("eval-episode"), static_cast<std::uint64_t>(b)});
    const Exp2Episode ep = make_exp2_episode(cfg, task, ep_rng);
    Rng init_rng = Rng::derive(seed, {stream_tag("bp-init"), static_cast<std::uint64_t>(b)});
    curves.row(b) = backprop_baseline_curve(ep, cfg, init_rng).transpose();
  }
  out.mean = curves.colwise().mean();
  out.stddev.setZero(S);
  if (n_tasks > 1) {
    for (int s = 0; s < S; ++s) {
      const double mu = out.mean[s];
      out.stddev[s] = std::sqrt((curves.col(s).array() - mu).square().sum() / (n_tasks - 1));
    }
  }
  return out;
}

}  // namespace resl2l
