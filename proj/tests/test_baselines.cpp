#include <catch2/catch_amalgamated.hpp>

#include "resl2l/baselines.hpp"
#include "resl2l/outer_loop.hpp"

using namespace resl2l;

namespace {

Mat random_mat(int r, int c, Rng& rng) {
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) m(i, j) = rng.normal();
  return m;
}

RunConfig tn_cfg() {
  RunConfig cfg = preset_config("exp2-tn-desk");
  cfg.n_neurons = 30;
  cfg.steps_per_episode = 50;
  cfg.pop_n_units = 10;
  cfg.seed = 77;
  return cfg;
}

EpisodeRecord small_full_record(const RunConfig& cfg, std::uint64_t seed) {
  Rng init_rng = Rng::derive(seed, {stream_tag("init")});
  const ReservoirParams params = init_reservoir(cfg, init_rng);
  const Reservoir res(NeuronConstants::from_config(cfg), params);
  Rng task_rng = Rng::derive(seed, {stream_tag("task")});
  const AnyTask task = sample_task(cfg, task_rng);
  Rng ep_rng = Rng::derive(seed, {stream_tag("episode")});
  const Exp2Episode ep = make_exp2_episode(cfg, task, ep_rng);
  EpisodeRecord rec = make_exp2_record(cfg, true, seed);
  NetworkState state = res.make_state();
  forward_exp2_episode(res, cfg, ep, state, SpikeMode::hard, nullptr, &rec);
  return rec;
}

}  // namespace

TEST_CASE("ridge solutions satisfy the normal equations") {
  Rng rng(31);
  const Mat X = random_mat(400, 25, rng);
  Vec y(400);
  for (int i = 0; i < 400; ++i) y[i] = rng.normal();

  RidgeConfig rc;
  const RidgeResult res = ridge_solve(X, y, rc);
  REQUIRE(res.n_train == 320);
  REQUIRE(res.n_test == 80);
  REQUIRE(res.normal_residual <= 1e-8);
}

TEST_CASE("ridge recovers realizable targets as the penalty vanishes") {
  Rng rng(32);
  const Mat X = random_mat(400, 20, rng);
  Vec w_true(20);
  for (int i = 0; i < 20; ++i) w_true[i] = rng.normal();
  const Vec y = X * w_true;

  RidgeConfig rc;
  rc.l2 = 1e-10;
  const RidgeResult res = ridge_solve(X, y, rc);
  REQUIRE(res.train_mse <= 1e-12);
  REQUIRE(res.test_mse <= 1e-12);
  REQUIRE((res.weights - w_true).norm() <= 1e-6 * w_true.norm());
}

TEST_CASE("an overwhelming penalty drives ridge weights to zero") {
  Rng rng(33);
  const Mat X = random_mat(400, 15, rng);
  Vec y(400);
  for (int i = 0; i < 400; ++i) y[i] = 1.0 + rng.normal();

  RidgeConfig rc;
  rc.l2 = 1e14;
  const RidgeResult res = ridge_solve(X, y, rc);
  REQUIRE(res.weights.lpNorm<Eigen::Infinity>() <= 1e-8);
  const double mean_sq = y.tail(80).squaredNorm() / 80;
  REQUIRE(res.test_mse == Catch::Approx(mean_sq).epsilon(1e-6));
}

TEST_CASE("ridge works end to end on recorded spike traces") {
  const RunConfig cfg = tn_cfg();
  EpisodeRecord rec = small_full_record(cfg, 90);
  REQUIRE(rec.full);
  REQUIRE(static_cast<int>(rec.predictions.size()) == cfg.steps_per_episode);

  const RidgeResult res = ridge_fit_eval(rec);
  REQUIRE(res.normal_residual <= 1e-8);
  REQUIRE(res.train_mse >= 0.0);

  SECTION("targets linear in the features are matched through the record path") {
    const Mat X = step_mean_traces(rec);
    Vec w_true(X.cols());
    Rng rng(34);
    for (int i = 0; i < w_true.size(); ++i) w_true[i] = rng.normal();
    const Vec y = X * w_true;
    for (int s = 0; s < y.size(); ++s) rec.targets[static_cast<size_t>(s)] = y[s];

    RidgeConfig rc;
    rc.l2 = 1e-9;
    const RidgeResult fit = ridge_fit_eval(rec, rc);
    REQUIRE(fit.test_mse <= 1e-10 * std::max(1.0, y.squaredNorm() / y.size()));
  }
}

TEST_CASE("feature rows average the trace within each step") {
  EpisodeRecord r;
  r.full = true;
  r.n_neurons = 2;
  r.bins_per_step = 4;
  r.predictions.assign(3, 0.0);
  r.targets.assign(3, 0.0);
  r.traces.setZero(2, 12);
  for (int b = 0; b < 12; ++b) {
    r.traces(0, b) = static_cast<float>(b);
    r.traces(1, b) = 1.0f;
  }
  const Mat X = step_mean_traces(r);
  REQUIRE(X.rows() == 3);
  REQUIRE(X.cols() == 2);
  REQUIRE(X(0, 0) == Catch::Approx(1.5));
  REQUIRE(X(1, 0) == Catch::Approx(5.5));
  REQUIRE(X(2, 0) == Catch::Approx(9.5));
  REQUIRE(X(2, 1) == Catch::Approx(1.0));
}

TEST_CASE("the feed-forward gradient matches finite differences") {
  Rng rng(41);
  Mlp net = glorot_mlp(10, rng);

  double worst = 0;
  for (int trial = 0; trial < 4; ++trial) {
    const double x1 = rng.uniform(-1.0, 1.0);
    const double x2 = rng.uniform(-1.0, 1.0);
    const double y = rng.uniform(0.0, 1.0);

    MlpGrads g;
    mlp_loss_grad(net, x1, x2, y, g);

    // 1e-6 relative with a 1e-9 absolute floor for coordinates at the
    // finite-difference noise scale
    auto check = [&](Mat Mlp::* tensor, const Mat& analytic) {
      Mat& w = net.*tensor;
      for (int i = 0; i < w.rows(); ++i)
        for (int j = 0; j < w.cols(); ++j) {
          const double save = w(i, j);
          const double eps = 1e-6 * std::max(1.0, std::abs(save));
          MlpGrads scratch;
          w(i, j) = save + eps;
          const double up = mlp_loss_grad(net, x1, x2, y, scratch);
          w(i, j) = save - eps;
          const double dn = mlp_loss_grad(net, x1, x2, y, scratch);
          w(i, j) = save;
          const double fd = (up - dn) / (2 * eps);
          const double an = analytic(i, j);
          const double allow = 1e-9 + 1e-6 * std::max(std::abs(fd), std::abs(an));
          worst = std::max(worst, std::abs(fd - an) / allow);
        }
    };
    check(&Mlp::w1, g.w1);
    check(&Mlp::b1, g.b1);
    check(&Mlp::w2, g.w2);
  }
  INFO("worst error over tolerance " << worst);
  REQUIRE(worst <= 1.0);
}

TEST_CASE("online training drives error to zero on zero-function targets") {
  Rng rng(42);
  RunConfig cfg = tn_cfg();
  MlpTrainer tr(glorot_mlp(10, rng), backprop_adam_config(cfg));

  const int N = 2000;
  double head = 0, tail = 0;
  for (int s = 0; s < N; ++s) {
    const double e = tr.observe(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), 0.0);
    if (s < 100) head += e / 100;
    if (s >= N - 100) tail += e / 100;
  }
  INFO("head " << head << " tail " << tail);
  REQUIRE(tail < 1e-3);
  REQUIRE(tail < head / 50);
}

TEST_CASE("zero learning rate and zero decay leave the net untouched") {
  Rng rng(43);
  RunConfig cfg = tn_cfg();
  cfg.bp_lr = 0.0;
  cfg.bp_weight_decay = 0.0;
  MlpTrainer tr(glorot_mlp(10, rng), backprop_adam_config(cfg));
  const Mlp before = tr.net();
  for (int s = 0; s < 20; ++s) tr.observe(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), 0.3);
  REQUIRE((tr.net().w1.array() == before.w1.array()).all());
  REQUIRE((tr.net().b1.array() == before.b1.array()).all());
  REQUIRE((tr.net().w2.array() == before.w2.array()).all());
}

TEST_CASE("baseline curves are deterministic and share the evaluation stream") {
  RunConfig cfg = tn_cfg();
  const BaselineCurve a = backprop_baseline(cfg, 3, 55);
  const BaselineCurve b = backprop_baseline(cfg, 3, 55);
  REQUIRE(a.mean.size() == cfg.steps_per_episode);
  REQUIRE((a.mean.array() == b.mean.array()).all());
  REQUIRE((a.stddev.array() == b.stddev.array()).all());

  // replay task index 0 by hand through the evaluation derivations
  Rng task_rng = Rng::derive(55, {stream_tag("eval-task"), 0});
  const AnyTask task = sample_task(cfg, task_rng);
  Rng ep_rng = Rng::derive(55, {stream_tag("eval-episode"), 0});
  const Exp2Episode ep = make_exp2_episode(cfg, task, ep_rng);
  Rng init_rng = Rng::derive(55, {stream_tag("bp-init"), 0});
  const Vec curve = backprop_baseline_curve(ep, cfg, init_rng);

  const BaselineCurve single = backprop_baseline(cfg, 1, 55);
  REQUIRE((single.mean.array() == curve.array()).all());
  REQUIRE((single.stddev.array() == 0.0).all());
}

TEST_CASE("random reservoir evaluation repeats under the same seed") {
  RunConfig cfg = tn_cfg();
  cfg.eval_n_tasks = 3;
  const EvalSummary a = random_reservoir_eval(cfg, 3);
  const EvalSummary b = random_reservoir_eval(cfg, 3);
  REQUIRE(a.mean_mse == b.mean_mse);
  REQUIRE(a.std_mse == b.std_mse);
  REQUIRE(a.curve == b.curve);
}
