// Runs the within-task readout learning loop on one Volterra task and prints
// the per-second error curve. Pass a checkpoint from `resl2l train` to see
// how an optimized reservoir learns the same task faster.

#include <cstdio>

#include "resl2l/checkpoint.hpp"
#include "resl2l/inner_loop.hpp"

using namespace resl2l;

int main(int argc, char** argv) {
  RunConfig cfg = preset_config("exp1-volterra-desk");
  cfg.seed = 3;
  ReservoirParams params;
  if (argc > 1) {
    const Checkpoint ck = load_checkpoint(argv[1]);
    cfg = ck.cfg;
    params = ck.params;
    std::printf("reservoir from %s (iteration %lld)\n", argv[1],
                static_cast<long long>(ck.iteration));
  } else {
    Rng init_rng = Rng::derive(cfg.seed, {stream_tag("init")});
    params = init_reservoir(cfg, init_rng);
    std::printf("fresh random reservoir (pass a checkpoint file to compare)\n");
  }

  const Reservoir res(NeuronConstants::from_config(cfg), params);
  Rng task_rng = Rng::derive(cfg.seed, {stream_tag("eval-task"), 0});
  const VolterraTask task = sample_volterra(task_rng, volterra_config(cfg));

  const EpisodeRecord rec = eval_exp1_task(res, cfg, task, 4);
  const auto curve = per_window_mse(rec, cfg.steps_per_window());
  std::printf("readout training time -> prediction MSE\n");
  for (size_t w = 0; w < curve.size(); ++w)
    std::printf("  %2zu s  %8.3f\n", w + 1, curve[w]);
  std::printf("mean rate %.1f Hz\n", rec.mean_rate_hz());
  return 0;
}
