// Encodes an analog value as population spike trains and decodes it back
// from the spike counts. Instant.

#include <cstdio>

#include "resl2l/encoding.hpp"

using namespace resl2l;

int main() {
  const PopulationCode code = make_population_code(-1.0, 1.0, 10, 0.1, 200.0);
  Rng rng(42);

  for (const double z : {-0.8, -0.25, 0.0, 0.6}) {
    const Vec r = rates(code, z);
    SpikeMat raster(10, 2000);  // 2 s of 1 ms bins
    spikes_from_rates(r, 2000, 1e-3, rng, raster, 0);
    Vec counts(10);
    for (int i = 0; i < 10; ++i) counts[i] = raster.row(i).cast<double>().sum();
    std::printf("z=%+.2f  decoded=%+.3f  unit rates (Hz):", z, decode(code, counts));
    for (int i = 0; i < 10; ++i) std::printf(" %3.0f", counts[i] / 2.0);
    std::printf("\n");
  }
  return 0;
}
