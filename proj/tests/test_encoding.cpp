#include <catch2/catch_amalgamated.hpp>

#include "resl2l/encoding.hpp"

using namespace resl2l;

TEST_CASE("tuning curves hit the advertised rates") {
  PopulationCode code = make_population_code(-1.0, 1.0, 100, 0.001, 200.0);
  REQUIRE(code.m.size() == 100);
  REQUIRE(code.m[0] == -1.0);
  REQUIRE(code.m[99] == 1.0);
  for (int i = 1; i < 100; ++i)
    REQUIRE(code.m[i] - code.m[i - 1] == Catch::Approx(2.0 / 99).margin(1e-12));
  REQUIRE(code.sigma == Catch::Approx(0.002).margin(1e-15));

  const Vec r_at_mean = rates(code, code.m[42]);
  REQUIRE(r_at_mean[42] == 200.0);
  const Vec r_at_sigma = rates(code, code.m[42] + code.sigma);
  REQUIRE(r_at_sigma[42] == Catch::Approx(200.0 * std::exp(-0.5)).margin(1e-9));
  const Vec r_far = rates(code, code.m[42] + 10.0 * code.sigma);
  REQUIRE(r_far[42] < 1e-19);
  REQUIRE_THROWS_AS(rates(code, std::nan("")), ConfigError);
}

TEST_CASE("zero rate never spikes and peak rate matches empirically") {
  Rng rng = Rng::derive(21, {stream_tag("enc-rate")});
  const int bins = 100000;
  SpikeMat raster(2, bins);
  Vec r(2);
  r << 0.0, 200.0;
  spikes_from_rates(r, bins, 0.001, rng, raster, 0);
  long count0 = 0, count1 = 0;
  for (int b = 0; b < bins; ++b) {
    count0 += raster(0, b);
    count1 += raster(1, b);
  }
  REQUIRE(count0 == 0);
  const double hz = count1 * 1000.0 / bins;
  REQUIRE(hz > 195.0);
  REQUIRE(hz < 205.0);
}

TEST_CASE("identical seeds give identical rasters") {
  PopulationCode code = make_population_code(0.0, 1.0, 50, 0.001, 200.0);
  const Vec r = rates(code, 0.37);
  SpikeMat a(50, 200), b(50, 200);
  Rng r1 = Rng::derive(5, {stream_tag("enc-det")});
  Rng r2 = Rng::derive(5, {stream_tag("enc-det")});
  spikes_from_rates(r, 200, 0.001, r1, a, 0);
  spikes_from_rates(r, 200, 0.001, r2, b, 0);
  REQUIRE((a.array() == b.array()).all());
}

TEST_CASE("rate-weighted decoding recovers interior values") {
  PopulationCode code = make_population_code(-2.0, 3.0, 100, 0.001, 200.0);
  const double range = 5.0;
  for (int k = 0; k <= 100; ++k) {
    const double z = -2.0 + 0.05 * range + (0.9 * range) * k / 100.0;
    const double zhat = decode(code, rates(code, z));
    REQUIRE(std::abs(zhat - z) <= range / 100.0);
  }
  // no activity decodes to the midpoint
  REQUIRE(decode(code, Vec::Zero(100)) == Catch::Approx(0.5));
}

TEST_CASE("channel encoder lays out channels in order") {
  RunConfig cfg = preset_config("exp2-tn-desk");
  cfg.pop_sigma_scale = 0.001;  // locality checks below assume narrow bumps
  ChannelEncoder enc = make_channel_encoder(cfg);
  REQUIRE(enc.codes.size() == 3);
  REQUIRE(enc.n_units() == 300);
  // target channel of the TN family spans (0,1)
  REQUIRE(enc.codes[2].m[0] == 0.0);
  REQUIRE(enc.codes[2].m[99] == 1.0);

  Rng rng = Rng::derive(9, {stream_tag("enc-step")});
  SpikeMat out = SpikeMat::Zero(300, 20);
  enc.encode_step({-1.0, 1.0, 0.5}, 20, 0.001, rng, out, 0);
  // channel 0 encodes its minimum: only the first unit's neighborhood can fire
  for (int b = 0; b < 20; ++b)
    for (int i = 5; i < 100; ++i) REQUIRE(out(i, b) == 0);
  // channel 1 encodes its maximum: activity at the top of the second block
  long high = 0, low = 0;
  for (int b = 0; b < 20; ++b) {
    for (int i = 195; i < 200; ++i) high += out(i, b);
    for (int i = 100; i < 195; ++i) low += out(i, b);
  }
  REQUIRE(low == 0);
  REQUIRE(high > 0);

  REQUIRE_THROWS_AS(enc.encode_step({1.0}, 20, 0.001, rng, out, 0), ConfigError);
}

TEST_CASE("sine family uses two channels") {
  RunConfig cfg = preset_config("exp2-sine-desk");
  ChannelEncoder enc = make_channel_encoder(cfg);
  REQUIRE(enc.codes.size() == 2);
  REQUIRE(enc.codes[1].m[0] == -5.0);
  REQUIRE(enc.codes[1].m[99] == 5.0);
}
