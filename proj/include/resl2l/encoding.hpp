#pragma once

// Analog-to-spike conversion: Gaussian population coding for experiment 2.
// Experiment 1 injects its signal as analog current through w_in and needs no
// encoder.

#include <cmath>
#include <utility>
#include <vector>

#include "resl2l/common.hpp"
#include "resl2l/config.hpp"
#include "resl2l/rng.hpp"

namespace resl2l {

struct PopulationCode {
  Vec m;           // preferred values, evenly spaced over [m_min, m_max]
  double sigma;    // tuning width
  double r_max_hz;
};

inline PopulationCode make_population_code(double m_min, double m_max, int n_units,
                                           double sigma_scale, double r_max_hz) {
  if (n_units < 2) throw ConfigError("population code needs at least 2 units");
  if (!(m_max > m_min)) throw ConfigError("population code needs m_max > m_min");
  PopulationCode code;
  code.m.resize(n_units);
  for (int i = 0; i < n_units; ++i)
    code.m[i] = m_min + (m_max - m_min) * i / (n_units - 1);
  code.sigma = sigma_scale * (m_max - m_min);
  code.r_max_hz = r_max_hz;
  return code;
}

// r_i = r_max exp(-(m_i - z)^2 / (2 sigma^2))
inline Vec rates(const PopulationCode& code, double z) {
  if (!std::isfinite(z)) throw ConfigError("rates: encoded value must be finite");
  return code.r_max_hz *
         (-(code.m.array() - z).square() / (2.0 * code.sigma * code.sigma)).exp();
}

// Bernoulli thinning per bin: P(spike) = min(1, r dt).
inline void spikes_from_rates(const Vec& rates_hz, int n_bins, double dt_s, Rng& rng,
                              SpikeMat& out, int first_col) {
  const int n = static_cast<int>(rates_hz.size());
  for (int b = 0; b < n_bins; ++b)
    for (int i = 0; i < n; ++i) {
      const double p = std::min(1.0, rates_hz[i] * dt_s);
      out(i, first_col + b) = rng.bernoulli(p) ? 1 : 0;
    }
}

// Center of mass of unit weights (rates or spike counts); midpoint when empty.
inline double decode(const PopulationCode& code, const Vec& weights) {
  const double total = weights.sum();
  if (total <= 0.0) return 0.5 * (code.m[0] + code.m[code.m.size() - 1]);
  return code.m.dot(weights) / total;
}

// ---------------------------------------------------------------------------
// Experiment-2 channel layout: the task inputs followed by one channel that
// feeds back the previous step's target value.

inline std::vector<std::pair<double, double>> channel_ranges(const RunConfig& cfg) {
  if (cfg.task_family == "tn") {
    const double y_lo = cfg.tn_output_sigmoid ? 0.0 : -static_cast<double>(cfg.tn_n_hidden);
    const double y_hi = cfg.tn_output_sigmoid ? 1.0 : static_cast<double>(cfg.tn_n_hidden);
    return {{cfg.tn_input_lo, cfg.tn_input_hi},
            {cfg.tn_input_lo, cfg.tn_input_hi},
            {y_lo, y_hi}};
  }
  if (cfg.task_family == "sine")
    return {{cfg.sine_input_lo, cfg.sine_input_hi}, {-cfg.sine_amp_hi, cfg.sine_amp_hi}};
  throw ConfigError("channel_ranges: no spiking encoder for task family '" +
                    cfg.task_family + "'");
}

struct ChannelEncoder {
  std::vector<PopulationCode> codes;

  int n_units() const {
    int total = 0;
    for (const auto& c : codes) total += static_cast<int>(c.m.size());
    return total;
  }

  // One protocol step: encode one value per channel into [n_units x n_bins]
  // columns of `out` starting at `first_col`.
  void encode_step(const std::vector<double>& values, int n_bins, double dt_s, Rng& rng,
                   SpikeMat& out, int first_col) const {
    if (values.size() != codes.size())
      throw ConfigError("encode_step: one value per channel required");
    int row = 0;
    for (size_t c = 0; c < codes.size(); ++c) {
      const Vec r = rates(codes[c], values[c]);
      const int n = static_cast<int>(r.size());
      for (int b = 0; b < n_bins; ++b)
        for (int i = 0; i < n; ++i) {
          const double p = std::min(1.0, r[i] * dt_s);
          out(row + i, first_col + b) = rng.bernoulli(p) ? 1 : 0;
        }
      row += n;
    }
  }
};

inline ChannelEncoder make_channel_encoder(const RunConfig& cfg) {
  ChannelEncoder enc;
  for (const auto& [lo, hi] : channel_ranges(cfg))
    enc.codes.push_back(
        make_population_code(lo, hi, cfg.pop_n_units, cfg.pop_sigma_scale, cfg.pop_r_max_hz));
  return enc;
}

}  // namespace resl2l
