#pragma once

// EpisodeRecord: the trajectory container produced by inner-loop runs.
// Always carries per-tick predictions/targets and per-neuron spike counts;
// full detail (spike raster, traces, inputs) is optional. Serializes to a
// binary container and exports to JSON lines.

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "resl2l/common.hpp"
#include "resl2l/io.hpp"
#include "resl2l/version.hpp"

namespace resl2l {

struct EpisodeRecord {
  double dt_ms = 1.0;
  int bins_per_step = 1;   // simulation bins per readout tick
  int n_neurons = 0;
  int n_input_units = 0;
  std::uint64_t seed = 0;

  std::vector<double> predictions;  // one per readout tick
  std::vector<double> targets;
  std::vector<std::uint32_t> spike_counts;  // per neuron, whole run

  bool full = false;
  SpikeMat spikes;   // [n_neurons x total_bins]
  MatF traces;       // [n_neurons x total_bins]
  MatF inputs;       // [n_input_units x total_bins] (raster or analog drive)

  int n_steps() const { return static_cast<int>(predictions.size()); }
  double duration_s() const { return n_steps() * bins_per_step * dt_ms / 1000.0; }

  double mean_rate_hz() const {
    if (n_neurons == 0 || duration_s() <= 0) return 0.0;
    double total = 0;
    for (auto c : spike_counts) total += c;
    return total / (n_neurons * duration_s());
  }

  double sq_err(int tick) const {
    const double d = predictions[tick] - targets[tick];
    return d * d;
  }
  double sum_sq_err() const {
    double s = 0;
    for (int i = 0; i < n_steps(); ++i) s += sq_err(i);
    return s;
  }
};

inline constexpr char kRecordMagic[8] = {'R', 'L', '2', 'L', 'R', 'E', 'C', '1'};

inline void save_record(const EpisodeRecord& r, const std::string& path) {
  auto os = io::open_out(path);
  os.write(kRecordMagic, sizeof(kRecordMagic));
  io::write_pod<std::uint32_t>(os, kRecordFormatVersion);
  io::write_pod(os, r.dt_ms);
  io::write_pod<std::int32_t>(os, r.bins_per_step);
  io::write_pod<std::int32_t>(os, r.n_neurons);
  io::write_pod<std::int32_t>(os, r.n_input_units);
  io::write_pod(os, r.seed);
  io::write_vector(os, r.predictions);
  io::write_vector(os, r.targets);
  io::write_vector(os, r.spike_counts);
  io::write_pod<std::uint8_t>(os, r.full ? 1 : 0);
  if (r.full) {
    io::write_matrix(os, r.spikes);
    io::write_matrix(os, r.traces);
    io::write_matrix(os, r.inputs);
  }
  if (!os) throw IoError("failed writing record '" + path + "'");
}

inline EpisodeRecord load_record(const std::string& path) {
  auto is = io::open_in(path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::string(magic, 8) != std::string(kRecordMagic, 8))
    throw IoError("'" + path + "' is not an episode record");
  const auto version = io::read_pod<std::uint32_t>(is);
  if (version != kRecordFormatVersion)
    throw IoError("record format version " + std::to_string(version) + " unsupported");
  EpisodeRecord r;
  r.dt_ms = io::read_pod<double>(is);
  r.bins_per_step = io::read_pod<std::int32_t>(is);
  r.n_neurons = io::read_pod<std::int32_t>(is);
  r.n_input_units = io::read_pod<std::int32_t>(is);
  r.seed = io::read_pod<std::uint64_t>(is);
  r.predictions = io::read_vector<double>(is);
  r.targets = io::read_vector<double>(is);
  r.spike_counts = io::read_vector<std::uint32_t>(is);
  r.full = io::read_pod<std::uint8_t>(is) != 0;
  if (r.full) {
    r.spikes = io::read_matrix<SpikeMat>(is);
    r.traces = io::read_matrix<MatF>(is);
    r.inputs = io::read_matrix<MatF>(is);
  }
  return r;
}

// One JSON object per readout tick.
inline void export_record_jsonl(const EpisodeRecord& r, std::ostream& os) {
  for (int i = 0; i < r.n_steps(); ++i) {
    nlohmann::json row = {{"step", i},
                          {"prediction", r.predictions[i]},
                          {"target", r.targets[i]},
                          {"sq_err", r.sq_err(i)}};
    os << row.dump() << '\n';
  }
}

}  // namespace resl2l
