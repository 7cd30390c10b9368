#pragma once

// Per-iteration training metrics as JSON lines. Wall-clock time is recorded
// but excluded from the canonical digest, so reruns hash identically.

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "resl2l/common.hpp"

namespace resl2l {

struct MetricsRow {
  std::int64_t iter = 0;
  double loss = 0;
  double reg_loss = 0;
  double mean_rate_hz = 0;
  double wall_ms = 0;
};

inline nlohmann::json metrics_json(const MetricsRow& r, bool include_wall) {
  nlohmann::json j = {{"iter", r.iter},
                      {"loss", r.loss},
                      {"reg_loss", r.reg_loss},
                      {"mean_rate_hz", r.mean_rate_hz}};
  if (include_wall) j["wall_ms"] = r.wall_ms;
  return j;
}

inline MetricsRow metrics_from_json(const nlohmann::json& j) {
  MetricsRow r;
  r.iter = j.at("iter").get<std::int64_t>();
  r.loss = j.at("loss").get<double>();
  r.reg_loss = j.at("reg_loss").get<double>();
  r.mean_rate_hz = j.at("mean_rate_hz").get<double>();
  r.wall_ms = j.value("wall_ms", 0.0);
  return r;
}

class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path, bool include_wall = true)
      : os_(path, std::ios::trunc), include_wall_(include_wall) {
    if (!os_) throw IoError("cannot open metrics file '" + path + "'");
    path_ = path;
  }
  void write(const MetricsRow& r) {
    os_ << metrics_json(r, include_wall_).dump() << '\n';
    os_.flush();
    if (!os_) throw IoError("failed writing metrics to '" + path_ + "'");
  }

 private:
  std::ofstream os_;
  bool include_wall_;
  std::string path_;
};

inline std::vector<MetricsRow> load_metrics(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open metrics file '" + path + "'");
  std::vector<MetricsRow> rows;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    rows.push_back(metrics_from_json(nlohmann::json::parse(line)));
  }
  return rows;
}

// Digest over the sorted-key dumps of every row, wall clock stripped.
inline std::uint64_t metrics_canonical_hash(const std::vector<MetricsRow>& rows) {
  std::string buf;
  for (const auto& r : rows) {
    buf += metrics_json(r, false).dump();
    buf += '\n';
  }
  return fnv1a64(buf);
}

inline std::uint64_t metrics_canonical_hash_file(const std::string& path) {
  return metrics_canonical_hash(load_metrics(path));
}

}  // namespace resl2l
