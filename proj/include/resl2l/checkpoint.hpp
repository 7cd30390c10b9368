#pragma once

// Versioned binary checkpoints: the resolved config, the iteration count, all
// weights and delays, and the optimizer state. Loading rebuilds exactly the
// training position, so a resumed run continues bit-identically.

#include <string>

#include <json.hpp>

#include "resl2l/adam.hpp"
#include "resl2l/config.hpp"
#include "resl2l/io.hpp"
#include "resl2l/lif.hpp"
#include "resl2l/version.hpp"

namespace resl2l {

inline constexpr char kCheckpointMagic[8] = {'R', 'L', '2', 'L', 'C', 'K', 'P', '1'};

struct Checkpoint {
  RunConfig cfg;
  std::int64_t iteration = 0;
  ReservoirParams params;
  AdamState adam;
};

inline void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  auto os = io::open_out(path);
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  io::write_pod<std::uint32_t>(os, kCheckpointFormatVersion);
  const nlohmann::json j = ck.cfg;
  io::write_string(os, j.dump());
  io::write_pod(os, ck.iteration);
  io::write_matrix(os, ck.params.w_in);
  io::write_matrix(os, ck.params.w_rec);
  io::write_matrix(os, ck.params.w_out);
  io::write_matrix(os, ck.params.delays);
  ck.adam.save(os);
  if (!os) throw IoError("failed writing checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  auto is = io::open_in(path);
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::string(magic, 8) != std::string(kCheckpointMagic, 8))
    throw IoError("'" + path + "' is not a checkpoint");
  const auto version = io::read_pod<std::uint32_t>(is);
  if (version != kCheckpointFormatVersion)
    throw IoError("checkpoint format version " + std::to_string(version) +
                  " unsupported");
  Checkpoint ck;
  ck.cfg = nlohmann::json::parse(io::read_string(is)).get<RunConfig>();
  ck.iteration = io::read_pod<std::int64_t>(is);
  ck.params.w_in = io::read_matrix<Mat>(is);
  ck.params.w_rec = io::read_matrix<Mat>(is);
  ck.params.w_out = io::read_matrix<Mat>(is);
  ck.params.delays = io::read_matrix<IMat>(is);
  ck.adam.load(is);
  if (!is) throw IoError("checkpoint '" + path + "' is truncated");
  return ck;
}

}  // namespace resl2l
