#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>

#include "feddtg/exp/runner.hpp"

namespace feddtg::exp {

inline constexpr char kCheckpointMagic[8] = {'F', 'D', 'T', 'G', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Serializes the full experiment state: config, round counter, server and client
/// parameters, optimizer moments, ledger, metrics and round records. Random streams
/// are derived from (seed, round), so the round counter pins them.
std::string encode_checkpoint(const Experiment& exp);
void save_checkpoint(const Experiment& exp, const std::filesystem::path& path);

/// Rebuilds an experiment from a checkpoint. Data and shards are regenerated from the
/// stored config and checked against the stored shard digest. Throws FormatError on
/// a bad magic, version, checksum or truncated payload.
std::unique_ptr<Experiment> decode_checkpoint(const std::string& bytes);
std::unique_ptr<Experiment> load_checkpoint(const std::filesystem::path& path);

}  // namespace feddtg::exp
