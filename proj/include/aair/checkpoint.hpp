#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "aair/model.hpp"
#include "aair/optim.hpp"

namespace aair {

// Binary layout (integers little-endian):
//   "AAIR" | u16 version | u32 header length | header (UTF-8 key=value lines)
//   | u32 record count | records
// record: u16 name length | name | u8 rank | u32 dim x rank | f64 x size.
// Optimizer moments are stored as records named "adam.m/<param>" and "adam.v/<param>".
struct Checkpoint {
  HyperParams hyper;
  std::vector<std::string> vocabulary;  // id -> token, reserved entries included
  ModelParams params;
  OptimizerState optimizer;
};

inline constexpr std::uint16_t kCheckpointVersion = 1;

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt);
Checkpoint load_checkpoint(std::istream& in);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace aair
