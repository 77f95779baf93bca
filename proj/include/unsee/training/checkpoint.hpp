#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "unsee/architectures/model.hpp"
#include "unsee/objectives/objectives.hpp"

namespace unsee {

// Binary container:
//   "UNSEE01\n"
//   header lines, UTF-8:  "meta <key> <value>"  or  "tensor <name> <rows>x<cols> <byte offset>"
//   a blank line
//   little-endian IEEE-754 doubles for every tensor, in table order.
inline constexpr std::string_view kCheckpointMagic = "UNSEE01\n";
inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  std::optional<CorInfoMaxState> objective_state;
  std::uint64_t vocab_hash = 0;
  std::string vocab_file;                   // relative to the checkpoint directory
  std::map<std::string, std::string> extra;  // free-form metadata (objective, step, ...)
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

// Errors: BadMagic, Truncated, Parse (malformed header), CheckpointMismatch
// (tensor table inconsistent with itself or with `expected`).
Checkpoint load_checkpoint(const std::filesystem::path& path);
// Also requires every tensor shape and the variant to match `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const Model& expected);

}  // namespace unsee
