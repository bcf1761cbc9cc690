#pragma once

// Single-file container: magic, format version, a JSON metadata document and
// a list of named float64 arrays, closed by an end marker and a checksum.

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>

#include "json.hpp"

#include "fh/tensor.hpp"

namespace fh {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Checkpoint {
  nlohmann::json metadata = nlohmann::json::object();
  std::map<std::string, Tensor> arrays;
};

/// Writes to a sibling temporary file and renames it into place.
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws CheckpointError on a missing, truncated, corrupt or
/// version-mismatched file; never returns partial state.
Checkpoint read_checkpoint(const std::filesystem::path& path);

}  // namespace fh
