#pragma once

// Corpus ingestion and the HR / per-stage target / LR preparation chain:
// centre crop 120x120, bilinear resize to 128x128, box-average downsampling
// to each stage resolution and to the 16x16 LR input.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "fh/attributes.hpp"
#include "fh/image.hpp"

namespace fh {

inline constexpr int kCropSize = 120;
inline constexpr int kHrSize = 128;
inline constexpr int kLrSize = 16;
inline constexpr std::array<int, 3> kStageResolutions = {32, 64, 128};

/// Ingestion or manifest failure. `line` is 1-based, 0 when not tied to a line.
class DataError : public std::runtime_error {
 public:
  DataError(const std::string& what, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  [[nodiscard]] std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

enum class Split { train, test };

std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct SampleRecord {
  std::string id;
  std::string image_path;
  AttributeVector attributes;
  Split split = Split::train;
};

struct TrainingSample {
  std::string id;
  Image lr;
  /// Stage resolution (32, 64, 128) -> target; 128 is the prepared HR image.
  std::map<int, Image> targets;
  AttributeVector attributes;
};

/// Parses a CelebA-style attribute listing (optional count line, header of
/// names, rows of `filename v1 ... vK` with values in {-1, 0, 1}) and binds
/// each row to `image_dir / filename`. Only the first `limit` rows are read
/// when a limit is given.
std::vector<SampleRecord> ingest_manifest(const std::filesystem::path& attribute_file,
                                          const std::filesystem::path& image_dir,
                                          std::optional<std::size_t> limit = std::nullopt);

/// Centre 120x120 crop, bilinear resize to 128x128, clamp to [0,1].
Image prepare_hr(const Image& raw);

/// Box-average downsampling of a square image to out_size x out_size.
Image downsample(const Image& image, int out_size);

/// Bilinear resampling to an arbitrary size.
Image upsample_bilinear(const Image& image, int out_size);

TrainingSample make_training_sample(const SampleRecord& record);
TrainingSample make_training_sample(const std::string& id, const Image& raw, const AttributeVector& attributes);

/// Prepares every record. Work is spread across threads; the output order
/// always matches the input order.
std::vector<TrainingSample> load_samples(const std::vector<SampleRecord>& records);

/// Seeded partition into (train_count, rest); each side keeps input order.
std::pair<std::vector<SampleRecord>, std::vector<SampleRecord>> split_dataset(const std::vector<SampleRecord>& records,
                                                                              std::size_t train_count,
                                                                              std::uint64_t seed);

/// JSON lines: {"id", "image_path", "attributes": [12], "split"}. Relative
/// image paths are written and resolved against the manifest's directory.
void write_manifest(const std::filesystem::path& path, const std::vector<SampleRecord>& records);
std::vector<SampleRecord> read_manifest(const std::filesystem::path& path);

std::vector<SampleRecord> filter_split(const std::vector<SampleRecord>& records, Split split);

}  // namespace fh
