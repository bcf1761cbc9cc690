#pragma once

// Procedural stand-in for an aligned face corpus: 178x218 cartoon faces whose
// drawing depends on the twelve schema attributes, with per-image jitter.

#include <cstdint>
#include <filesystem>

#include "fh/attributes.hpp"
#include "fh/image.hpp"

namespace fh {

inline constexpr int kSynthWidth = 178;
inline constexpr int kSynthHeight = 218;

/// Draws one face. The same (attributes, seed) always yields the same image.
Image render_synthetic_face(const AttributeVector& attrs, std::uint64_t seed);

/// Plausible binary attribute draw (at most one hair colour, no hair colour when bald).
AttributeVector sample_face_attributes(std::mt19937_64& rng);

/// Writes `count` PNG faces plus `list_attr_celeba.txt` in the CelebA layout
/// (count line, header of column names, rows of +-1) into `dir`.
/// Returns the attribute file path.
std::filesystem::path write_synthetic_corpus(const std::filesystem::path& dir, int count, std::uint64_t seed);

}  // namespace fh
