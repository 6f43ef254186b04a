#pragma once

// Versioned binary container shared by every persisted model and tensor:
//
//   magic (6 ASCII bytes, e.g. "HFCNN1")
//   u64 little-endian length of the JSON header
//   JSON header {"format_version", "blocks": [{"name", "shape"}], "meta": {...}}
//   raw little-endian float64 values of each block, in header order

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "harfuse/linalg.hpp"

namespace harfuse {

inline constexpr std::uint32_t kContainerFormatVersion = 1;

inline constexpr std::string_view kCnnMagic = "HFCNN1";
inline constexpr std::string_view kCcaMagic = "HFCCA1";
inline constexpr std::string_view kSvmMagic = "HFSVM1";
inline constexpr std::string_view kFeatureMagic = "HFFEA1";
inline constexpr std::string_view kWindowMagic = "HFWIN1";

struct TensorBlock {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> values;
};

TensorBlock matrix_block(std::string name, const linalg::Matrix& m);
linalg::Matrix block_matrix(const TensorBlock& b);

struct ContainerContents {
  std::string meta_json;  // the "meta" object, serialized
  std::vector<TensorBlock> blocks;

  /// Throws a deserialization error when no block has this name.
  const TensorBlock& block(std::string_view name) const;
};

void write_container(const std::filesystem::path& path, std::string_view magic,
                     const std::string& meta_json, const std::vector<TensorBlock>& blocks);

/// Validates magic, format version, block sizes and file length.
ContainerContents read_container(const std::filesystem::path& path, std::string_view magic);

}  // namespace harfuse
