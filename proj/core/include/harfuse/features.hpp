#pragma once

#include <cstdint>
#include <vector>

#include "harfuse/image.hpp"
#include "harfuse/linalg.hpp"

namespace harfuse {

/// n samples × d features, rows aligned with `sample_ids`.
struct FeatureMatrix {
  linalg::Matrix values;
  Domain domain = Domain::spatial;
  std::vector<std::uint64_t> sample_ids;

  std::size_t samples() const noexcept { return values.rows(); }
  std::size_t dims() const noexcept { return values.cols(); }

  /// Throws when the id list length differs from the row count or has duplicates.
  void validate() const;
};

/// Unique per-sample identity: original windows and each augmented variant differ.
constexpr std::uint64_t sample_id(const ImageMeta& meta) noexcept {
  return meta.origin * 8 + static_cast<std::uint64_t>(meta.provenance.variant);
}

/// Throws an alignment error unless both matrices list identical sample ids.
void require_aligned(const FeatureMatrix& a, const FeatureMatrix& b);

}  // namespace harfuse
