#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>

#include "harfuse/dataset.hpp"
#include "harfuse/linalg.hpp"

namespace harfuse {

inline constexpr std::size_t kImageRows = 24;
inline constexpr std::size_t kImageCols = kWindowLength;

enum class Domain { spatial = 0, frequency = 1, time_spectrum = 2 };

inline constexpr std::size_t kDomainCount = 3;

std::string_view to_string(Domain d) noexcept;
std::optional<Domain> parse_domain(std::string_view name) noexcept;

/// Identity of the window an image was built from.
struct ImageMeta {
  int label = 0;
  int subject = 0;
  std::uint64_t origin = 0;
  Provenance provenance;

  friend bool operator==(const ImageMeta&, const ImageMeta&) = default;
};

ImageMeta meta_of(const SignalWindow& w) noexcept;

/// Rescales to [0, 1] by (x − min)/(max − min); a constant image becomes all 0.5.
void normalize_min_max(linalg::Matrix& pixels);

/// 8-bit binary PGM (P5) of a [0, 1] image, clamped.
void write_pgm(const std::filesystem::path& path, const linalg::Matrix& pixels);
/// Comma-separated grid, one image row per line, full double precision.
void write_csv_grid(const std::filesystem::path& path, const linalg::Matrix& pixels);

}  // namespace harfuse
