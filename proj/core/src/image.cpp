#include "harfuse/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "harfuse/errors.hpp"

namespace harfuse {

std::string_view to_string(Domain d) noexcept {
  switch (d) {
    case Domain::spatial: return "spatial";
    case Domain::frequency: return "frequency";
    case Domain::time_spectrum: return "time_spectrum";
  }
  return "unknown";
}

std::optional<Domain> parse_domain(std::string_view name) noexcept {
  if (name == "spatial") return Domain::spatial;
  if (name == "frequency") return Domain::frequency;
  if (name == "time_spectrum" || name == "time-spectrum") return Domain::time_spectrum;
  return std::nullopt;
}

ImageMeta meta_of(const SignalWindow& w) noexcept {
  return {w.label, w.subject, w.origin, w.provenance};
}

void normalize_min_max(linalg::Matrix& pixels) {
  auto v = pixels.values();
  if (v.empty()) return;
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (!(hi > lo)) {
    std::fill(v.begin(), v.end(), 0.5);
    return;
  }
  const double inv = 1.0 / (hi - lo);
  // The maximum maps to exactly 1; (hi − lo)·inv can round to 1 − ulp.
  for (double& x : v) x = x == hi ? 1.0 : (x - lo) * inv;
}

void write_pgm(const std::filesystem::path& path, const linalg::Matrix& pixels) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  out << "P5\n" << pixels.cols() << ' ' << pixels.rows() << "\n255\n";
  for (double x : pixels.values()) {
    const double c = std::clamp(x, 0.0, 1.0);
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(c * 255.0))));
  }
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

void write_csv_grid(const std::filesystem::path& path, const linalg::Matrix& pixels) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::io, "cannot write " + path.string());
  char buf[32];
  for (std::size_t r = 0; r < pixels.rows(); ++r) {
    for (std::size_t c = 0; c < pixels.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", pixels(r, c));
      out << (c ? "," : "") << buf;
    }
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::io, "failed writing " + path.string());
}

}  // namespace harfuse
