#pragma once

// Frequency (2D DFT magnitude) and time-spectrum (Gabor bank) views of a
// signal image. All three domain images share the 24×52 shape.

#include <array>
#include <complex>
#include <cstddef>
#include <vector>

#include "harfuse/image.hpp"
#include "harfuse/linalg.hpp"
#include "harfuse/signal_image.hpp"

namespace harfuse {

/// Row-major grid of complex values.
class ComplexGrid {
 public:
  ComplexGrid() = default;
  ComplexGrid(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::complex<double>& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const std::complex<double>& operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  const std::vector<std::complex<double>>& values() const noexcept { return data_; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<std::complex<double>> data_;
};

struct DomainImage {
  linalg::Matrix pixels;  // same shape as the source signal image, in [0, 1]
  Domain domain = Domain::spatial;
  ImageMeta meta;
};

/// Unnormalized forward transform
///   F(u,v) = Σₓ Σᵧ I(x,y)·exp(−j2π(ux/M + vy/N))
/// for an M×N image (x indexes rows, y columns). Accepts any size.
ComplexGrid dft2(const linalg::Matrix& image);

/// log(1 + |F|) with the zero-frequency bin moved to (M/2, N/2). Not normalized.
linalg::Matrix centered_log_magnitude(const linalg::Matrix& image);

/// Frequency-domain image: normalized centered log-magnitude spectrum.
DomainImage frequency_image(const SignalImage& img);

struct GaborParams {
  double envelope = 1.0;     // K
  double sigma = 0.1;        // Gaussian spread
  double frequency = 0.2;    // F, cycles per pixel
  double orientation = 0.0;  // ω in [0, π)
  double phase = 0.0;        // P, radians

  void validate() const;
};

/// K·exp(−πσ²(x²+y²))·exp(j(2πF(x cos ω + y sin ω) + P)) sampled on the integer
/// grid x, y ∈ [−h, h]. Element (y + h, x + h) holds offset (x, y); x runs along
/// image columns and y along image rows.
ComplexGrid gabor_kernel(const GaborParams& p, int half_width);

/// A fixed set of Gabor kernels sharing one support size, built once.
class GaborBank {
 public:
  GaborBank(std::vector<GaborParams> params, int half_width);

  /// Four orientations {0, π/4, π/2, 3π/4} at F = 0.2, σ = 0.1, K = 1, P = 0, half-width 7.
  static GaborBank standard();

  const std::vector<GaborParams>& params() const noexcept { return params_; }
  const std::vector<ComplexGrid>& kernels() const noexcept { return kernels_; }
  int half_width() const noexcept { return half_width_; }

 private:
  std::vector<GaborParams> params_;
  std::vector<ComplexGrid> kernels_;
  int half_width_;
};

/// |image ∗ kernel| with same-size output and zero padding.
linalg::Matrix filter_magnitude(const linalg::Matrix& image, const ComplexGrid& kernel);

/// Per-pixel maximum of the filter magnitudes over the bank. Not normalized.
linalg::Matrix gabor_response(const linalg::Matrix& image, const GaborBank& bank);

/// Time-spectrum image: normalized bank response.
DomainImage gabor_image(const SignalImage& img, const GaborBank& bank);

DomainImage spatial_image(const SignalImage& img);

/// {spatial, frequency, time-spectrum} views of one sample, indexed by Domain.
std::array<DomainImage, kDomainCount> domain_images(const SignalImage& img, const GaborBank& bank);

}  // namespace harfuse
