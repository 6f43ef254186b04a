#include "harfuse/domain_transforms.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "harfuse/errors.hpp"

namespace harfuse {

namespace {

using cplx = std::complex<double>;

// exp(−j2πk/n) for k in [0, n); indices are reduced mod n before lookup so
// large products u·x do not lose phase accuracy.
std::vector<cplx> twiddles(std::size_t n) {
  std::vector<cplx> t(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    t[k] = {std::cos(angle), std::sin(angle)};
  }
  return t;
}

}  // namespace

ComplexGrid dft2(const linalg::Matrix& image) {
  if (!image.all_finite()) throw Error(ErrorCode::contract, "dft2: non-finite input");
  const std::size_t m = image.rows();
  const std::size_t n = image.cols();
  const auto tw_m = twiddles(m);
  const auto tw_n = twiddles(n);

  // Along columns index y first, then along rows index x.
  ComplexGrid partial(m, n);
  for (std::size_t x = 0; x < m; ++x) {
    for (std::size_t v = 0; v < n; ++v) {
      cplx acc{0.0, 0.0};
      for (std::size_t y = 0; y < n; ++y) acc += image(x, y) * tw_n[(v * y) % n];
      partial(x, v) = acc;
    }
  }
  ComplexGrid out(m, n);
  for (std::size_t u = 0; u < m; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      cplx acc{0.0, 0.0};
      for (std::size_t x = 0; x < m; ++x) acc += partial(x, v) * tw_m[(u * x) % m];
      out(u, v) = acc;
    }
  }
  return out;
}

linalg::Matrix centered_log_magnitude(const linalg::Matrix& image) {
  const ComplexGrid spectrum = dft2(image);
  const std::size_t m = image.rows();
  const std::size_t n = image.cols();
  linalg::Matrix out(m, n);
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t u = (r + m - m / 2) % m;
    for (std::size_t c = 0; c < n; ++c) {
      const std::size_t v = (c + n - n / 2) % n;
      out(r, c) = std::log1p(std::abs(spectrum(u, v)));
    }
  }
  return out;
}

DomainImage frequency_image(const SignalImage& img) {
  DomainImage out{centered_log_magnitude(img.pixels), Domain::frequency, img.meta};
  normalize_min_max(out.pixels);
  return out;
}

void GaborParams::validate() const {
  if (!(sigma > 0.0)) throw Error(ErrorCode::contract, "gabor: sigma must be positive");
  if (!(frequency >= 0.0)) throw Error(ErrorCode::contract, "gabor: frequency must be non-negative");
  if (!(orientation >= 0.0 && orientation < std::numbers::pi))
    throw Error(ErrorCode::contract, "gabor: orientation must lie in [0, pi)");
  if (!std::isfinite(envelope) || !std::isfinite(phase))
    throw Error(ErrorCode::contract, "gabor: non-finite envelope or phase");
}

ComplexGrid gabor_kernel(const GaborParams& p, int half_width) {
  p.validate();
  if (half_width < 1) throw Error(ErrorCode::contract, "gabor: half-width must be at least 1");
  const std::size_t side = static_cast<std::size_t>(2 * half_width + 1);
  ComplexGrid k(side, side);
  const double c = std::cos(p.orientation);
  const double s = std::sin(p.orientation);
  for (int y = -half_width; y <= half_width; ++y) {
    for (int x = -half_width; x <= half_width; ++x) {
      const double r2 = static_cast<double>(x * x + y * y);
      const double envelope = p.envelope * std::exp(-std::numbers::pi * p.sigma * p.sigma * r2);
      const double arg = 2.0 * std::numbers::pi * p.frequency * (x * c + y * s) + p.phase;
      k(static_cast<std::size_t>(y + half_width), static_cast<std::size_t>(x + half_width)) =
          envelope * cplx{std::cos(arg), std::sin(arg)};
    }
  }
  return k;
}

GaborBank::GaborBank(std::vector<GaborParams> params, int half_width)
    : params_(std::move(params)), half_width_(half_width) {
  if (params_.empty()) throw Error(ErrorCode::contract, "gabor bank must not be empty");
  kernels_.reserve(params_.size());
  for (const auto& p : params_) kernels_.push_back(gabor_kernel(p, half_width_));
}

GaborBank GaborBank::standard() {
  std::vector<GaborParams> params;
  for (int i = 0; i < 4; ++i) {
    GaborParams p;
    p.orientation = static_cast<double>(i) * std::numbers::pi / 4.0;
    params.push_back(p);
  }
  return GaborBank(std::move(params), 7);
}

linalg::Matrix filter_magnitude(const linalg::Matrix& image, const ComplexGrid& kernel) {
  const int rows = static_cast<int>(image.rows());
  const int cols = static_cast<int>(image.cols());
  const int h = static_cast<int>(kernel.rows() / 2);
  linalg::Matrix out(image.rows(), image.cols());
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      cplx acc{0.0, 0.0};
      for (int dy = -h; dy <= h; ++dy) {
        const int ir = r - dy;
        if (ir < 0 || ir >= rows) continue;
        for (int dx = -h; dx <= h; ++dx) {
          const int ic = c - dx;
          if (ic < 0 || ic >= cols) continue;
          acc += image(static_cast<std::size_t>(ir), static_cast<std::size_t>(ic)) *
                 kernel(static_cast<std::size_t>(dy + h), static_cast<std::size_t>(dx + h));
        }
      }
      out(static_cast<std::size_t>(r), static_cast<std::size_t>(c)) = std::abs(acc);
    }
  }
  return out;
}

linalg::Matrix gabor_response(const linalg::Matrix& image, const GaborBank& bank) {
  linalg::Matrix best(image.rows(), image.cols());
  for (const auto& kernel : bank.kernels()) {
    const linalg::Matrix mag = filter_magnitude(image, kernel);
    auto b = best.values();
    auto m = mag.values();
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = std::max(b[i], m[i]);
  }
  return best;
}

DomainImage gabor_image(const SignalImage& img, const GaborBank& bank) {
  DomainImage out{gabor_response(img.pixels, bank), Domain::time_spectrum, img.meta};
  normalize_min_max(out.pixels);
  return out;
}

DomainImage spatial_image(const SignalImage& img) {
  return {img.pixels, Domain::spatial, img.meta};
}

std::array<DomainImage, kDomainCount> domain_images(const SignalImage& img, const GaborBank& bank) {
  return {spatial_image(img), frequency_image(img), gabor_image(img, bank)};
}

}  // namespace harfuse
