#include "harfuse/signal_image.hpp"

#include <algorithm>

#include "harfuse/errors.hpp"

namespace harfuse {

SignalImage build_signal_image(const SignalWindow& w) {
  if (!w.all_finite()) throw Error(ErrorCode::contract, "signal window has non-finite samples");
  SignalImage img;
  img.pixels = linalg::Matrix(kImageRows, kImageCols);
  img.meta = meta_of(w);
  for (std::size_t r = 0; r < kImageRows; ++r) {
    const auto& channel = w.channels[static_cast<std::size_t>(kRowOrder[r] - 1)];
    std::copy(channel.begin(), channel.end(), img.pixels.row(r).begin());
  }
  normalize_min_max(img.pixels);
  return img;
}

}  // namespace harfuse
