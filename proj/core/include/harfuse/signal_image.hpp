#pragma once

#include <array>

#include "harfuse/dataset.hpp"
#include "harfuse/image.hpp"
#include "harfuse/linalg.hpp"

namespace harfuse {

/// 1-based channel index stacked at each of the 24 image rows. Every channel
/// appears four times and every pair of distinct channels is adjacent at least once.
inline constexpr std::array<int, kImageRows> kRowOrder = {
    1, 2, 3, 4, 5, 6,  //
    1, 3, 5, 2, 4, 6,  //
    1, 4, 2, 5, 3, 6,  //
    1, 5, 2, 6, 3, 4,
};

struct SignalImage {
  linalg::Matrix pixels;  // 24×52, normalized to [0, 1]
  std::array<int, kImageRows> row_order = kRowOrder;
  ImageMeta meta;
};

/// Stacks the window's channels in `kRowOrder` and min-max normalizes the result.
SignalImage build_signal_image(const SignalWindow& w);

}  // namespace harfuse
