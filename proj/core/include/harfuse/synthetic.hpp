#pragma once

// Six-class synthetic inertial dataset whose classes come in pairs that
// differ in only one aspect:
//
//   0 / 1  oscillation at 3 vs 7 cycles per window, random phase (spectral)
//   2 / 3  a transient pulse of opposite sign (raw amplitude layout)
//   4 / 5  the same pulse early vs late in the window (temporal position)
//
// The pairs themselves are told apart by which channels carry the signal.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "harfuse/dataset.hpp"
#include "harfuse/rng.hpp"

namespace harfuse {

struct SyntheticSpec {
  std::size_t recordings_per_class = 20;
  std::size_t windows_per_recording = 2;
  std::size_t subjects = 4;
  double noise = 0.15;
  std::uint64_t seed = 7;
};

inline constexpr std::size_t kSyntheticClasses = 6;

std::vector<std::string> synthetic_class_names();

/// One recording of `windows_per_recording` back-to-back 52-sample segments.
Recording synthesize_recording(int label, const SyntheticSpec& spec, Rng& rng);

/// Writes `root/manifest.json` plus one CSV per recording under `root/recordings/`.
void write_synthetic_dataset(const std::filesystem::path& root, const SyntheticSpec& spec);

}  // namespace harfuse
