#pragma once

// Inertial recording ingestion, fixed-length windowing, augmentation and
// train/test splitting.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace harfuse {

inline constexpr std::size_t kChannels = 6;
inline constexpr std::size_t kWindowLength = 52;
inline constexpr std::size_t kAugmentedVariants = 7;

/// Channel names in CSV column order after the timestamp.
inline constexpr std::array<const char*, kChannels> kChannelNames = {"ax", "ay", "az",
                                                                     "gx", "gy", "gz"};

struct Provenance {
  bool augmented = false;
  int variant = 0;  // 1..7 for augmented windows, 0 for originals

  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// 6 channels × 52 samples: accelerometer x/y/z in g, then gyroscope x/y/z in deg/s.
struct SignalWindow {
  std::array<std::array<double, kWindowLength>, kChannels> channels{};
  int label = 0;
  int subject = 0;
  /// Identifier of the original window; augmented variants share it with their source.
  std::uint64_t origin = 0;
  Provenance provenance;

  bool all_finite() const noexcept;
  friend bool operator==(const SignalWindow&, const SignalWindow&) = default;
};

/// Variable-length 6-channel series.
struct Recording {
  std::array<std::vector<double>, kChannels> channels;
  std::size_t length() const noexcept { return channels[0].size(); }
};

struct ManifestEntry {
  std::string path;  // relative to the dataset root
  int label = 0;
  int subject = 0;
  int trial = 0;
};

struct DatasetManifest {
  std::string name;
  std::vector<std::string> class_names;
  double sampling_rate_hz = 50.0;
  std::vector<ManifestEntry> entries;  // sorted by path
  std::filesystem::path root;
};

/// Reads `root/manifest.json` and validates every referenced recording CSV.
DatasetManifest load_manifest(const std::filesystem::path& root);

/// Parses a recording CSV with header `t,ax,ay,az,gx,gy,gz`.
Recording load_recording(const std::filesystem::path& csv_path);

/// Start-to-start distance between consecutive windows: round(52·(1−overlap)).
std::size_t window_stride(double overlap_fraction);

struct WindowMeta {
  int label = 0;
  int subject = 0;
  std::uint64_t first_origin = 0;  // origin id of the first window, incremented per window
};

/// Cuts a recording into 52-sample windows; the trailing partial window is dropped.
std::vector<SignalWindow> window(const Recording& recording, double overlap_fraction,
                                 const WindowMeta& meta = {});

/// Loads and windows every manifest entry, assigning sequential origin ids.
std::vector<SignalWindow> load_windows(const DatasetManifest& manifest, double overlap_fraction);

/// Seven label-preserving variants of an original window: three jittered,
/// two amplitude-scaled, two circularly shifted by ±2 samples.
std::vector<SignalWindow> augment(const SignalWindow& w, std::uint64_t seed);

/// Each original followed by its seven variants.
std::vector<SignalWindow> augment_all(const std::vector<SignalWindow>& originals,
                                      std::uint64_t seed);

struct SplitPlan {
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  std::size_t repeats = 20;
  bool stratified = false;
  /// Keep an original and all of its augmented variants on the same side.
  bool split_before_augmentation = true;
  /// Hold out whole subjects instead of windows.
  bool subject_holdout = false;
};

struct SplitIndices {
  std::vector<std::size_t> train;  // ascending
  std::vector<std::size_t> test;   // ascending
};

/// Round half up, the convention behind every split count.
std::size_t round_half_up(double x);

SplitIndices split(const std::vector<SignalWindow>& windows, const SplitPlan& plan,
                   std::size_t repeat_index);

}  // namespace harfuse
