#include "harfuse/synthetic.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include <json.hpp>

#include "harfuse/errors.hpp"

namespace harfuse {

namespace {

constexpr std::array<std::array<int, 3>, 3> kPairChannels = {{
    {0, 1, 2},  // accelerometer
    {3, 4, 5},  // gyroscope
    {0, 2, 4},  // mixed
}};

double pulse(double t, double centre, double width) {
  const double z = (t - centre) / width;
  return std::exp(-0.5 * z * z);
}

}  // namespace

std::vector<std::string> synthetic_class_names() {
  return {"osc_slow", "osc_fast", "pulse_up", "pulse_down", "pulse_early", "pulse_late"};
}

Recording synthesize_recording(int label, const SyntheticSpec& spec, Rng& rng) {
  if (label < 0 || label >= static_cast<int>(kSyntheticClasses))
    throw Error(ErrorCode::contract, "synthetic label out of range");
  const std::size_t len = spec.windows_per_recording * kWindowLength;
  Recording rec;
  for (auto& ch : rec.channels) ch.assign(len, 0.0);

  const auto& active = kPairChannels[static_cast<std::size_t>(label / 2)];
  for (std::size_t seg = 0; seg < spec.windows_per_recording; ++seg) {
    const std::size_t base = seg * kWindowLength;
    const double amplitude = 0.8 + 0.4 * uniform01(rng);
    // Shared by the three active channels of this segment.
    double centre = 0.0;
    if (label == 2 || label == 3) centre = 16.0 + 20.0 * uniform01(rng);
    if (label == 4) centre = 8.0 + 8.0 * uniform01(rng);
    if (label == 5) centre = 36.0 + 8.0 * uniform01(rng);

    for (int c : active) {
      auto& ch = rec.channels[static_cast<std::size_t>(c)];
      const double phase = 2.0 * std::numbers::pi * uniform01(rng);
      const double gain = amplitude * (0.9 + 0.2 * uniform01(rng));
      for (std::size_t t = 0; t < kWindowLength; ++t) {
        const double x = static_cast<double>(t);
        double v = 0.0;
        switch (label) {
          case 0: v = std::sin(2.0 * std::numbers::pi * 3.0 * x / kWindowLength + phase); break;
          case 1: v = std::sin(2.0 * std::numbers::pi * 7.0 * x / kWindowLength + phase); break;
          case 2: v = 1.5 * pulse(x, centre, 4.0); break;
          case 3: v = -1.5 * pulse(x, centre, 4.0); break;
          default: v = 1.5 * pulse(x, centre, 4.0); break;
        }
        ch[base + t] += gain * v;
      }
    }
    for (auto& ch : rec.channels)
      for (std::size_t t = 0; t < kWindowLength; ++t) ch[base + t] += spec.noise * standard_normal(rng);
  }
  return rec;
}

void write_synthetic_dataset(const std::filesystem::path& root, const SyntheticSpec& spec) {
  namespace fs = std::filesystem;
  if (spec.recordings_per_class == 0 || spec.windows_per_recording == 0 || spec.subjects == 0)
    throw Error(ErrorCode::config, "synthetic dataset sizes must be positive");
  std::error_code ec;
  fs::create_directories(root / "recordings", ec);
  if (ec) throw Error(ErrorCode::io, "cannot create " + (root / "recordings").string() + ": " + ec.message());

  nlohmann::json manifest;
  manifest["name"] = "synthetic-complementary";
  manifest["classes"] = synthetic_class_names();
  manifest["sampling_rate_hz"] = 50;
  manifest["entries"] = nlohmann::json::array();

  Rng rng(mix_seed(spec.seed));
  char name[64];
  char value[32];
  for (std::size_t r = 0; r < spec.recordings_per_class; ++r) {
    for (int label = 0; label < static_cast<int>(kSyntheticClasses); ++label) {
      const Recording rec = synthesize_recording(label, spec, rng);
      std::snprintf(name, sizeof name, "recordings/c%d_r%03zu.csv", label, r);
      std::ofstream out(root / name);
      if (!out) throw Error(ErrorCode::io, "cannot write " + (root / name).string());
      out << "t,ax,ay,az,gx,gy,gz\n";
      for (std::size_t t = 0; t < rec.length(); ++t) {
        std::snprintf(value, sizeof value, "%.2f", static_cast<double>(t) / 50.0);
        out << value;
        for (const auto& ch : rec.channels) {
          std::snprintf(value, sizeof value, "%.17g", ch[t]);
          out << ',' << value;
        }
        out << '\n';
      }
      manifest["entries"].push_back({{"path", name},
                                     {"label", label},
                                     {"subject", static_cast<int>(r % spec.subjects) + 1},
                                     {"trial", static_cast<int>(r / spec.subjects) + 1}});
    }
  }
  std::ofstream out(root / "manifest.json");
  if (!out) throw Error(ErrorCode::io, "cannot write " + (root / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

}  // namespace harfuse
