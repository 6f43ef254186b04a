#include "harfuse/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "harfuse/errors.hpp"
#include "harfuse/rng.hpp"

namespace harfuse {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

bool SignalWindow::all_finite() const noexcept {
  for (const auto& ch : channels)
    for (double v : ch)
      if (!std::isfinite(v)) return false;
  return true;
}

Recording load_recording(const fs::path& csv_path) {
  std::ifstream in(csv_path);
  if (!in) throw Error(ErrorCode::io, "cannot open recording " + csv_path.string());

  const std::string file = csv_path.string();
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError(file, 1, "missing header row");
  ++line_no;
  {
    const auto header = split_fields(line);
    static constexpr std::array<std::string_view, 7> kHeader = {"t",  "ax", "ay", "az",
                                                                "gx", "gy", "gz"};
    if (header.size() != kHeader.size()) {
      throw ParseError(file, line_no, "expected 7 header columns t,ax,ay,az,gx,gy,gz, got " +
                                          std::to_string(header.size()));
    }
    for (std::size_t i = 0; i < kHeader.size(); ++i) {
      if (header[i] != kHeader[i]) {
        throw ParseError(file, line_no, "header column " + std::to_string(i + 1) + " is '" +
                                            std::string(header[i]) + "', expected '" +
                                            std::string(kHeader[i]) + "'");
      }
    }
  }

  Recording rec;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 7) {
      throw ParseError(file, line_no, "expected 7 columns, got " + std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < 7; ++c) {
      double v = 0.0;
      const auto f = fields[c];
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(v)) {
        throw ParseError(file, line_no, "column " + std::to_string(c + 1) +
                                            " is not a finite number: '" + std::string(f) + "'");
      }
      if (c > 0) rec.channels[c - 1].push_back(v);
    }
  }
  return rec;
}

DatasetManifest load_manifest(const fs::path& root) {
  const fs::path manifest_path = root / "manifest.json";
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorCode::io, "cannot open manifest " + manifest_path.string());

  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(manifest_path.string(), 0, e.what());
  }

  auto schema = [&](const std::string& why) {
    return Error(ErrorCode::schema, manifest_path.string() + ": " + why);
  };

  DatasetManifest m;
  m.root = root;
  try {
    m.name = doc.value("name", std::string{});
    if (!doc.contains("classes") || !doc["classes"].is_array() || doc["classes"].empty())
      throw schema("'classes' must be a non-empty array");
    for (const auto& c : doc["classes"]) m.class_names.push_back(c.get<std::string>());
    m.sampling_rate_hz = doc.value("sampling_rate_hz", 50.0);
    if (!(m.sampling_rate_hz > 0.0)) throw schema("'sampling_rate_hz' must be positive");
    if (!doc.contains("entries") || !doc["entries"].is_array())
      throw schema("'entries' must be an array");

    for (const auto& e : doc["entries"]) {
      ManifestEntry entry;
      entry.path = e.at("path").get<std::string>();
      const auto& label = e.at("label");
      if (label.is_string()) {
        const auto name = label.get<std::string>();
        const auto it = std::find(m.class_names.begin(), m.class_names.end(), name);
        if (it == m.class_names.end()) throw schema("unknown label '" + name + "' in " + entry.path);
        entry.label = static_cast<int>(it - m.class_names.begin());
      } else {
        entry.label = label.get<int>();
        if (entry.label < 0 || entry.label >= static_cast<int>(m.class_names.size()))
          throw schema("label " + std::to_string(entry.label) + " out of range in " + entry.path);
      }
      entry.subject = e.value("subject", 0);
      entry.trial = e.value("trial", 0);
      m.entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw schema(e.what());
  }

  std::sort(m.entries.begin(), m.entries.end(),
            [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });

  for (const auto& entry : m.entries) {
    const fs::path p = root / entry.path;
    if (!fs::exists(p)) throw Error(ErrorCode::io, "recording not found: " + p.string());
    (void)load_recording(p);
  }
  return m;
}

std::size_t window_stride(double overlap_fraction) {
  if (!(overlap_fraction >= 0.0 && overlap_fraction < 1.0))
    throw Error(ErrorCode::contract, "overlap fraction must lie in [0, 1)");
  const std::size_t stride =
      round_half_up(static_cast<double>(kWindowLength) * (1.0 - overlap_fraction));
  return std::max<std::size_t>(stride, 1);
}

std::vector<SignalWindow> window(const Recording& recording, double overlap_fraction,
                                 const WindowMeta& meta) {
  const std::size_t stride = window_stride(overlap_fraction);
  const std::size_t len = recording.length();
  for (const auto& ch : recording.channels) {
    if (ch.size() != len) throw Error(ErrorCode::contract, "recording channels differ in length");
  }
  if (len < kWindowLength) throw TooShortError(len, kWindowLength);

  std::vector<SignalWindow> out;
  out.reserve((len - kWindowLength) / stride + 1);
  for (std::size_t start = 0; start + kWindowLength <= len; start += stride) {
    SignalWindow w;
    for (std::size_t c = 0; c < kChannels; ++c)
      std::copy_n(recording.channels[c].begin() + static_cast<std::ptrdiff_t>(start),
                  kWindowLength, w.channels[c].begin());
    w.label = meta.label;
    w.subject = meta.subject;
    w.origin = meta.first_origin + out.size();
    out.push_back(w);
  }
  return out;
}

std::vector<SignalWindow> load_windows(const DatasetManifest& manifest, double overlap_fraction) {
  std::vector<SignalWindow> all;
  for (const auto& entry : manifest.entries) {
    const Recording rec = load_recording(manifest.root / entry.path);
    WindowMeta meta{entry.label, entry.subject, all.size()};
    auto ws = window(rec, overlap_fraction, meta);
    all.insert(all.end(), ws.begin(), ws.end());
  }
  return all;
}

std::vector<SignalWindow> augment(const SignalWindow& w, std::uint64_t seed) {
  if (w.provenance.augmented)
    throw Error(ErrorCode::provenance, "cannot augment an already augmented window");

  Rng rng(mix_seed(seed, w.origin));
  std::vector<SignalWindow> out;
  out.reserve(kAugmentedVariants);
  auto variant = [&](int id) {
    SignalWindow v = w;
    v.provenance = {true, id};
    return v;
  };

  std::array<double, kChannels> stddev{};
  for (std::size_t c = 0; c < kChannels; ++c) {
    const auto& ch = w.channels[c];
    const double mean = std::accumulate(ch.begin(), ch.end(), 0.0) / kWindowLength;
    double ss = 0.0;
    for (double x : ch) ss += (x - mean) * (x - mean);
    stddev[c] = std::sqrt(ss / kWindowLength);
  }

  for (int j = 1; j <= 3; ++j) {
    SignalWindow v = variant(j);
    for (std::size_t c = 0; c < kChannels; ++c) {
      const double sigma = 0.05 * stddev[c];
      for (double& x : v.channels[c]) x += sigma * standard_normal(rng);
    }
    out.push_back(v);
  }
  for (int j = 4; j <= 5; ++j) {
    SignalWindow v = variant(j);
    for (auto& ch : v.channels) {
      const double factor = 0.9 + 0.2 * uniform01(rng);
      for (double& x : ch) x *= factor;
    }
    out.push_back(v);
  }
  for (int j = 6; j <= 7; ++j) {
    SignalWindow v = variant(j);
    const std::size_t shift = j == 6 ? 2 : kWindowLength - 2;
    for (std::size_t c = 0; c < kChannels; ++c)
      for (std::size_t t = 0; t < kWindowLength; ++t)
        v.channels[c][(t + shift) % kWindowLength] = w.channels[c][t];
    out.push_back(v);
  }
  return out;
}

std::vector<SignalWindow> augment_all(const std::vector<SignalWindow>& originals,
                                      std::uint64_t seed) {
  std::vector<SignalWindow> out;
  out.reserve(originals.size() * (kAugmentedVariants + 1));
  for (const auto& w : originals) {
    out.push_back(w);
    auto variants = augment(w, seed);
    out.insert(out.end(), variants.begin(), variants.end());
  }
  return out;
}

std::size_t round_half_up(double x) {
  return static_cast<std::size_t>(std::floor(x + 0.5));
}

namespace {

// Shuffles the units and assigns the first round(f·|units|) to train.
void assign_units(std::vector<std::size_t>& units, double fraction, Rng& rng,
                  std::vector<char>& unit_is_train) {
  shuffle(std::span<std::size_t>(units), rng);
  const std::size_t n_train =
      std::min(units.size(), round_half_up(fraction * static_cast<double>(units.size())));
  for (std::size_t i = 0; i < units.size(); ++i) unit_is_train[units[i]] = i < n_train ? 1 : 0;
}

}  // namespace

SplitIndices split(const std::vector<SignalWindow>& windows, const SplitPlan& plan,
                   std::size_t repeat_index) {
  if (windows.empty()) throw Error(ErrorCode::empty_dataset, "cannot split an empty dataset");
  if (plan.repeats < 1) throw Error(ErrorCode::contract, "split plan needs at least one repeat");
  if (repeat_index >= plan.repeats)
    throw Error(ErrorCode::contract, "repeat index " + std::to_string(repeat_index) +
                                         " out of range for " + std::to_string(plan.repeats) +
                                         " repeats");
  if (!(plan.train_fraction > 0.0 && plan.train_fraction < 1.0))
    throw Error(ErrorCode::contract, "train fraction must lie in (0, 1)");

  // A unit is the smallest group that must stay on one side of the split.
  std::vector<std::size_t> unit_of(windows.size());
  std::vector<int> unit_label;
  {
    std::map<std::uint64_t, std::size_t> ids;
    for (std::size_t i = 0; i < windows.size(); ++i) {
      std::uint64_t key = i;
      if (plan.subject_holdout)
        key = static_cast<std::uint64_t>(static_cast<std::uint32_t>(windows[i].subject));
      else if (plan.split_before_augmentation)
        key = windows[i].origin;
      const auto [it, inserted] = ids.emplace(key, ids.size());
      if (inserted) unit_label.push_back(windows[i].label);
      unit_of[i] = it->second;
    }
  }
  const std::size_t n_units = unit_label.size();

  Rng rng(mix_seed(plan.seed, repeat_index));
  std::vector<char> unit_is_train(n_units, 0);
  if (plan.stratified && !plan.subject_holdout) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t u = 0; u < n_units; ++u) by_class[unit_label[u]].push_back(u);
    for (auto& [label, units] : by_class) assign_units(units, plan.train_fraction, rng, unit_is_train);
  } else {
    std::vector<std::size_t> units(n_units);
    std::iota(units.begin(), units.end(), 0);
    assign_units(units, plan.train_fraction, rng, unit_is_train);
  }

  SplitIndices out;
  for (std::size_t i = 0; i < windows.size(); ++i)
    (unit_is_train[unit_of[i]] ? out.train : out.test).push_back(i);
  return out;
}

}  // namespace harfuse
