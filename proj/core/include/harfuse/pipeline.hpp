#pragma once

// End-to-end evaluation harness: ingest → split → (augment train) → domain
// images → three CNNs → two-stage CCA fusion → SVM, repeated over random splits.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "harfuse/cca.hpp"
#include "harfuse/cnn.hpp"
#include "harfuse/dataset.hpp"
#include "harfuse/domain_transforms.hpp"
#include "harfuse/svm.hpp"

namespace harfuse {

std::string version_string();

struct PipelineConfig {
  std::filesystem::path dataset_root;
  std::filesystem::path output_dir = "harfuse_out";
  /// Trained CNNs are cached here keyed by content hash; empty disables caching.
  std::filesystem::path cache_dir;
  double window_overlap = 0.0;
  SplitPlan split;
  bool augment = false;
  std::uint64_t augment_seed = 0;
  std::vector<GaborParams> gabor_filters = GaborBank::standard().params();
  int gabor_half_width = 7;
  TrainConfig cnn;
  /// `classes` is taken from the dataset manifest.
  CnnArchitecture cnn_architecture;
  double cca_ridge = kDefaultCcaRidge;
  StageOrder stage_order = kDefaultStageOrder;
  SvmConfig svm;
  std::vector<Domain> domains = {Domain::spatial, Domain::frequency, Domain::time_spectrum};

  /// Throws a config error describing the first violated constraint.
  void validate() const;
};

/// Parses a JSON config; relative paths resolve against `base_dir`.
PipelineConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir);

/// Reads a JSON config file. HARFUSE_OUT, when set, replaces the output directory.
PipelineConfig load_config(const std::filesystem::path& path);

std::string config_to_json(const PipelineConfig& config);

struct PipelineHooks {
  /// Called on each repeat's test windows before any images are built.
  std::function<void(std::size_t repeat, std::vector<SignalWindow>& test)> on_test_windows;
};

struct RepeatResult {
  std::size_t repeat = 0;
  std::size_t train_windows = 0;  // after augmentation
  std::size_t test_windows = 0;
  Evaluation fused;
  /// Single-domain SVM on raw CNN features; only filled by run_ablation.
  std::array<std::optional<Evaluation>, kDomainCount> domains;
  std::vector<double> stage1_lambdas;
  std::vector<double> stage2_lambdas;
  /// Hash over every fitted parameter: CNNs, CCA stages, SVMs.
  std::uint64_t model_hash = 0;
  double seconds = 0.0;
};

struct AccuracySeries {
  std::vector<double> accuracies;
  double mean = 0.0;
  double stddev = 0.0;  // population
};

AccuracySeries summarize(std::vector<double> accuracies);

struct RunReport {
  std::string version;
  std::string mode;  // "run" or "ablate"
  std::string dataset;
  std::vector<std::string> class_names;
  std::vector<RepeatResult> repeats;
  AccuracySeries fused;
  std::array<std::optional<AccuracySeries>, kDomainCount> domains;
  std::string config_json;
  double total_seconds = 0.0;
};

RunReport run_pipeline(const PipelineConfig& config, const PipelineHooks& hooks = {});

/// As run_pipeline, plus spatial-only, frequency-only and time-spectrum-only classifiers.
RunReport run_ablation(const PipelineConfig& config, const PipelineHooks& hooks = {});

/// Full report as JSON; wall-clock timings live under "timings" only.
std::string report_to_json(const RunReport& report, bool include_timings = true);

/// Writes report.json, confusion.csv (summed over repeats), confusion_repeat_<r>.csv
/// and summary.txt into `output_dir`.
void emit_report(const RunReport& report, const std::filesystem::path& output_dir);

// Stage-wise building blocks, also used by the CLI subcommands.

struct Dataset {
  DatasetManifest manifest;
  std::vector<SignalWindow> windows;  // originals
};

Dataset ingest(const PipelineConfig& config);

struct RepeatData {
  std::vector<SignalWindow> train;
  std::vector<SignalWindow> test;
  std::array<std::vector<DomainImage>, kDomainCount> train_images;
  std::array<std::vector<DomainImage>, kDomainCount> test_images;
  std::vector<int> train_labels;
  std::vector<int> test_labels;
};

RepeatData prepare_repeat(const PipelineConfig& config, const Dataset& data, std::size_t repeat,
                          const PipelineHooks& hooks = {});

/// Trains (or loads from cache) the CNN of one domain on the repeat's training images.
CnnModel train_domain_cnn(const PipelineConfig& config, const Dataset& data,
                          const RepeatData& repeat, Domain domain);

void save_features(const FeatureMatrix& f, std::span<const int> labels, const std::filesystem::path& path);
FeatureMatrix load_features(const std::filesystem::path& path, std::vector<int>& labels);

void save_windows(const std::vector<SignalWindow>& windows, const std::filesystem::path& path);
std::vector<SignalWindow> load_windows_file(const std::filesystem::path& path);

}  // namespace harfuse
