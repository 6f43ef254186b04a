#pragma once

// Per-domain convolutional network:
//
//   input 24×52×1
//   conv 5×5 valid, 50 filters, ReLU   -> 20×48×50
//   max pool 2×2 stride 2              -> 10×24×50
//   conv 5×5 valid, 100 filters, ReLU  -> 6×20×100
//   max pool 2×2 stride 2              -> 3×10×100 (3000)
//   fully connected 256, ReLU          -> feature layer
//   fully connected C                  -> class scores (softmax cross-entropy)

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "harfuse/domain_transforms.hpp"
#include "harfuse/features.hpp"
#include "harfuse/linalg.hpp"

namespace harfuse {

struct CnnShapes {
  std::size_t conv1_rows, conv1_cols;
  std::size_t pool1_rows, pool1_cols;
  std::size_t conv2_rows, conv2_cols;
  std::size_t pool2_rows, pool2_cols;
  std::size_t flatten;
};

struct CnnArchitecture {
  std::size_t input_rows = kImageRows;
  std::size_t input_cols = kImageCols;
  std::size_t conv1_filters = 50;
  std::size_t conv1_kernel = 5;
  std::size_t conv2_filters = 100;
  std::size_t conv2_kernel = 5;
  std::size_t pool = 2;
  std::size_t fc_units = 256;
  std::size_t classes = 2;

  /// Derived layer shapes; throws a contract error if the chain does not tile exactly.
  CnnShapes shapes() const;

  friend bool operator==(const CnnArchitecture&, const CnnArchitecture&) = default;
};

struct TrainConfig {
  double momentum = 0.9;
  double initial_learning_rate = 0.001;
  double lr_drop_factor = 0.5;
  std::size_t lr_drop_period = 10;
  double l2_weight = 0.004;
  std::size_t max_epochs = 70;
  std::size_t minibatch_size = 64;
  std::uint64_t seed = 0;

  /// Piecewise-constant schedule: initial · factor^floor(epoch / period), epoch from 0.
  double learning_rate_at(std::size_t epoch) const;
  void validate() const;
};

struct EpochStats {
  double loss = 0.0;      // mean cross-entropy over the epoch's samples
  double accuracy = 0.0;  // training accuracy of the minibatch forward passes
};

/// Named slice of the flat parameter vector.
struct ParamBlock {
  std::string name;
  std::size_t offset;
  std::size_t rows;
  std::size_t cols;
  bool regularized;  // weights carry the L2 penalty, biases do not
};

class CnnModel {
 public:
  /// All-zero parameters.
  explicit CnnModel(const CnnArchitecture& arch);

  /// Fan-in scaled uniform weights in ±√(6/fan-in) and biases of 0.01.
  static CnnModel initialized(const CnnArchitecture& arch, std::uint64_t seed);

  const CnnArchitecture& architecture() const noexcept { return arch_; }
  const CnnShapes& shapes() const noexcept { return shapes_; }
  const std::vector<ParamBlock>& blocks() const noexcept { return blocks_; }
  const ParamBlock& block(std::string_view name) const;

  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }

  std::vector<std::string> class_names;
  TrainConfig train_config;
  std::vector<EpochStats> history;
  bool trained = false;

 private:
  CnnArchitecture arch_;
  CnnShapes shapes_;
  std::vector<ParamBlock> blocks_;
  std::vector<double> params_;
};

struct ForwardResult {
  linalg::Matrix scores;          // batch × classes
  linalg::Matrix fc_activations;  // batch × fc_units, post-ReLU
};

/// Runs a batch of input-shaped images through the network.
ForwardResult forward(const CnnModel& model, std::span<const linalg::Matrix> batch);

struct LossAndGradient {
  double data_loss = 0.0;  // mean cross-entropy
  double total_loss = 0.0;  // data loss + (l2/2)·Σ‖W‖² over weight blocks
  std::vector<double> gradient;  // d total_loss / d parameters, same layout as parameters()
  std::size_t correct = 0;
};

/// Loss and analytic gradient for one batch. `labels` index the classifier outputs.
LossAndGradient loss_and_gradient(const CnnModel& model, std::span<const linalg::Matrix> batch,
                                  std::span<const int> labels, double l2_weight);

/// Minibatch SGD with momentum on softmax cross-entropy plus L2 weight decay.
/// Throws DivergenceError on a non-finite loss and a degenerate-labels error
/// when fewer than two classes are present.
CnnModel train(std::span<const linalg::Matrix> images, std::span<const int> labels,
               const CnnArchitecture& arch, const TrainConfig& cfg);

CnnModel train(std::span<const DomainImage> images, const CnnArchitecture& arch,
               const TrainConfig& cfg);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_index = 0;
};

/// Compares analytic gradients of the total loss with central differences
/// (step h) on `sample_count` seeded random parameters, or all of them when
/// `sample_count` is 0 or exceeds the parameter count. Indices restricted to
/// `only_block` when it is non-empty.
GradientCheckResult gradient_check(const CnnModel& model, std::span<const linalg::Matrix> batch,
                                   std::span<const int> labels, double l2_weight,
                                   std::size_t sample_count, std::uint64_t seed, double h = 1e-5,
                                   std::string_view only_block = {});

/// Post-ReLU fully-connected activations, one row per image, order preserved.
linalg::Matrix extract_features(const CnnModel& model, std::span<const linalg::Matrix> images);

/// As above, tagged with the images' domain and sample ids. Requires a trained model.
FeatureMatrix extract_features(const CnnModel& model, std::span<const DomainImage> images);

void save_model(const CnnModel& model, const std::filesystem::path& path);
CnnModel load_model(const std::filesystem::path& path);

/// FNV-1a over the parameter bytes.
std::uint64_t parameter_hash(const CnnModel& model);

}  // namespace harfuse
