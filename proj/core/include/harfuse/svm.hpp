#pragma once

// One-vs-rest linear SVM. Scores are f = W·x̂ + b, where x̂ is x after the
// per-column standardization learned at training time.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "harfuse/linalg.hpp"

namespace harfuse {

struct SvmConfig {
  double lambda = 1e-3;
  std::size_t epochs = 200;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SvmModel {
  linalg::Matrix w;                   // classes × dims
  std::vector<double> b;              // classes
  std::vector<double> feature_mean;   // dims
  std::vector<double> feature_scale;  // dims; 1 for constant columns
  std::vector<std::string> class_names;
  SvmConfig config;
  /// Per class, the binary objective (1/n)Σ hinge + λ‖w‖² after each epoch.
  std::vector<std::vector<double>> objective_history;

  std::size_t classes() const noexcept { return w.rows(); }
  std::size_t dims() const noexcept { return w.cols(); }

  /// (x − mean)/scale.
  std::vector<double> standardize(std::span<const double> x) const;
};

/// Trains one binary classifier per class by Pegasos-style subgradient descent
/// on w with step 1/(λt) over seeded per-epoch sample orders. The unregularized
/// bias is set after each epoch to the exact minimizer of the hinge loss given w.
/// `classes` of 0 means max(label) + 1.
SvmModel svm_train(const linalg::Matrix& features, std::span<const int> labels,
                   const SvmConfig& config = {}, std::size_t classes = 0);

/// W·x̂ + b.
std::vector<double> svm_score(const SvmModel& model, std::span<const double> x);

/// Argmax of the scores; ties go to the lowest class index.
int svm_predict(const SvmModel& model, std::span<const double> x);
std::vector<int> svm_predict(const SvmModel& model, const linalg::Matrix& features);

struct Evaluation {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;  // NaN for classes absent from the test set
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted]
};

Evaluation evaluate(const SvmModel& model, const linalg::Matrix& features, std::span<const int> labels);

void save_svm(const SvmModel& model, const std::filesystem::path& path);
SvmModel load_svm(const std::filesystem::path& path);

std::uint64_t parameter_hash(const SvmModel& model);

}  // namespace harfuse
