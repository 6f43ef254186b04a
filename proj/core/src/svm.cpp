#include "harfuse/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <json.hpp>

#include "harfuse/container.hpp"
#include "harfuse/errors.hpp"
#include "harfuse/rng.hpp"

namespace harfuse {

namespace {

constexpr double kAveragingDecay = 3.0;

void contract(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::contract, what);
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// argmin over b of Σ max(0, 1 − yᵢ(sᵢ + b)). The objective is convex and
// piecewise linear with unit slope increments at the breakpoints
// 1 − sᵢ (positives) and −1 − sᵢ (negatives); its slope is −P left of all
// breakpoints, so it is flat between the P-th and (P+1)-th. Returns the midpoint.
double optimal_bias(std::span<const double> scores, std::span<const double> y) {
  std::vector<double> bp(scores.size());
  std::size_t positives = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (y[i] > 0) {
      bp[i] = 1.0 - scores[i];
      ++positives;
    } else {
      bp[i] = -1.0 - scores[i];
    }
  }
  std::sort(bp.begin(), bp.end());
  if (positives == 0) return bp.front();
  if (positives == bp.size()) return bp.back();
  return 0.5 * (bp[positives - 1] + bp[positives]);
}

}  // namespace

void SvmConfig::validate() const {
  contract(lambda > 0.0 && std::isfinite(lambda), "svm: lambda must be positive");
  contract(epochs > 0, "svm: epochs must be positive");
}

std::vector<double> SvmModel::standardize(std::span<const double> x) const {
  contract(x.size() == feature_mean.size(), "svm: feature vector has " + std::to_string(x.size()) +
                                                " dims, model expects " +
                                                std::to_string(feature_mean.size()));
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - feature_mean[j]) / feature_scale[j];
  return out;
}

SvmModel svm_train(const linalg::Matrix& features, std::span<const int> labels,
                   const SvmConfig& config, std::size_t classes) {
  config.validate();
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  contract(labels.size() == n, "svm: label count does not match sample count");
  if (n < 2) throw Error(ErrorCode::insufficient_samples, "svm needs at least 2 samples");
  contract(features.all_finite(), "svm: non-finite features");
  for (int y : labels) contract(y >= 0, "svm: negative label");
  if (classes == 0) classes = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
  for (int y : labels) contract(static_cast<std::size_t>(y) < classes, "svm: label out of range");
  if (std::set<int>(labels.begin(), labels.end()).size() < 2)
    throw Error(ErrorCode::degenerate_labels, "svm: training data contains a single class");

  SvmModel model;
  model.config = config;
  model.feature_mean = linalg::column_means(features);
  model.feature_scale.assign(d, 1.0);
  for (std::size_t j = 0; j < d; ++j) {
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double c = features(i, j) - model.feature_mean[j];
      ss += c * c;
    }
    const double sd = std::sqrt(ss / static_cast<double>(n));
    if (sd > 0.0) model.feature_scale[j] = sd;
  }
  linalg::Matrix x(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = model.standardize(features.row(i));
    std::copy(row.begin(), row.end(), x.row(i).begin());
  }

  model.w = linalg::Matrix(classes, d);
  model.b.assign(classes, 0.0);
  model.objective_history.assign(classes, {});
  const double lambda = config.lambda;

  std::vector<double> y(n);
  std::vector<double> scores(n);
  std::vector<std::size_t> order(n);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < n; ++i) y[i] = labels[i] == static_cast<int>(c) ? 1.0 : -1.0;
    // w is the raw iterate; avg is its polynomial-decay average, which is what
    // the model keeps. The raw last iterate is too noisy at small lambda.
    std::vector<double> w(d, 0.0);
    auto avg = model.w.row(c);
    double& b = model.b[c];
    std::uint64_t t = 0;
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
      std::iota(order.begin(), order.end(), 0);
      Rng rng(mix_seed(config.seed, epoch));
      shuffle(std::span<std::size_t>(order), rng);
      for (std::size_t i : order) {
        ++t;
        const double eta = 1.0 / (lambda * static_cast<double>(t));
        const double margin = y[i] * (dot(w, x.row(i)) + b);
        const double shrink = 1.0 - 2.0 * eta * lambda;
        for (double& v : w) v *= shrink;
        if (margin < 1.0) {
          const auto xi = x.row(i);
          for (std::size_t j = 0; j < d; ++j) w[j] += eta * y[i] * xi[j];
        }
        const double rho = (kAveragingDecay + 1.0) / (static_cast<double>(t) + kAveragingDecay);
        for (std::size_t j = 0; j < d; ++j) avg[j] += rho * (w[j] - avg[j]);
      }
      for (std::size_t i = 0; i < n; ++i) scores[i] = dot(avg, x.row(i));
      b = optimal_bias(scores, y);

      double hinge = 0.0;
      for (std::size_t i = 0; i < n; ++i) hinge += std::max(0.0, 1.0 - y[i] * (scores[i] + b));
      model.objective_history[c].push_back(hinge / static_cast<double>(n) + lambda * dot(avg, avg));
    }
  }
  return model;
}

std::vector<double> svm_score(const SvmModel& model, std::span<const double> x) {
  const std::vector<double> xs = model.standardize(x);
  std::vector<double> f(model.classes());
  for (std::size_t c = 0; c < model.classes(); ++c) f[c] = dot(model.w.row(c), xs) + model.b[c];
  return f;
}

int svm_predict(const SvmModel& model, std::span<const double> x) {
  const std::vector<double> f = svm_score(model, x);
  // max_element keeps the first of equal maxima.
  return static_cast<int>(std::max_element(f.begin(), f.end()) - f.begin());
}

std::vector<int> svm_predict(const SvmModel& model, const linalg::Matrix& features) {
  std::vector<int> out(features.rows());
  for (std::size_t i = 0; i < features.rows(); ++i) out[i] = svm_predict(model, features.row(i));
  return out;
}

Evaluation evaluate(const SvmModel& model, const linalg::Matrix& features, std::span<const int> labels) {
  contract(features.rows() > 0, "evaluate: empty test set");
  contract(labels.size() == features.rows(), "evaluate: label count does not match sample count");
  const std::size_t classes = model.classes();
  Evaluation e;
  e.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  const std::vector<int> pred = svm_predict(model, features);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    contract(labels[i] >= 0 && static_cast<std::size_t>(labels[i]) < classes, "evaluate: label out of range");
    ++e.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(pred[i])];
    if (pred[i] == labels[i]) ++correct;
  }
  e.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
  e.per_class_accuracy.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    const std::size_t total = std::accumulate(e.confusion[c].begin(), e.confusion[c].end(), std::size_t{0});
    e.per_class_accuracy[c] = total == 0 ? std::numeric_limits<double>::quiet_NaN()
                                         : static_cast<double>(e.confusion[c][c]) / static_cast<double>(total);
  }
  return e;
}

void save_svm(const SvmModel& model, const std::filesystem::path& path) {
  const nlohmann::json meta = {{"class_names", model.class_names},
                               {"lambda", model.config.lambda},
                               {"epochs", model.config.epochs},
                               {"seed", model.config.seed}};
  write_container(path, kSvmMagic, meta.dump(),
                  {matrix_block("W", model.w),
                   {"b", {model.b.size()}, model.b},
                   {"feature_mean", {model.feature_mean.size()}, model.feature_mean},
                   {"feature_scale", {model.feature_scale.size()}, model.feature_scale}});
}

SvmModel load_svm(const std::filesystem::path& path) {
  const ContainerContents c = read_container(path, kSvmMagic);
  SvmModel model;
  try {
    const auto meta = nlohmann::json::parse(c.meta_json);
    model.class_names = meta.value("class_names", std::vector<std::string>{});
    model.config.lambda = meta.at("lambda");
    model.config.epochs = meta.at("epochs");
    model.config.seed = meta.at("seed");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::deserialization, path.string() + ": " + e.what());
  }
  model.w = block_matrix(c.block("W"));
  model.b = c.block("b").values;
  model.feature_mean = c.block("feature_mean").values;
  model.feature_scale = c.block("feature_scale").values;
  if (model.b.size() != model.classes() || model.feature_mean.size() != model.dims() ||
      model.feature_scale.size() != model.dims())
    throw Error(ErrorCode::deserialization, path.string() + ": inconsistent SVM block shapes");
  return model;
}

std::uint64_t parameter_hash(const SvmModel& model) {
  Fnv1a h;
  h.update(model.w.values());
  h.update(model.b);
  h.update(model.feature_mean);
  h.update(model.feature_scale);
  return h.digest();
}

}  // namespace harfuse
