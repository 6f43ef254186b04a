#include "harfuse/cnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include <Eigen/Core>
#include <json.hpp>

#include "harfuse/container.hpp"
#include "harfuse/errors.hpp"
#include "harfuse/rng.hpp"

namespace harfuse {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using ConstMatMap = Eigen::Map<const RowMat>;
using json = nlohmann::json;

// Samples per forward/backward pass; gradients of a minibatch are summed over
// chunks in order, so results do not depend on anything but the data.
constexpr std::size_t kChunk = 16;

void contract(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::contract, what);
}

// Parameters and gradients are copied into Eigen-owned storage. Eigen picks
// its vectorized code path from the runtime alignment of mapped data, so maps
// over plain heap vectors could round differently from run to run under AVX.
struct Weights {
  RowMat w1, b1, w2, b2, wf, bf, wc, bc;
};

Weights weights_of(const CnnModel& m) {
  auto map = [&](std::string_view name) -> RowMat {
    const ParamBlock& b = m.block(name);
    return ConstMatMap(m.parameters().data() + b.offset, static_cast<Eigen::Index>(b.rows),
                       static_cast<Eigen::Index>(b.cols));
  };
  return {map("conv1.weight"), map("conv1.bias"),      map("conv2.weight"), map("conv2.bias"),
          map("fc.weight"),    map("fc.bias"),         map("classifier.weight"),
          map("classifier.bias")};
}

struct Activations {
  std::size_t batch = 0;
  RowMat col1, a1, p1, col2, a2, p2, fc, scores;
  std::vector<std::uint32_t> p1_arg, p2_arg;
};

void max_pool(const RowMat& in, std::size_t batch, std::size_t rows, std::size_t cols,
              std::size_t pool, RowMat& out, std::vector<std::uint32_t>& arg) {
  const std::size_t channels = static_cast<std::size_t>(in.cols());
  const std::size_t prow = rows / pool;
  const std::size_t pcol = cols / pool;
  out.resize(static_cast<Eigen::Index>(batch * prow * pcol), static_cast<Eigen::Index>(channels));
  arg.assign(batch * prow * pcol * channels, 0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t py = 0; py < prow; ++py) {
      for (std::size_t px = 0; px < pcol; ++px) {
        const std::size_t orow = (b * prow + py) * pcol + px;
        for (std::size_t c = 0; c < channels; ++c) {
          std::size_t best_row = (b * rows + py * pool) * cols + px * pool;
          double best = in(static_cast<Eigen::Index>(best_row), static_cast<Eigen::Index>(c));
          for (std::size_t dy = 0; dy < pool; ++dy) {
            for (std::size_t dx = 0; dx < pool; ++dx) {
              const std::size_t r = (b * rows + py * pool + dy) * cols + px * pool + dx;
              const double v = in(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
              if (v > best) {
                best = v;
                best_row = r;
              }
            }
          }
          out(static_cast<Eigen::Index>(orow), static_cast<Eigen::Index>(c)) = best;
          arg[orow * channels + c] = static_cast<std::uint32_t>(best_row);
        }
      }
    }
  }
}

void relu(RowMat& m) { m = m.cwiseMax(0.0); }

void forward_chunk(const CnnModel& model, const Weights& w,
                   std::span<const linalg::Matrix> images, Activations& act) {
  const CnnArchitecture& arch = model.architecture();
  const CnnShapes& s = model.shapes();
  const std::size_t batch = images.size();
  act.batch = batch;

  const std::size_t k1 = arch.conv1_kernel;
  const std::size_t p1 = s.conv1_rows * s.conv1_cols;
  act.col1.resize(static_cast<Eigen::Index>(batch * p1), static_cast<Eigen::Index>(k1 * k1));
  for (std::size_t b = 0; b < batch; ++b) {
    const linalg::Matrix& img = images[b];
    contract(img.rows() == arch.input_rows && img.cols() == arch.input_cols,
             "cnn: image shape " + std::to_string(img.rows()) + "x" + std::to_string(img.cols()) +
                 " does not match input " + std::to_string(arch.input_rows) + "x" +
                 std::to_string(arch.input_cols));
    for (std::size_t oy = 0; oy < s.conv1_rows; ++oy) {
      for (std::size_t ox = 0; ox < s.conv1_cols; ++ox) {
        double* dst = act.col1.row(static_cast<Eigen::Index>(b * p1 + oy * s.conv1_cols + ox)).data();
        for (std::size_t ky = 0; ky < k1; ++ky)
          for (std::size_t kx = 0; kx < k1; ++kx) *dst++ = img(oy + ky, ox + kx);
      }
    }
  }
  act.a1.noalias() = act.col1 * w.w1;
  act.a1.rowwise() += RowVec(w.b1);
  relu(act.a1);
  max_pool(act.a1, batch, s.conv1_rows, s.conv1_cols, arch.pool, act.p1, act.p1_arg);

  const std::size_t k2 = arch.conv2_kernel;
  const std::size_t f1 = arch.conv1_filters;
  const std::size_t q1 = s.pool1_rows * s.pool1_cols;
  const std::size_t p2 = s.conv2_rows * s.conv2_cols;
  act.col2.resize(static_cast<Eigen::Index>(batch * p2), static_cast<Eigen::Index>(k2 * k2 * f1));
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t oy = 0; oy < s.conv2_rows; ++oy) {
      for (std::size_t ox = 0; ox < s.conv2_cols; ++ox) {
        double* dst = act.col2.row(static_cast<Eigen::Index>(b * p2 + oy * s.conv2_cols + ox)).data();
        for (std::size_t ky = 0; ky < k2; ++ky) {
          for (std::size_t kx = 0; kx < k2; ++kx) {
            const std::size_t src = b * q1 + (oy + ky) * s.pool1_cols + ox + kx;
            const double* from = act.p1.row(static_cast<Eigen::Index>(src)).data();
            dst = std::copy(from, from + f1, dst);
          }
        }
      }
    }
  }
  act.a2.noalias() = act.col2 * w.w2;
  act.a2.rowwise() += RowVec(w.b2);
  relu(act.a2);
  max_pool(act.a2, batch, s.conv2_rows, s.conv2_cols, arch.pool, act.p2, act.p2_arg);

  const ConstMatMap flat(act.p2.data(), static_cast<Eigen::Index>(batch),
                         static_cast<Eigen::Index>(s.flatten));
  act.fc.noalias() = flat * w.wf;
  act.fc.rowwise() += RowVec(w.bf);
  relu(act.fc);
  act.scores.noalias() = act.fc * w.wc;
  act.scores.rowwise() += RowVec(w.bc);
}

// Softmax cross-entropy summed over the chunk; writes d(sum)/d(scores)·scale.
double softmax_xent(const RowMat& scores, std::span<const int> labels, double scale, RowMat& dscores,
                    std::size_t& correct) {
  const Eigen::Index classes = scores.cols();
  dscores.resize(scores.rows(), classes);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < scores.rows(); ++i) {
    const auto row = scores.row(i);
    Eigen::Index arg = 0;
    const double mx = row.maxCoeff(&arg);
    if (arg == labels[static_cast<std::size_t>(i)]) ++correct;
    double z = 0.0;
    for (Eigen::Index c = 0; c < classes; ++c) z += std::exp(row(c) - mx);
    const double log_z = std::log(z) + mx;
    const int y = labels[static_cast<std::size_t>(i)];
    loss += log_z - row(y);
    for (Eigen::Index c = 0; c < classes; ++c)
      dscores(i, c) = scale * (std::exp(row(c) - log_z) - (c == y ? 1.0 : 0.0));
  }
  return loss;
}

void max_unpool(const RowMat& dpooled, const std::vector<std::uint32_t>& arg, Eigen::Index in_rows,
                RowMat& dinput) {
  const Eigen::Index channels = dpooled.cols();
  dinput.setZero(in_rows, channels);
  for (Eigen::Index r = 0; r < dpooled.rows(); ++r)
    for (Eigen::Index c = 0; c < channels; ++c)
      dinput(arg[static_cast<std::size_t>(r * channels + c)], c) += dpooled(r, c);
}

void relu_backward(const RowMat& activated, RowMat& grad) {
  grad = (activated.array() > 0.0).select(grad, 0.0);
}

using GradMaps = Weights;

void backward_chunk(const CnnModel& model, const Weights& w, const Activations& act,
                    const RowMat& dscores, GradMaps& g) {
  const CnnArchitecture& arch = model.architecture();
  const CnnShapes& s = model.shapes();
  const std::size_t batch = act.batch;

  g.wc.noalias() += act.fc.transpose() * dscores;
  g.bc += dscores.colwise().sum();
  RowMat dfc = dscores * w.wc.transpose();
  relu_backward(act.fc, dfc);

  const ConstMatMap flat(act.p2.data(), static_cast<Eigen::Index>(batch),
                         static_cast<Eigen::Index>(s.flatten));
  g.wf.noalias() += flat.transpose() * dfc;
  g.bf += dfc.colwise().sum();
  RowMat dflat = dfc * w.wf.transpose();
  const ConstMatMap dp2(dflat.data(), act.p2.rows(), act.p2.cols());

  RowMat da2;
  max_unpool(dp2, act.p2_arg, act.a2.rows(), da2);
  relu_backward(act.a2, da2);
  g.w2.noalias() += act.col2.transpose() * da2;
  g.b2 += da2.colwise().sum();
  const RowMat dcol2 = da2 * w.w2.transpose();

  const std::size_t k2 = arch.conv2_kernel;
  const std::size_t f1 = arch.conv1_filters;
  const std::size_t q1 = s.pool1_rows * s.pool1_cols;
  const std::size_t p2 = s.conv2_rows * s.conv2_cols;
  RowMat dp1 = RowMat::Zero(act.p1.rows(), act.p1.cols());
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t oy = 0; oy < s.conv2_rows; ++oy) {
      for (std::size_t ox = 0; ox < s.conv2_cols; ++ox) {
        const double* src = dcol2.row(static_cast<Eigen::Index>(b * p2 + oy * s.conv2_cols + ox)).data();
        for (std::size_t ky = 0; ky < k2; ++ky) {
          for (std::size_t kx = 0; kx < k2; ++kx) {
            double* dst =
                dp1.row(static_cast<Eigen::Index>(b * q1 + (oy + ky) * s.pool1_cols + ox + kx)).data();
            for (std::size_t c = 0; c < f1; ++c) dst[c] += src[c];
            src += f1;
          }
        }
      }
    }
  }

  RowMat da1;
  max_unpool(dp1, act.p1_arg, act.a1.rows(), da1);
  relu_backward(act.a1, da1);
  g.w1.noalias() += act.col1.transpose() * da1;
  g.b1 += da1.colwise().sum();
}

double l2_penalty(const CnnModel& model, double l2_weight) {
  double sum = 0.0;
  for (const auto& b : model.blocks()) {
    if (!b.regularized) continue;
    for (std::size_t i = 0; i < b.rows * b.cols; ++i) {
      const double v = model.parameters()[b.offset + i];
      sum += v * v;
    }
  }
  return 0.5 * l2_weight * sum;
}

double total_loss(const CnnModel& model, std::span<const linalg::Matrix> batch,
                  std::span<const int> labels, double l2_weight) {
  const Weights w = weights_of(model);
  Activations act;
  RowMat dscores;
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t start = 0; start < batch.size(); start += kChunk) {
    const std::size_t len = std::min(kChunk, batch.size() - start);
    forward_chunk(model, w, batch.subspan(start, len), act);
    loss += softmax_xent(act.scores, labels.subspan(start, len), 0.0, dscores, correct);
  }
  return loss / static_cast<double>(batch.size()) + l2_penalty(model, l2_weight);
}

void check_labels(std::span<const int> labels, std::size_t classes) {
  for (int y : labels)
    contract(y >= 0 && static_cast<std::size_t>(y) < classes,
             "cnn: label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
}

json arch_to_json(const CnnArchitecture& a) {
  return {{"input_rows", a.input_rows},       {"input_cols", a.input_cols},
          {"conv1_filters", a.conv1_filters}, {"conv1_kernel", a.conv1_kernel},
          {"conv2_filters", a.conv2_filters}, {"conv2_kernel", a.conv2_kernel},
          {"pool", a.pool},                   {"fc_units", a.fc_units},
          {"classes", a.classes}};
}

CnnArchitecture arch_from_json(const json& j) {
  CnnArchitecture a;
  a.input_rows = j.at("input_rows");
  a.input_cols = j.at("input_cols");
  a.conv1_filters = j.at("conv1_filters");
  a.conv1_kernel = j.at("conv1_kernel");
  a.conv2_filters = j.at("conv2_filters");
  a.conv2_kernel = j.at("conv2_kernel");
  a.pool = j.at("pool");
  a.fc_units = j.at("fc_units");
  a.classes = j.at("classes");
  return a;
}

}  // namespace

CnnShapes CnnArchitecture::shapes() const {
  contract(conv1_filters > 0 && conv2_filters > 0 && fc_units > 0 && pool > 0,
           "cnn: layer sizes must be positive");
  contract(classes >= 2, "cnn: at least two classes are required");
  contract(conv1_kernel > 0 && conv1_kernel <= input_rows && conv1_kernel <= input_cols,
           "cnn: conv1 kernel does not fit the input");
  CnnShapes s{};
  s.conv1_rows = input_rows - conv1_kernel + 1;
  s.conv1_cols = input_cols - conv1_kernel + 1;
  contract(s.conv1_rows % pool == 0 && s.conv1_cols % pool == 0,
           "cnn: conv1 output does not tile the first pooling layer");
  s.pool1_rows = s.conv1_rows / pool;
  s.pool1_cols = s.conv1_cols / pool;
  contract(conv2_kernel > 0 && conv2_kernel <= s.pool1_rows && conv2_kernel <= s.pool1_cols,
           "cnn: conv2 kernel does not fit the pooled map");
  s.conv2_rows = s.pool1_rows - conv2_kernel + 1;
  s.conv2_cols = s.pool1_cols - conv2_kernel + 1;
  contract(s.conv2_rows % pool == 0 && s.conv2_cols % pool == 0,
           "cnn: conv2 output does not tile the second pooling layer");
  s.pool2_rows = s.conv2_rows / pool;
  s.pool2_cols = s.conv2_cols / pool;
  s.flatten = s.pool2_rows * s.pool2_cols * conv2_filters;
  return s;
}

double TrainConfig::learning_rate_at(std::size_t epoch) const {
  const auto drops = static_cast<double>(epoch / std::max<std::size_t>(lr_drop_period, 1));
  return initial_learning_rate * std::pow(lr_drop_factor, drops);
}

void TrainConfig::validate() const {
  contract(momentum >= 0.0 && momentum < 1.0, "train config: momentum must lie in [0, 1)");
  contract(initial_learning_rate > 0.0, "train config: learning rate must be positive");
  contract(lr_drop_factor > 0.0 && lr_drop_factor <= 1.0,
           "train config: drop factor must lie in (0, 1]");
  contract(lr_drop_period > 0, "train config: drop period must be positive");
  contract(l2_weight >= 0.0, "train config: L2 weight must be non-negative");
  contract(max_epochs > 0, "train config: max epochs must be positive");
  contract(minibatch_size > 0, "train config: minibatch size must be positive");
}

CnnModel::CnnModel(const CnnArchitecture& arch) : arch_(arch), shapes_(arch.shapes()) {
  std::size_t offset = 0;
  auto add = [&](std::string name, std::size_t rows, std::size_t cols, bool regularized) {
    blocks_.push_back({std::move(name), offset, rows, cols, regularized});
    offset += rows * cols;
  };
  add("conv1.weight", arch.conv1_kernel * arch.conv1_kernel, arch.conv1_filters, true);
  add("conv1.bias", 1, arch.conv1_filters, false);
  add("conv2.weight", arch.conv2_kernel * arch.conv2_kernel * arch.conv1_filters,
      arch.conv2_filters, true);
  add("conv2.bias", 1, arch.conv2_filters, false);
  add("fc.weight", shapes_.flatten, arch.fc_units, true);
  add("fc.bias", 1, arch.fc_units, false);
  add("classifier.weight", arch.fc_units, arch.classes, true);
  add("classifier.bias", 1, arch.classes, false);
  params_.assign(offset, 0.0);
}

CnnModel CnnModel::initialized(const CnnArchitecture& arch, std::uint64_t seed) {
  CnnModel m(arch);
  Rng rng(mix_seed(seed, 0x636e6e));
  for (const auto& b : m.blocks_) {
    auto values = m.parameters().subspan(b.offset, b.rows * b.cols);
    if (b.regularized) {
      const double bound = std::sqrt(6.0 / static_cast<double>(b.rows));
      for (double& v : values) v = bound * (2.0 * uniform01(rng) - 1.0);
    } else {
      std::fill(values.begin(), values.end(), 0.01);
    }
  }
  return m;
}

const ParamBlock& CnnModel::block(std::string_view name) const {
  for (const auto& b : blocks_)
    if (b.name == name) return b;
  throw Error(ErrorCode::contract, "cnn: no parameter block '" + std::string(name) + "'");
}

ForwardResult forward(const CnnModel& model, std::span<const linalg::Matrix> batch) {
  const Weights w = weights_of(model);
  const std::size_t classes = model.architecture().classes;
  const std::size_t units = model.architecture().fc_units;
  ForwardResult out{linalg::Matrix(batch.size(), classes), linalg::Matrix(batch.size(), units)};
  Activations act;
  for (std::size_t start = 0; start < batch.size(); start += kChunk) {
    const std::size_t len = std::min(kChunk, batch.size() - start);
    forward_chunk(model, w, batch.subspan(start, len), act);
    std::copy(act.scores.data(), act.scores.data() + act.scores.size(),
              out.scores.row(start).data());
    std::copy(act.fc.data(), act.fc.data() + act.fc.size(), out.fc_activations.row(start).data());
  }
  return out;
}

LossAndGradient loss_and_gradient(const CnnModel& model, std::span<const linalg::Matrix> batch,
                                  std::span<const int> labels, double l2_weight) {
  contract(!batch.empty(), "cnn: empty batch");
  contract(batch.size() == labels.size(), "cnn: batch and label counts differ");
  check_labels(labels, model.architecture().classes);

  LossAndGradient out;
  out.gradient.assign(model.parameters().size(), 0.0);
  const Weights w = weights_of(model);
  GradMaps g = w;
  for (RowMat* m : {&g.w1, &g.b1, &g.w2, &g.b2, &g.wf, &g.bf, &g.wc, &g.bc}) m->setZero();
  const double scale = 1.0 / static_cast<double>(batch.size());
  Activations act;
  RowMat dscores;
  double loss = 0.0;
  for (std::size_t start = 0; start < batch.size(); start += kChunk) {
    const std::size_t len = std::min(kChunk, batch.size() - start);
    forward_chunk(model, w, batch.subspan(start, len), act);
    loss += softmax_xent(act.scores, labels.subspan(start, len), scale, dscores, out.correct);
    backward_chunk(model, w, act, dscores, g);
  }

  auto store = [&](std::string_view name, const RowMat& m) {
    std::copy(m.data(), m.data() + m.size(), out.gradient.begin() + static_cast<std::ptrdiff_t>(model.block(name).offset));
  };
  store("conv1.weight", g.w1);
  store("conv1.bias", g.b1);
  store("conv2.weight", g.w2);
  store("conv2.bias", g.b2);
  store("fc.weight", g.wf);
  store("fc.bias", g.bf);
  store("classifier.weight", g.wc);
  store("classifier.bias", g.bc);

  out.data_loss = loss * scale;
  out.total_loss = out.data_loss + l2_penalty(model, l2_weight);
  if (l2_weight != 0.0) {
    for (const auto& b : model.blocks()) {
      if (!b.regularized) continue;
      for (std::size_t i = b.offset; i < b.offset + b.rows * b.cols; ++i)
        out.gradient[i] += l2_weight * model.parameters()[i];
    }
  }
  return out;
}

CnnModel train(std::span<const linalg::Matrix> images, std::span<const int> labels,
               const CnnArchitecture& arch, const TrainConfig& cfg) {
  cfg.validate();
  contract(images.size() == labels.size(), "cnn: image and label counts differ");
  if (images.empty()) throw Error(ErrorCode::empty_dataset, "cnn: no training images");
  check_labels(labels, arch.classes);
  if (std::set<int>(labels.begin(), labels.end()).size() < 2)
    throw Error(ErrorCode::degenerate_labels, "cnn: training data contains a single class");

  CnnModel model = CnnModel::initialized(arch, cfg.seed);
  model.train_config = cfg;
  std::vector<double> velocity(model.parameters().size(), 0.0);

  const std::size_t n = images.size();
  std::vector<std::size_t> order(n);
  std::vector<linalg::Matrix> batch_images;
  std::vector<int> batch_labels;
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = cfg.learning_rate_at(epoch);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(mix_seed(cfg.seed, 0x65706f6368ULL + epoch));
    shuffle(std::span<std::size_t>(order), rng);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += cfg.minibatch_size) {
      const std::size_t len = std::min(cfg.minibatch_size, n - start);
      batch_images.clear();
      batch_labels.clear();
      for (std::size_t i = start; i < start + len; ++i) {
        batch_images.push_back(images[order[i]]);
        batch_labels.push_back(labels[order[i]]);
      }
      const LossAndGradient lg = loss_and_gradient(model, batch_images, batch_labels, cfg.l2_weight);
      if (!std::isfinite(lg.total_loss)) throw DivergenceError(epoch, "non-finite training loss");
      loss_sum += lg.data_loss * static_cast<double>(len);
      correct += lg.correct;

      auto params = model.parameters();
      for (std::size_t i = 0; i < params.size(); ++i) {
        velocity[i] = cfg.momentum * velocity[i] - lr * lg.gradient[i];
        params[i] += velocity[i];
      }
    }
    model.history.push_back(
        {loss_sum / static_cast<double>(n), static_cast<double>(correct) / static_cast<double>(n)});
  }
  for (double v : model.parameters())
    if (!std::isfinite(v)) throw DivergenceError(cfg.max_epochs, "non-finite parameters");
  model.trained = true;
  return model;
}

CnnModel train(std::span<const DomainImage> images, const CnnArchitecture& arch,
               const TrainConfig& cfg) {
  std::vector<linalg::Matrix> pixels;
  std::vector<int> labels;
  pixels.reserve(images.size());
  labels.reserve(images.size());
  for (const auto& img : images) {
    pixels.push_back(img.pixels);
    labels.push_back(img.meta.label);
  }
  return train(pixels, labels, arch, cfg);
}

GradientCheckResult gradient_check(const CnnModel& model, std::span<const linalg::Matrix> batch,
                                   std::span<const int> labels, double l2_weight,
                                   std::size_t sample_count, std::uint64_t seed, double h,
                                   std::string_view only_block) {
  const LossAndGradient analytic = loss_and_gradient(model, batch, labels, l2_weight);

  std::size_t lo = 0;
  std::size_t hi = model.parameters().size();
  if (!only_block.empty()) {
    const ParamBlock& b = model.block(only_block);
    lo = b.offset;
    hi = b.offset + b.rows * b.cols;
  }
  std::vector<std::size_t> indices(hi - lo);
  std::iota(indices.begin(), indices.end(), lo);
  if (sample_count > 0 && sample_count < indices.size()) {
    Rng rng(mix_seed(seed, 0x67726164ULL));
    shuffle(std::span<std::size_t>(indices), rng);
    indices.resize(sample_count);
    std::sort(indices.begin(), indices.end());
  }

  CnnModel probe = model;
  GradientCheckResult out;
  for (std::size_t idx : indices) {
    double& p = probe.parameters()[idx];
    const double saved = p;
    p = saved + h;
    const double up = total_loss(probe, batch, labels, l2_weight);
    p = saved - h;
    const double down = total_loss(probe, batch, labels, l2_weight);
    p = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic.gradient[idx];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-10});
    const double rel = std::abs(a - numeric) / denom;
    if (rel > out.max_relative_error) {
      out.max_relative_error = rel;
      out.worst_index = idx;
    }
    ++out.checked;
  }
  return out;
}

linalg::Matrix extract_features(const CnnModel& model, std::span<const linalg::Matrix> images) {
  return forward(model, images).fc_activations;
}

FeatureMatrix extract_features(const CnnModel& model, std::span<const DomainImage> images) {
  contract(model.trained, "cnn: feature extraction needs a trained model");
  std::vector<linalg::Matrix> pixels;
  FeatureMatrix out;
  pixels.reserve(images.size());
  for (const auto& img : images) {
    pixels.push_back(img.pixels);
    out.sample_ids.push_back(sample_id(img.meta));
  }
  if (!images.empty()) out.domain = images.front().domain;
  out.values = extract_features(model, pixels);
  out.validate();
  return out;
}

void save_model(const CnnModel& model, const std::filesystem::path& path) {
  json meta;
  meta["architecture"] = arch_to_json(model.architecture());
  meta["class_names"] = model.class_names;
  const TrainConfig& c = model.train_config;
  meta["train_config"] = {{"momentum", c.momentum},
                          {"initial_learning_rate", c.initial_learning_rate},
                          {"lr_drop_factor", c.lr_drop_factor},
                          {"lr_drop_period", c.lr_drop_period},
                          {"l2_weight", c.l2_weight},
                          {"max_epochs", c.max_epochs},
                          {"minibatch_size", c.minibatch_size},
                          {"seed", c.seed}};
  meta["trained"] = model.trained;
  json history = json::array();
  for (const auto& e : model.history) history.push_back({{"loss", e.loss}, {"accuracy", e.accuracy}});
  meta["history"] = history;

  std::vector<TensorBlock> blocks;
  for (const auto& b : model.blocks()) {
    auto values = model.parameters().subspan(b.offset, b.rows * b.cols);
    blocks.push_back({b.name, {b.rows, b.cols}, {values.begin(), values.end()}});
  }
  write_container(path, kCnnMagic, meta.dump(), blocks);
}

CnnModel load_model(const std::filesystem::path& path) {
  const ContainerContents contents = read_container(path, kCnnMagic);
  try {
    const json meta = json::parse(contents.meta_json);
    CnnModel model(arch_from_json(meta.at("architecture")));
    model.class_names = meta.value("class_names", std::vector<std::string>{});
    if (meta.contains("train_config")) {
      const json& c = meta["train_config"];
      TrainConfig& t = model.train_config;
      t.momentum = c.at("momentum");
      t.initial_learning_rate = c.at("initial_learning_rate");
      t.lr_drop_factor = c.at("lr_drop_factor");
      t.lr_drop_period = c.at("lr_drop_period");
      t.l2_weight = c.at("l2_weight");
      t.max_epochs = c.at("max_epochs");
      t.minibatch_size = c.at("minibatch_size");
      t.seed = c.at("seed");
    }
    model.trained = meta.value("trained", false);
    for (const auto& e : meta.value("history", json::array()))
      model.history.push_back({e.at("loss"), e.at("accuracy")});
    for (const auto& b : model.blocks()) {
      const TensorBlock& tb = contents.block(b.name);
      if (tb.shape != std::vector<std::size_t>{b.rows, b.cols})
        throw Error(ErrorCode::deserialization, path.string() + ": block '" + b.name +
                                                    "' has the wrong shape");
      std::copy(tb.values.begin(), tb.values.end(), model.parameters().begin() +
                                                         static_cast<std::ptrdiff_t>(b.offset));
    }
    return model;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::deserialization, path.string() + ": " + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::deserialization) throw;
    throw Error(ErrorCode::deserialization, path.string() + ": " + e.what());
  }
}

std::uint64_t parameter_hash(const CnnModel& model) {
  Fnv1a h;
  h.update(model.parameters());
  return h.digest();
}

}  // namespace harfuse
