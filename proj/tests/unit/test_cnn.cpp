#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "harfuse/cnn.hpp"
#include "harfuse/errors.hpp"
#include "support.hpp"

using namespace harfuse;
using harfuse::testing::random_matrix;
using harfuse::testing::TempDir;
using linalg::Matrix;

namespace {

// 12×16 input → conv 3×3 (4) → 10×14 → pool → 5×7 → conv 2×2 (6) → 4×6 → pool → 2×3 (36) → fc 10.
CnnArchitecture small_arch(std::size_t classes = 3) {
  CnnArchitecture a;
  a.input_rows = 12;
  a.input_cols = 16;
  a.conv1_filters = 4;
  a.conv1_kernel = 3;
  a.conv2_filters = 6;
  a.conv2_kernel = 2;
  a.fc_units = 10;
  a.classes = classes;
  return a;
}

std::vector<Matrix> random_batch(std::size_t n, const CnnArchitecture& a, Rng& rng) {
  std::vector<Matrix> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_matrix(a.input_rows, a.input_cols, rng, 0, 1));
  return out;
}

std::span<const double> param(const CnnModel& m, const char* name) {
  const ParamBlock& b = m.block(name);
  return m.parameters().subspan(b.offset, b.rows * b.cols);
}

// Direct nested-loop evaluation of the network for one image.
std::vector<double> oracle_scores(const CnnModel& m, const Matrix& img, std::vector<double>* fc_out = nullptr) {
  const CnnArchitecture& a = m.architecture();
  const CnnShapes& s = m.shapes();
  auto w1 = param(m, "conv1.weight"), b1 = param(m, "conv1.bias");
  auto w2 = param(m, "conv2.weight"), b2 = param(m, "conv2.bias");
  auto wf = param(m, "fc.weight"), bf = param(m, "fc.bias");
  auto wc = param(m, "classifier.weight"), bc = param(m, "classifier.bias");
  const std::size_t f1 = a.conv1_filters, f2 = a.conv2_filters, k1 = a.conv1_kernel, k2 = a.conv2_kernel;

  std::vector<double> c1(s.conv1_rows * s.conv1_cols * f1);
  for (std::size_t y = 0; y < s.conv1_rows; ++y)
    for (std::size_t x = 0; x < s.conv1_cols; ++x)
      for (std::size_t f = 0; f < f1; ++f) {
        double acc = b1[f];
        for (std::size_t ky = 0; ky < k1; ++ky)
          for (std::size_t kx = 0; kx < k1; ++kx) acc += img(y + ky, x + kx) * w1[(ky * k1 + kx) * f1 + f];
        c1[(y * s.conv1_cols + x) * f1 + f] = std::max(0.0, acc);
      }
  auto pool = [&](const std::vector<double>& in, std::size_t cols, std::size_t prow, std::size_t pcol,
                  std::size_t ch) {
    std::vector<double> out(prow * pcol * ch);
    for (std::size_t y = 0; y < prow; ++y)
      for (std::size_t x = 0; x < pcol; ++x)
        for (std::size_t c = 0; c < ch; ++c) {
          double best = -1e300;
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx)
              best = std::max(best, in[((2 * y + dy) * cols + 2 * x + dx) * ch + c]);
          out[(y * pcol + x) * ch + c] = best;
        }
    return out;
  };
  const auto p1 = pool(c1, s.conv1_cols, s.pool1_rows, s.pool1_cols, f1);
  std::vector<double> c2(s.conv2_rows * s.conv2_cols * f2);
  for (std::size_t y = 0; y < s.conv2_rows; ++y)
    for (std::size_t x = 0; x < s.conv2_cols; ++x)
      for (std::size_t f = 0; f < f2; ++f) {
        double acc = b2[f];
        for (std::size_t ky = 0; ky < k2; ++ky)
          for (std::size_t kx = 0; kx < k2; ++kx)
            for (std::size_t c = 0; c < f1; ++c)
              acc += p1[((y + ky) * s.pool1_cols + x + kx) * f1 + c] * w2[((ky * k2 + kx) * f1 + c) * f2 + f];
        c2[(y * s.conv2_cols + x) * f2 + f] = std::max(0.0, acc);
      }
  const auto p2 = pool(c2, s.conv2_cols, s.pool2_rows, s.pool2_cols, f2);
  std::vector<double> fc(a.fc_units);
  for (std::size_t u = 0; u < a.fc_units; ++u) {
    double acc = bf[u];
    for (std::size_t i = 0; i < s.flatten; ++i) acc += p2[i] * wf[i * a.fc_units + u];
    fc[u] = std::max(0.0, acc);
  }
  if (fc_out) *fc_out = fc;
  std::vector<double> scores(a.classes);
  for (std::size_t k = 0; k < a.classes; ++k) {
    double acc = bc[k];
    for (std::size_t u = 0; u < a.fc_units; ++u) acc += fc[u] * wc[u * a.classes + k];
    scores[k] = acc;
  }
  return scores;
}

}  // namespace

TEST_CASE("default architecture shape chain") {
  const CnnShapes s = CnnArchitecture{}.shapes();
  CHECK(s.conv1_rows == 20);
  CHECK(s.conv1_cols == 48);
  CHECK(s.pool1_rows == 10);
  CHECK(s.pool1_cols == 24);
  CHECK(s.conv2_rows == 6);
  CHECK(s.conv2_cols == 20);
  CHECK(s.pool2_rows == 3);
  CHECK(s.pool2_cols == 10);
  CHECK(s.flatten == 3000);

  const CnnModel m(CnnArchitecture{});
  CHECK(m.block("conv1.weight").rows == 25);
  CHECK(m.block("conv1.weight").cols == 50);
  CHECK(m.block("conv2.weight").rows == 1250);
  CHECK(m.block("fc.weight").rows == 3000);
  CHECK(m.block("fc.weight").cols == 256);
  CHECK_FALSE(m.block("fc.bias").regularized);
}

TEST_CASE("architectures that do not tile are rejected") {
  CnnArchitecture a;
  a.input_cols = 53;
  CHECK_THROWS_AS((void)a.shapes(), Error);
  a = {};
  a.conv2_kernel = 4;
  CHECK_THROWS_AS((void)a.shapes(), Error);
  a = {};
  a.classes = 1;
  CHECK_THROWS_AS((void)a.shapes(), Error);
}

TEST_CASE("train config defaults and schedule") {
  const TrainConfig t;
  CHECK(t.momentum == 0.9);
  CHECK(t.initial_learning_rate == 0.001);
  CHECK(t.lr_drop_factor == 0.5);
  CHECK(t.lr_drop_period == 10);
  CHECK(t.l2_weight == 0.004);
  CHECK(t.max_epochs == 70);
  CHECK(t.minibatch_size == 64);
  CHECK(t.learning_rate_at(0) == 0.001);
  CHECK(t.learning_rate_at(9) == 0.001);
  CHECK(t.learning_rate_at(10) == 0.0005);
  CHECK(std::abs(t.learning_rate_at(25) - 0.00025) <= 1e-18);
  CHECK(std::abs(t.learning_rate_at(69) - 0.001 / 64) <= 1e-18);
}

TEST_CASE("zero-weight model scores equal the classifier biases") {
  const CnnArchitecture a = small_arch();
  CnnModel m(a);
  const ParamBlock& bc = m.block("classifier.bias");
  m.parameters()[bc.offset + 0] = 0.5;
  m.parameters()[bc.offset + 1] = -1.0;
  m.parameters()[bc.offset + 2] = 2.0;
  Rng rng(1);
  const auto r = forward(m, random_batch(3, a, rng));
  REQUIRE(r.scores.rows() == 3);
  REQUIRE(r.scores.cols() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(r.scores(i, 0) == 0.5);
    CHECK(r.scores(i, 1) == -1.0);
    CHECK(r.scores(i, 2) == 2.0);
  }
}

TEST_CASE("forward matches the nested-loop oracle") {
  Rng rng(2);
  for (const CnnArchitecture& a : {small_arch(), CnnArchitecture{}}) {
    const CnnModel m = CnnModel::initialized(a, 5);
    const auto batch = random_batch(2, a, rng);
    const auto r = forward(m, batch);
    for (std::size_t i = 0; i < batch.size(); ++i) {
      std::vector<double> fc;
      const auto expected = oracle_scores(m, batch[i], &fc);
      for (std::size_t k = 0; k < a.classes; ++k) CHECK(std::abs(r.scores(i, k) - expected[k]) <= 1e-10);
      for (std::size_t u = 0; u < a.fc_units; ++u) {
        CHECK(std::abs(r.fc_activations(i, u) - fc[u]) <= 1e-10);
        CHECK(r.fc_activations(i, u) >= 0.0);
      }
    }
  }
}

TEST_CASE("forward rejects mis-shaped images") {
  const CnnModel m = CnnModel::initialized(small_arch(), 1);
  const std::vector<Matrix> bad = {Matrix(12, 15)};
  CHECK_THROWS_AS((void)forward(m, bad), Error);
}

TEST_CASE("gradient check on a small network, every parameter") {
  Rng rng(3);
  const CnnArchitecture a = small_arch();
  const CnnModel m = CnnModel::initialized(a, 9);
  const auto batch = random_batch(3, a, rng);
  const std::vector<int> labels = {0, 2, 1};
  const auto g = gradient_check(m, batch, labels, 0.004, 0, 1);
  CHECK(g.checked == m.parameters().size());
  CHECK(g.max_relative_error < 1e-4);
}

TEST_CASE("bias gradients on a zero input batch") {
  const CnnArchitecture a = small_arch();
  const CnnModel m = CnnModel::initialized(a, 4);
  const std::vector<Matrix> batch(2, Matrix(a.input_rows, a.input_cols));
  const std::vector<int> labels = {1, 2};
  for (const char* name : {"conv1.bias", "conv2.bias", "fc.bias", "classifier.bias"}) {
    const auto g = gradient_check(m, batch, labels, 0.004, 0, 2, 1e-5, name);
    CHECK(g.checked == m.block(name).rows * m.block(name).cols);
    CHECK(g.max_relative_error < 1e-6);
  }
}

TEST_CASE("gradient check still holds after a few training steps") {
  Rng rng(5);
  const CnnArchitecture a = small_arch(2);
  const auto batch = random_batch(4, a, rng);
  const std::vector<int> labels = {0, 1, 0, 1};
  TrainConfig cfg;
  cfg.max_epochs = 5;
  cfg.minibatch_size = 4;
  cfg.initial_learning_rate = 0.01;
  const CnnModel m = train(batch, labels, a, cfg);
  CHECK(m.history.size() == 5);
  CHECK(gradient_check(m, batch, labels, 0.004, 0, 3).max_relative_error < 1e-4);
}

TEST_CASE("L2 term decays weights when the data gradient vanishes") {
  const CnnArchitecture a = small_arch();
  CnnModel m = CnnModel::initialized(a, 6);
  // Dead network: every fc unit has a large negative bias, so no data gradient reaches
  // conv1/conv2/fc weights.
  const ParamBlock& bf = m.block("fc.bias");
  for (std::size_t i = 0; i < bf.cols; ++i) m.parameters()[bf.offset + i] = -1e6;
  Rng rng(6);
  const auto batch = random_batch(2, a, rng);
  const std::vector<int> labels = {0, 1};
  const ParamBlock& w1 = m.block("conv1.weight");

  const auto g0 = loss_and_gradient(m, batch, labels, 0.0);
  for (std::size_t i = 0; i < w1.rows * w1.cols; ++i) CHECK(g0.gradient[w1.offset + i] == 0.0);
  const auto g = loss_and_gradient(m, batch, labels, 0.004);
  for (std::size_t i = 0; i < w1.rows * w1.cols; ++i) {
    const double w = m.parameters()[w1.offset + i];
    CHECK(g.gradient[w1.offset + i] == doctest::Approx(0.004 * w).epsilon(1e-12));
    // one plain SGD step strictly shrinks |w|
    if (w != 0.0) CHECK(std::abs(w - 0.01 * g.gradient[w1.offset + i]) < std::abs(w));
  }
  CHECK(g.total_loss > g.data_loss);
}

TEST_CASE("training is deterministic and tracks history") {
  Rng rng(7);
  const CnnArchitecture a = small_arch(2);
  std::vector<Matrix> images = random_batch(20, a, rng);
  std::vector<int> labels;
  for (std::size_t i = 0; i < images.size(); ++i) {
    labels.push_back(static_cast<int>(i % 2));
    if (i % 2) images[i] = 0.3 * images[i];
  }
  TrainConfig cfg;
  cfg.max_epochs = 12;
  cfg.minibatch_size = 6;  // last partial batch of 2 is used
  cfg.initial_learning_rate = 0.02;
  const CnnModel a1 = train(images, labels, a, cfg);
  const CnnModel a2 = train(images, labels, a, cfg);
  CHECK(parameter_hash(a1) == parameter_hash(a2));
  CHECK(std::equal(a1.parameters().begin(), a1.parameters().end(), a2.parameters().begin()));
  REQUIRE(a1.history.size() == 12);
  CHECK(a1.history.back().loss < a1.history.front().loss);
  for (std::size_t e = 1; e < a1.history.size(); ++e) CHECK(a1.history[e].loss <= 1.05 * a1.history[e - 1].loss);
  CHECK(a1.trained);
  for (double p : a1.parameters()) CHECK(std::isfinite(p));

  cfg.seed = 1;
  CHECK(parameter_hash(train(images, labels, a, cfg)) != parameter_hash(a1));
}

TEST_CASE("training errors") {
  Rng rng(8);
  const CnnArchitecture a = small_arch(2);
  const auto images = random_batch(4, a, rng);
  const std::vector<int> same = {1, 1, 1, 1};
  try {
    (void)train(images, same, a, TrainConfig{});
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::degenerate_labels);
  }

  const std::vector<int> labels = {0, 1, 0, 1};
  TrainConfig wild;
  wild.initial_learning_rate = 1e200;
  wild.max_epochs = 5;
  try {
    (void)train(images, labels, a, wild);
    FAIL("expected an error");
  } catch (const DivergenceError& e) {
    CHECK(e.code() == ErrorCode::divergence);
  }
}

TEST_CASE("features equal forward's fc activations") {
  Rng rng(9);
  const CnnArchitecture a = small_arch();
  const CnnModel m = CnnModel::initialized(a, 2);
  auto batch = random_batch(3, a, rng);
  batch.push_back(batch[1]);
  const Matrix f = extract_features(m, batch);
  CHECK(f == forward(m, batch).fc_activations);
  REQUIRE(f.rows() == 4);
  CHECK(f.cols() == a.fc_units);
  for (std::size_t u = 0; u < a.fc_units; ++u) CHECK(f(1, u) == f(3, u));
}

TEST_CASE("domain-image feature extraction requires a trained model") {
  const CnnModel m = CnnModel::initialized(CnnArchitecture{}, 1);
  std::vector<DomainImage> images(1);
  images[0].pixels = Matrix(24, 52, 0.5);
  CHECK_THROWS_AS((void)extract_features(m, images), Error);
}

TEST_CASE("model save/load round trip") {
  TempDir dir("cnn");
  Rng rng(10);
  const CnnArchitecture a = small_arch();
  CnnModel m = CnnModel::initialized(a, 3);
  m.class_names = {"a", "b", "c"};
  m.history = {{1.5, 0.25}, {0.5, 0.75}};
  m.trained = true;
  save_model(m, dir.path() / "m.hfcnn");
  const CnnModel back = load_model(dir.path() / "m.hfcnn");
  CHECK(back.architecture() == a);
  CHECK(back.class_names == m.class_names);
  CHECK(back.trained);
  REQUIRE(back.history.size() == 2);
  CHECK(back.history[1].accuracy == 0.75);
  const auto probe = random_batch(3, a, rng);
  CHECK(forward(back, probe).scores == forward(m, probe).scores);
  CHECK(parameter_hash(back) == parameter_hash(m));

  {
    std::fstream f(dir.path() / "m.hfcnn", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXXXX", 6);
  }
  try {
    (void)load_model(dir.path() / "m.hfcnn");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::deserialization);
  }
}
