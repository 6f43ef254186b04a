#include "harfuse/cca.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <json.hpp>

#include "harfuse/container.hpp"
#include "harfuse/errors.hpp"
#include "harfuse/rng.hpp"

namespace harfuse {

namespace {

using linalg::Matrix;

Matrix leading_columns(const Matrix& m, std::size_t d) {
  Matrix out(m.rows(), d);
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < d; ++c) out(r, c) = m(r, c);
  return out;
}

FusedFeatures fuse_pair(const CcaModel& model, const Matrix& x, const Matrix& y,
                        FusionStage stage, const std::vector<std::uint64_t>& ids) {
  const CanonicalVariates v = transform(model, x, y);
  return {fuse_sum(v.x, v.y), stage, ids};
}

}  // namespace

CcaModel fit_cca(const Matrix& x, const Matrix& y, double ridge_scale) {
  if (x.rows() != y.rows())
    throw Error(ErrorCode::alignment, "cca: sample counts differ (" + std::to_string(x.rows()) +
                                          " vs " + std::to_string(y.rows()) + ")");
  const std::size_t n = x.rows();
  if (n < 3)
    throw Error(ErrorCode::insufficient_samples, "cca needs at least 3 samples, got " + std::to_string(n));
  if (x.cols() == 0 || y.cols() == 0) throw Error(ErrorCode::contract, "cca: empty feature set");
  if (!(ridge_scale >= 0.0)) throw Error(ErrorCode::contract, "cca: ridge scale must be non-negative");
  if (!x.all_finite() || !y.all_finite()) throw Error(ErrorCode::contract, "cca: non-finite features");

  const std::size_t p = x.cols();
  const std::size_t q = y.cols();
  CcaModel model;
  model.ridge_scale = ridge_scale;
  model.mean_x = linalg::column_means(x);
  model.mean_y = linalg::column_means(y);
  const Matrix xc = linalg::center_columns(x, model.mean_x);
  const Matrix yc = linalg::center_columns(y, model.mean_y);

  const Matrix sxx = linalg::covariance(xc, false);
  const Matrix syy = linalg::covariance(yc, false);
  const Matrix sxy = linalg::cross_covariance(xc, yc, false);
  model.ridge_x = ridge_scale * linalg::trace(sxx) / static_cast<double>(p);
  model.ridge_y = ridge_scale * linalg::trace(syy) / static_cast<double>(q);
  const Matrix lx = linalg::cholesky(sxx, model.ridge_x);
  const Matrix ly = linalg::cholesky(syy, model.ridge_y);

  // K = Lx⁻¹ Σxy Ly⁻ᵀ
  const Matrix t = linalg::solve_lower(lx, sxy);
  const Matrix k = linalg::solve_lower(ly, t.transpose()).transpose();
  const linalg::ThinSvd svd = linalg::thin_svd(k);

  const std::size_t cap = std::min({p, q, n - 1});
  std::size_t d = 0;
  while (d < svd.s.size() && d < cap && svd.s[d] > 1e-10) ++d;

  model.a = leading_columns(linalg::solve_lower_transposed(lx, svd.u), d);
  model.b = leading_columns(linalg::solve_lower_transposed(ly, svd.v), d);
  model.lambdas.assign(svd.s.begin(), svd.s.begin() + static_cast<std::ptrdiff_t>(d));

  for (std::size_t c = 0; c < d; ++c) {
    std::size_t arg = 0;
    for (std::size_t r = 1; r < p; ++r)
      if (std::abs(model.a(r, c)) > std::abs(model.a(arg, c))) arg = r;
    if (model.a(arg, c) < 0.0) {
      for (std::size_t r = 0; r < p; ++r) model.a(r, c) = -model.a(r, c);
      for (std::size_t r = 0; r < q; ++r) model.b(r, c) = -model.b(r, c);
    }
  }
  return model;
}

CcaModel fit_cca(const FeatureMatrix& x, const FeatureMatrix& y, double ridge_scale) {
  require_aligned(x, y);
  return fit_cca(x.values, y.values, ridge_scale);
}

CanonicalVariates transform(const CcaModel& model, const Matrix& x, const Matrix& y) {
  if (x.cols() != model.p() || y.cols() != model.q()) {
    throw Error(ErrorCode::contract, "cca transform: expected " + std::to_string(model.p()) + " and " +
                                         std::to_string(model.q()) + " columns, got " +
                                         std::to_string(x.cols()) + " and " + std::to_string(y.cols()));
  }
  return {linalg::center_columns(x, model.mean_x) * model.a,
          linalg::center_columns(y, model.mean_y) * model.b};
}

Matrix fuse_sum(const Matrix& x_variates, const Matrix& y_variates) {
  if (x_variates.rows() != y_variates.rows() || x_variates.cols() != y_variates.cols())
    throw Error(ErrorCode::contract, "fuse_sum: variate shapes differ");
  return x_variates + y_variates;
}

void validate_stage_order(const StageOrder& order) {
  std::array<int, kDomainCount> seen{};
  for (Domain d : order) ++seen[static_cast<std::size_t>(d)];
  for (int s : seen)
    if (s != 1) throw Error(ErrorCode::config, "fusion stage order must use each domain exactly once");
}

FusedFeatures TwoStageFusion::apply(const std::array<const FeatureMatrix*, kDomainCount>& features) const {
  validate_stage_order(order);
  const FeatureMatrix& first = *features[static_cast<std::size_t>(order[0])];
  const FeatureMatrix& second = *features[static_cast<std::size_t>(order[1])];
  const FeatureMatrix& third = *features[static_cast<std::size_t>(order[2])];
  require_aligned(first, second);
  require_aligned(first, third);
  const FusedFeatures z1 = fuse_pair(stage1, first.values, second.values, FusionStage::stage1, first.sample_ids);
  return fuse_pair(stage2, z1.values, third.values, FusionStage::stage2, first.sample_ids);
}

TwoStageResult two_stage_fuse(const FeatureMatrix& spatial, const FeatureMatrix& frequency,
                              const FeatureMatrix& time_spectrum, double ridge_scale,
                              const StageOrder& order) {
  validate_stage_order(order);
  const std::array<const FeatureMatrix*, kDomainCount> by_domain = {&spatial, &frequency, &time_spectrum};
  const FeatureMatrix& first = *by_domain[static_cast<std::size_t>(order[0])];
  const FeatureMatrix& second = *by_domain[static_cast<std::size_t>(order[1])];
  const FeatureMatrix& third = *by_domain[static_cast<std::size_t>(order[2])];
  require_aligned(first, second);
  require_aligned(first, third);

  TwoStageResult out;
  out.models.order = order;
  out.models.stage1 = fit_cca(first.values, second.values, ridge_scale);
  out.stage1 = fuse_pair(out.models.stage1, first.values, second.values, FusionStage::stage1,
                         first.sample_ids);
  out.models.stage2 = fit_cca(out.stage1.values, third.values, ridge_scale);
  out.fused = fuse_pair(out.models.stage2, out.stage1.values, third.values, FusionStage::stage2,
                        first.sample_ids);
  return out;
}

void save_cca(const CcaModel& model, const std::filesystem::path& path) {
  const nlohmann::json meta = {{"ridge_scale", model.ridge_scale},
                               {"ridge_x", model.ridge_x},
                               {"ridge_y", model.ridge_y}};
  write_container(path, kCcaMagic, meta.dump(),
                  {matrix_block("A", model.a),
                   matrix_block("B", model.b),
                   {"lambdas", {model.lambdas.size()}, model.lambdas},
                   {"mean_x", {model.mean_x.size()}, model.mean_x},
                   {"mean_y", {model.mean_y.size()}, model.mean_y}});
}

CcaModel load_cca(const std::filesystem::path& path) {
  const ContainerContents c = read_container(path, kCcaMagic);
  CcaModel model;
  try {
    const auto meta = nlohmann::json::parse(c.meta_json);
    model.ridge_scale = meta.at("ridge_scale");
    model.ridge_x = meta.at("ridge_x");
    model.ridge_y = meta.at("ridge_y");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::deserialization, path.string() + ": " + e.what());
  }
  model.a = block_matrix(c.block("A"));
  model.b = block_matrix(c.block("B"));
  model.lambdas = c.block("lambdas").values;
  model.mean_x = c.block("mean_x").values;
  model.mean_y = c.block("mean_y").values;
  if (model.a.cols() != model.d() || model.b.cols() != model.d() ||
      model.mean_x.size() != model.p() || model.mean_y.size() != model.q())
    throw Error(ErrorCode::deserialization, path.string() + ": inconsistent CCA block shapes");
  return model;
}

std::uint64_t parameter_hash(const CcaModel& model) {
  Fnv1a h;
  h.update(model.a.values());
  h.update(model.b.values());
  h.update(model.lambdas);
  h.update(model.mean_x);
  h.update(model.mean_y);
  return h.digest();
}

}  // namespace harfuse
