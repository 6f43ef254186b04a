#pragma once

// Canonical correlation analysis between two feature sets and summation
// fusion of the canonical variates, applied in two stages over the three
// domain feature sets.
//
// Features are stored samples-as-rows (n×p), so the transformation matrices
// act on the right: X′ = (X − x̄)·A.

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "harfuse/features.hpp"
#include "harfuse/linalg.hpp"

namespace harfuse {

inline constexpr double kDefaultCcaRidge = 1e-4;

struct CcaModel {
  linalg::Matrix a;             // p×d
  linalg::Matrix b;             // q×d
  std::vector<double> lambdas;  // d canonical correlations, descending
  std::vector<double> mean_x;   // p
  std::vector<double> mean_y;   // q
  double ridge_scale = 0.0;
  double ridge_x = 0.0;  // ε added to Σxx
  double ridge_y = 0.0;  // ε added to Σyy

  std::size_t p() const noexcept { return a.rows(); }
  std::size_t q() const noexcept { return b.rows(); }
  std::size_t d() const noexcept { return lambdas.size(); }
};

/// Whitened CCA: with Σxx + εx·I = Lx·Lxᵀ and Σyy + εy·I = Ly·Lyᵀ
/// (ε = ridge_scale · trace(Σ)/dim), the SVD Lx⁻¹·Σxy·Ly⁻ᵀ = U·S·Vᵀ gives
/// A = Lx⁻ᵀ·U, B = Ly⁻ᵀ·V and canonical correlations S. Directions with
/// S ≤ 1e−10 are dropped, and d never exceeds min(p, q, n − 1). Each column of
/// A is signed so its largest-magnitude entry is positive; B follows.
CcaModel fit_cca(const linalg::Matrix& x, const linalg::Matrix& y, double ridge_scale = kDefaultCcaRidge);

/// As above; throws an alignment error unless both list the same samples.
CcaModel fit_cca(const FeatureMatrix& x, const FeatureMatrix& y, double ridge_scale = kDefaultCcaRidge);

struct CanonicalVariates {
  linalg::Matrix x;  // n×d
  linalg::Matrix y;  // n×d
};

CanonicalVariates transform(const CcaModel& model, const linalg::Matrix& x, const linalg::Matrix& y);

/// Elementwise X′ + Y′.
linalg::Matrix fuse_sum(const linalg::Matrix& x_variates, const linalg::Matrix& y_variates);

enum class FusionStage { stage1 = 1, stage2 = 2 };

struct FusedFeatures {
  linalg::Matrix values;
  FusionStage stage = FusionStage::stage1;
  std::vector<std::uint64_t> sample_ids;
};

/// Stage 1 fuses order[0] with order[1]; stage 2 fuses that result with order[2].
using StageOrder = std::array<Domain, kDomainCount>;
inline constexpr StageOrder kDefaultStageOrder = {Domain::spatial, Domain::frequency,
                                                  Domain::time_spectrum};

/// Throws a config error unless `order` is a permutation of the three domains.
void validate_stage_order(const StageOrder& order);

/// Fitted two-stage fusion, applicable to unseen samples.
struct TwoStageFusion {
  CcaModel stage1;
  CcaModel stage2;
  StageOrder order = kDefaultStageOrder;

  /// Inputs indexed by Domain: {spatial, frequency, time-spectrum}.
  FusedFeatures apply(const std::array<const FeatureMatrix*, kDomainCount>& features) const;
};

struct TwoStageResult {
  TwoStageFusion models;
  FusedFeatures stage1;
  FusedFeatures fused;  // stage 2 output
};

TwoStageResult two_stage_fuse(const FeatureMatrix& spatial, const FeatureMatrix& frequency,
                              const FeatureMatrix& time_spectrum,
                              double ridge_scale = kDefaultCcaRidge,
                              const StageOrder& order = kDefaultStageOrder);

void save_cca(const CcaModel& model, const std::filesystem::path& path);
CcaModel load_cca(const std::filesystem::path& path);

std::uint64_t parameter_hash(const CcaModel& model);

}  // namespace harfuse
