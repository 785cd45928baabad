#pragma once

#include <Eigen/Core>
#include <optional>
#include <utility>

#include "redpca/model.hpp"

namespace redpca {

enum class LossKind { Operator, Frobenius };
enum class Provenance { Debiased, DebiasedShrunk, AltLinearSystem };
enum class SpikeLimit { Eigenvalue, CosSq };

struct ShrinkageRule {
  LossKind loss = LossKind::Frobenius;
  NoiseModel noise_model = NoiseModel::ReducedNoise;
  // Bulk collapse margin epsilon; defaults to 0.05 * bulk_edge when unset.
  std::optional<double> bulk_margin;
};

struct CovEstimate {
  Eigen::MatrixXd sigma_hat;     // p x p symmetric
  Eigen::VectorXd eigenvalues;   // descending (empty when spectrum skipped)
  Eigen::MatrixXd eigenvectors;  // orthonormal columns, aligned with eigenvalues
  Provenance provenance = Provenance::Debiased;
  bool moments_estimated = false;   // reduction moments estimated from D rather than supplied
  long zero_overlap_count = 0;      // AltLinearSystem only: entries with no design overlap
};

// (1/n) Y^T Y.
Eigen::MatrixXd sample_covariance(const DataSet& data);

// Debiased signal-covariance estimator:
//   ReducedNoise:   (1/mu^2) S_Y - (sigma2/(m*mu^2)) diag(S_Y) - I
//   UnreducedNoise: (1/mu^2) S_Y - (sigma2/(m*mu^2)) diag(S_Y) - (1/m) I
// Requires mu != 0. with_spectrum=false skips the eigen-decomposition.
CovEstimate debias(const Eigen::MatrixXd& sigma_y, const ReducedModelConfig& config,
                   bool with_spectrum = true);

// Bulk support edge of the debiased estimator's spectrum: ((1+sqrt(gamma))^2 - 1)
// over delta (ReducedNoise) or mu^2 (UnreducedNoise).
double debiased_bulk_edge(const ReducedModelConfig& config, NoiseModel noise_model);

// Almost-sure limit of the debiased estimator's top eigenvalue or of the
// squared cosine with the population PC, for a single spike ell.
double limit_spike(double ell, const ReducedModelConfig& config, SpikeLimit which);

// Pointwise optimal shrinker applied to one debiased eigenvalue: 0 at or
// below bulk_edge + epsilon, else ell_tilde-based operator/Frobenius value.
double shrinker_value(double lambda, const ShrinkageRule& rule, const ReducedModelConfig& config);

// Apply the optimal shrinker to a Debiased estimate (provenance-checked);
// reconstructs sigma_hat from the shrunken spectrum.
CovEstimate shrink_eigenvalues(const CovEstimate& estimate, const ShrinkageRule& rule,
                               const ReducedModelConfig& config);

// Asymptotic loss of the optimally shrunk estimator:
//   Operator:  ell_1 * sqrt(1 - c_1^2)
//   Frobenius: sum_k (1 - c_k^4) * ell_k^2
double asymptotic_loss(const ShrinkageRule& rule, const ReducedModelConfig& config);

// Alternative estimator solving (1/n) sum_k D_k Sigma D_k = RHS entrywise:
// Sigma'_ij = RHS_ij / M_ij with M = (1/n) D^T D. Entries with M_ij = 0 are
// flagged and set to zero (zero_overlap_count).
CovEstimate alt_estimator(const DataSet& data, const ReducedModelConfig& config,
                          bool with_spectrum = true);

// ||A - B||_F / ||A||_F on the sigma_hat matrices.
double relative_difference(const CovEstimate& a, const CovEstimate& b);

// Sample mean and (population) variance of all reduction entries.
std::pair<double, double> estimate_reduction_moments(const Eigen::MatrixXd& d);

}  // namespace redpca
