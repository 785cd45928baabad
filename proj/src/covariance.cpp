#include "redpca/covariance.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "redpca/errors.hpp"
#include "redpca/spike_maps.hpp"

namespace redpca {

namespace {

// Descending eigen-decomposition of a symmetric matrix.
void spectrum_desc(const Eigen::MatrixXd& sym, Eigen::VectorXd& values, Eigen::MatrixXd& vectors) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("eigen-decomposition failed");
  }
  values = es.eigenvalues().reverse();
  vectors = es.eigenvectors().rowwise().reverse();
}

double moment_scale(const ReducedModelConfig& config, NoiseModel noise_model) {
  return noise_model == NoiseModel::ReducedNoise ? config.delta() : config.mu() * config.mu();
}

void check_rule(const ShrinkageRule& rule, const ReducedModelConfig& config) {
  if (rule.noise_model != config.noise_model) {
    throw std::invalid_argument("shrinkage rule noise model disagrees with the config");
  }
  if (rule.bulk_margin && !(*rule.bulk_margin > 0.0)) {
    throw std::invalid_argument("bulk margin must be > 0");
  }
}

}  // namespace

Eigen::MatrixXd sample_covariance(const DataSet& data) {
  if (data.y.rows() == 0 || data.y.cols() == 0) {
    throw std::invalid_argument("sample covariance needs non-empty data");
  }
  const double n = static_cast<double>(data.y.rows());
  return data.y.transpose() * data.y / n;
}

CovEstimate debias(const Eigen::MatrixXd& sigma_y, const ReducedModelConfig& config,
                   bool with_spectrum) {
  if (sigma_y.rows() != sigma_y.cols()) {
    throw std::invalid_argument("debias needs a square covariance matrix");
  }
  const double mu = config.mu();
  if (mu == 0.0) {
    throw degenerate_reduction_error("debiasing is undefined for mu = 0");
  }
  const double m = config.m();
  const double mu2 = mu * mu;

  CovEstimate est;
  est.provenance = Provenance::Debiased;
  est.sigma_hat = sigma_y / mu2;
  est.sigma_hat.diagonal() -= (config.sigma2() / (m * mu2)) * sigma_y.diagonal();
  const double id_term = config.noise_model == NoiseModel::ReducedNoise ? 1.0 : 1.0 / m;
  est.sigma_hat.diagonal().array() -= id_term;
  // Exact symmetrization against accumulated round-off.
  est.sigma_hat = ((est.sigma_hat + est.sigma_hat.transpose()) / 2.0).eval();
  if (with_spectrum) {
    spectrum_desc(est.sigma_hat, est.eigenvalues, est.eigenvectors);
  }
  return est;
}

double debiased_bulk_edge(const ReducedModelConfig& config, NoiseModel noise_model) {
  return (standard_mp_edge(config.gamma) - 1.0) / moment_scale(config, noise_model);
}

double limit_spike(double ell, const ReducedModelConfig& config, SpikeLimit which) {
  if (!(ell > 0.0) || !std::isfinite(ell)) {
    throw std::invalid_argument("spike must be positive and finite");
  }
  const double gamma = config.gamma;
  const double scale = moment_scale(config, config.noise_model);
  const double eff = scale * ell;
  if (which == SpikeLimit::CosSq) return cos_forward(eff, gamma);
  if (eff <= std::sqrt(gamma)) return debiased_bulk_edge(config, config.noise_model);
  return ((eff + 1.0) * (1.0 + gamma / eff) - 1.0) / scale;
}

double shrinker_value(double lambda, const ShrinkageRule& rule, const ReducedModelConfig& config) {
  check_rule(rule, config);
  const double scale = moment_scale(config, rule.noise_model);
  const double edge = debiased_bulk_edge(config, rule.noise_model);
  const double margin = rule.bulk_margin.value_or(0.05 * edge);
  if (lambda <= edge + margin) return 0.0;
  const double ell = spike_inverse(scale * lambda + 1.0, config.gamma);
  if (rule.loss == LossKind::Operator) return ell / scale;
  return ell * cos_forward(ell, config.gamma) / scale;
}

CovEstimate shrink_eigenvalues(const CovEstimate& estimate, const ShrinkageRule& rule,
                               const ReducedModelConfig& config) {
  if (estimate.provenance != Provenance::Debiased) {
    throw std::invalid_argument("shrinkage expects a Debiased estimate");
  }
  if (estimate.eigenvalues.size() == 0) {
    throw std::invalid_argument("shrinkage needs the debiased spectrum");
  }
  check_rule(rule, config);
  CovEstimate out;
  out.provenance = Provenance::DebiasedShrunk;
  out.moments_estimated = estimate.moments_estimated;
  out.eigenvectors = estimate.eigenvectors;
  out.eigenvalues.resize(estimate.eigenvalues.size());
  for (Eigen::Index i = 0; i < estimate.eigenvalues.size(); ++i) {
    out.eigenvalues[i] = shrinker_value(estimate.eigenvalues[i], rule, config);
  }
  out.sigma_hat = estimate.eigenvectors * out.eigenvalues.asDiagonal() *
                  estimate.eigenvectors.transpose();
  return out;
}

double asymptotic_loss(const ShrinkageRule& rule, const ReducedModelConfig& config) {
  check_rule(rule, config);
  if (config.spikes.empty()) return 0.0;
  const double gamma = config.gamma;
  const double scale = moment_scale(config, rule.noise_model);
  if (rule.loss == LossKind::Operator) {
    const double c2 = cos_forward(scale * config.spikes.front(), gamma);
    return config.spikes.front() * std::sqrt(1.0 - c2);
  }
  double total = 0.0;
  for (double ell : config.spikes) {
    const double c2 = cos_forward(scale * ell, gamma);
    total += (1.0 - c2 * c2) * ell * ell;
  }
  return total;
}

CovEstimate alt_estimator(const DataSet& data, const ReducedModelConfig& config,
                          bool with_spectrum) {
  if (data.y.rows() != data.d.rows() || data.y.cols() != data.d.cols()) {
    throw std::invalid_argument("alt estimator needs Y and D of identical shape");
  }
  const double n = static_cast<double>(data.y.rows());
  const Eigen::MatrixXd sigma_y = data.y.transpose() * data.y / n;
  const Eigen::MatrixXd overlap = data.d.transpose() * data.d / n;  // M_ij

  Eigen::MatrixXd rhs = sigma_y;
  if (config.noise_model == NoiseModel::ReducedNoise) {
    // Subtract the reduced-noise Gram diagonal (1/n) sum_k D_k^2.
    rhs.diagonal() -= overlap.diagonal();
  } else {
    rhs.diagonal().array() -= 1.0;
  }

  CovEstimate est;
  est.provenance = Provenance::AltLinearSystem;
  est.sigma_hat.resize(rhs.rows(), rhs.cols());
  long flagged = 0;
  for (Eigen::Index j = 0; j < rhs.cols(); ++j) {
    for (Eigen::Index i = 0; i < rhs.rows(); ++i) {
      if (overlap(i, j) > 0.0) {
        est.sigma_hat(i, j) = rhs(i, j) / overlap(i, j);
      } else {
        est.sigma_hat(i, j) = 0.0;
        ++flagged;
      }
    }
  }
  est.zero_overlap_count = flagged;
  est.sigma_hat = ((est.sigma_hat + est.sigma_hat.transpose()) / 2.0).eval();
  if (with_spectrum) {
    spectrum_desc(est.sigma_hat, est.eigenvalues, est.eigenvectors);
  }
  return est;
}

double relative_difference(const CovEstimate& a, const CovEstimate& b) {
  if (a.sigma_hat.rows() != b.sigma_hat.rows() || a.sigma_hat.cols() != b.sigma_hat.cols()) {
    throw std::invalid_argument("relative difference needs matrices of identical shape");
  }
  const double denom = a.sigma_hat.norm();
  if (denom == 0.0) throw std::invalid_argument("relative difference to a zero matrix");
  return (a.sigma_hat - b.sigma_hat).norm() / denom;
}

std::pair<double, double> estimate_reduction_moments(const Eigen::MatrixXd& d) {
  if (d.size() == 0) throw std::invalid_argument("moment estimation needs entries");
  const double mean = d.mean();
  const double var = (d.array() - mean).square().sum() / static_cast<double>(d.size());
  return {mean, var};
}

}  // namespace redpca
