#include "redpca/denoise.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "redpca/spike_maps.hpp"

namespace redpca {

namespace {

// Spike-to-cosine under the config's noise placement: the effective spike is
// delta*ell (reduced noise) or mu^2*ell (unreduced).
double spike_cos_sq(const ReducedModelConfig& config, double ell) {
  const double scale =
      config.noise_model == NoiseModel::ReducedNoise ? config.delta() : config.mu() * config.mu();
  return cos_forward(scale * ell, config.gamma);
}

double optimal_coefficient(const ReducedModelConfig& config, DenoiseMode mode, double ell) {
  const double mu = config.mu();
  // Noise second moment per coordinate: m under reduced noise, 1 otherwise.
  const double noise = config.noise_model == NoiseModel::ReducedNoise ? config.m() : 1.0;
  if (mode == DenoiseMode::Blp) return mu * ell / (mu * mu * ell + noise);
  const double c2 = spike_cos_sq(config, ell);
  if (mode == DenoiseMode::EblpInSample) return mu * ell * c2 / (mu * mu * ell + noise);
  return mu * ell * c2 / (mu * mu * ell * c2 + noise);
}

double amse_single(const ReducedModelConfig& config, DenoiseMode mode, double ell, double eta) {
  const double mu = config.mu();
  const double mu2 = mu * mu;
  const double gamma = config.gamma;
  if (config.noise_model == NoiseModel::ReducedNoise) {
    const double m = config.m();
    const double delta = config.delta();
    switch (mode) {
      case DenoiseMode::Blp: {
        const double r = 1.0 - eta * mu;
        return r * r * ell + eta * eta * m;
      }
      case DenoiseMode::EblpInSample: {
        const double c2 = spike_cos_sq(config, ell);
        const double lambda = spike_forward(delta * ell, gamma);
        const double beta = 1.0 + gamma / (delta * ell);
        return ell + eta * eta * m * lambda - 2.0 * eta * mu * ell * c2 * beta;
      }
      case DenoiseMode::EblpOutOfSample: {
        const double c2 = spike_cos_sq(config, ell);
        return ell + eta * eta * (mu2 * ell * c2 + m) - 2.0 * eta * mu * ell * c2;
      }
    }
  } else {
    switch (mode) {
      case DenoiseMode::Blp:
        return ell + eta * eta * (mu2 * ell + 1.0) - 2.0 * eta * mu * ell;
      case DenoiseMode::EblpInSample: {
        const double c2 = spike_cos_sq(config, ell);
        const double lambda = spike_forward(mu2 * ell, gamma);
        const double beta = 1.0 + gamma / (mu2 * ell);
        return ell + eta * eta * lambda - 2.0 * eta * mu * ell * c2 * beta;
      }
      case DenoiseMode::EblpOutOfSample: {
        const double c2 = spike_cos_sq(config, ell);
        return ell + eta * eta * (mu2 * ell * c2 + 1.0) - 2.0 * eta * mu * ell * c2;
      }
    }
  }
  throw std::logic_error("unreachable denoise mode");
}

}  // namespace

DenoiserSpec DenoiserSpec::make(DenoiseMode mode, std::vector<double> coefficients) {
  DenoiserSpec spec;
  spec.mode = mode;
  spec.coefficients = std::move(coefficients);
  spec.basis = mode == DenoiseMode::Blp ? PcBasis::PopulationPcs : PcBasis::EmpiricalPcs;
  return spec;
}

void DenoiserSpec::validate(int rank) const {
  if (coefficients.size() != static_cast<std::size_t>(rank)) {
    throw std::invalid_argument("denoiser needs one coefficient per spike");
  }
  const bool blp = mode == DenoiseMode::Blp;
  if (blp != (basis == PcBasis::PopulationPcs)) {
    throw std::invalid_argument("BLP runs on population PCs, EBLP on empirical PCs");
  }
  for (double c : coefficients) {
    if (!std::isfinite(c)) throw std::invalid_argument("denoiser coefficients must be finite");
  }
}

std::vector<double> optimal_coefficients(const ReducedModelConfig& config, DenoiseMode mode) {
  config.validate();
  std::vector<double> out;
  out.reserve(config.spikes.size());
  for (double ell : config.spikes) out.push_back(optimal_coefficient(config, mode, ell));
  return out;
}

AmseReport amse(const ReducedModelConfig& config, DenoiseMode mode,
                const std::vector<double>& coefficients) {
  config.validate();
  if (coefficients.size() != config.spikes.size()) {
    throw std::invalid_argument("amse needs one coefficient per spike");
  }
  AmseReport report;
  report.mode = mode;
  report.noise_model = config.noise_model;
  for (std::size_t k = 0; k < config.spikes.size(); ++k) {
    AmseReport::PerSpike row;
    row.ell = config.spikes[k];
    row.coefficient = coefficients[k];
    row.amse = amse_single(config, mode, row.ell, row.coefficient);
    report.total += row.amse;
    report.per_spike.push_back(row);
  }
  return report;
}

Eigen::MatrixXd denoise_matrix(const DataSet& data, const std::vector<double>& coefficients,
                               int rank) {
  if (rank < 0 || static_cast<std::size_t>(rank) != coefficients.size()) {
    throw std::invalid_argument("denoise_matrix needs one coefficient per retained component");
  }
  const Eigen::Index top = std::min<Eigen::Index>(rank, std::min(data.y.rows(), data.y.cols()));
  if (top == 0) return Eigen::MatrixXd::Zero(data.y.rows(), data.y.cols());
  // Row-wise sum_k eta_k u_hat_k u_hat_k^T y_i equals the SVD truncation
  // sum_k eta_k sigma_k w_k u_hat_k^T (exact algebra, tested elementwise).
  Eigen::BDCSVD<Eigen::MatrixXd> svd(data.y, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Eigen::VectorXd scaled = Eigen::VectorXd::Zero(svd.singularValues().size());
  for (Eigen::Index k = 0; k < top; ++k) {
    scaled[k] = coefficients[k] * svd.singularValues()[k];
  }
  return svd.matrixU() * scaled.asDiagonal() * svd.matrixV().transpose();
}

Eigen::VectorXd denoise_vector(const Eigen::VectorXd& y0, const Eigen::MatrixXd& u_hats,
                               const std::vector<double>& coefficients) {
  if (u_hats.rows() != y0.size()) {
    throw std::invalid_argument("denoise_vector basis and observation dimensions disagree");
  }
  if (static_cast<std::size_t>(u_hats.cols()) != coefficients.size()) {
    throw std::invalid_argument("denoise_vector needs one coefficient per basis column");
  }
  Eigen::VectorXd proj = u_hats.transpose() * y0;
  for (Eigen::Index k = 0; k < proj.size(); ++k) proj[k] *= coefficients[k];
  return u_hats * proj;
}

PluginEstimate plugin_from_singular_values(const std::vector<double>& sv_sq, double gamma,
                                           const PluginParams& params) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("gamma must be positive and finite");
  }
  if (!(params.rank_margin > 0.0)) {
    throw std::invalid_argument("rank margin must be > 0");
  }
  const double m = params.reduction.m();
  const double scale = params.noise_model == NoiseModel::ReducedNoise
                           ? params.reduction.delta()
                           : params.reduction.mu * params.reduction.mu;
  if (!(scale > 0.0)) {
    throw std::invalid_argument("plug-in inversion needs a non-degenerate reduction");
  }
  const double edge = standard_mp_edge(gamma);
  PluginEstimate est;
  for (double x : sv_sq) {
    // Normalized spiked singular value: reduced noise divides out m.
    const double t_sq = params.noise_model == NoiseModel::ReducedNoise ? x / m : x;
    if (t_sq <= edge * (1.0 + params.rank_margin)) continue;
    const double eff = spike_inverse(t_sq, gamma);
    est.spikes.push_back(eff / scale);
    est.cos_sqs.push_back(cos_forward(eff, gamma));
  }
  est.rank = static_cast<int>(est.spikes.size());
  return est;
}

PluginEstimate estimate_plugin_params(const DataSet& data, const PluginParams& params) {
  if (data.y.size() == 0) throw std::invalid_argument("plug-in estimation needs data");
  const double n = static_cast<double>(data.y.rows());
  Eigen::BDCSVD<Eigen::MatrixXd> svd(data.y);
  std::vector<double> sv_sq(svd.singularValues().size());
  for (std::size_t k = 0; k < sv_sq.size(); ++k) {
    const double s = svd.singularValues()[static_cast<Eigen::Index>(k)];
    sv_sq[k] = s * s / n;
  }
  return plugin_from_singular_values(sv_sq, static_cast<double>(data.y.cols()) / n, params);
}

}  // namespace redpca
