#pragma once

#include <Eigen/Core>
#include <vector>

#include "redpca/model.hpp"

namespace redpca {

enum class DenoiseMode { Blp, EblpInSample, EblpOutOfSample };
enum class PcBasis { PopulationPcs, EmpiricalPcs };

// A denoiser: per-spike linear coefficients applied on a PC basis.
// BLP runs on population PCs, both EBLP variants on empirical PCs.
struct DenoiserSpec {
  DenoiseMode mode = DenoiseMode::EblpInSample;
  std::vector<double> coefficients;
  PcBasis basis = PcBasis::EmpiricalPcs;

  static DenoiserSpec make(DenoiseMode mode, std::vector<double> coefficients);
  void validate(int rank) const;
};

struct AmseReport {
  struct PerSpike {
    double ell = 0.0;
    double coefficient = 0.0;
    double amse = 0.0;
  };
  std::vector<PerSpike> per_spike;
  double total = 0.0;   // sum over spikes
  DenoiseMode mode = DenoiseMode::EblpInSample;
  NoiseModel noise_model = NoiseModel::ReducedNoise;
};

// AMSE-optimal per-spike coefficients for the given mode; subcritical spikes
// get 0 for the EBLP modes (their empirical PC carries no signal).
std::vector<double> optimal_coefficients(const ReducedModelConfig& config, DenoiseMode mode);

// Per-spike asymptotic MSE of the given coefficients (quadratic in each
// coefficient), plus the total.
AmseReport amse(const ReducedModelConfig& config, DenoiseMode mode,
                const std::vector<double>& coefficients);

// Row-wise spectral denoising: S_hat_i = sum_k eta_k u_hat_k u_hat_k^T y_i,
// computed as the SVD identity sum_k eta_k sigma_k(Y) u_hat_k v_hat_k^T.
Eigen::MatrixXd denoise_matrix(const DataSet& data, const std::vector<double>& coefficients,
                               int rank);

// Out-of-sample denoising of one new observation on a fixed PC basis.
Eigen::VectorXd denoise_vector(const Eigen::VectorXd& y0, const Eigen::MatrixXd& u_hats,
                               const std::vector<double>& coefficients);

struct PluginParams {
  NoiseModel noise_model = NoiseModel::ReducedNoise;
  Reduction reduction;
  double rank_margin = 0.02;  // relative bulk-edge margin for spike detection
};

struct PluginEstimate {
  int rank = 0;
  std::vector<double> spikes;
  std::vector<double> cos_sqs;
};

// Plug-in estimates of rank, spikes and cosines from the squared singular
// values of Y/sqrt(n) (aspect ratio gamma = p/n of the data): singular values
// above the bulk edge by the rank margin are inverted through the spike maps.
PluginEstimate plugin_from_singular_values(const std::vector<double>& sv_sq, double gamma,
                                           const PluginParams& params);

// Same, starting from the data matrix.
PluginEstimate estimate_plugin_params(const DataSet& data, const PluginParams& params);

}  // namespace redpca
