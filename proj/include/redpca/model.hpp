#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace redpca {

// Discrete spectral distribution: a finite mixture of point masses.
// Used both for the population noise-variance profile and as the input
// law H of the general Marchenko-Pastur solver.
struct SpectralLaw {
  std::vector<double> atoms;    // locations, >= 0, finite
  std::vector<double> weights;  // > 0, sum to 1 within 1e-12

  SpectralLaw() : atoms{1.0}, weights{1.0} {}
  SpectralLaw(std::vector<double> atoms_, std::vector<double> weights_);

  static SpectralLaw point_mass(double atom);
  // Equal weights over the given atoms (weights normalized exactly).
  static SpectralLaw uniform(std::vector<double> atoms_);

  double max_atom() const;
  double mean() const;
  bool is_unit_point_mass() const;
  // Law with every atom multiplied by c > 0.
  SpectralLaw scaled(double c) const;
};

// How the noise enters relative to the diagonal reduction:
//   ReducedNoise:   y_i = D_i (s_i + eps_i)   (noise is reduced too)
//   UnreducedNoise: y_i = D_i s_i + eps_i     (noise hits after reduction)
enum class NoiseModel { ReducedNoise, UnreducedNoise };

// IID law of the diagonal reduction entries D_ij.
struct Reduction {
  enum class Kind { Bernoulli, GeneralIid };

  Kind kind = Kind::Bernoulli;
  double mu = 1.0;      // E D_ij
  double sigma2 = 0.0;  // Var D_ij

  static Reduction bernoulli(double delta);
  static Reduction general_iid(double mu, double sigma2);

  double m() const { return mu * mu + sigma2; }          // E D_ij^2
  double delta() const { return mu * mu / m(); }         // mu^2 / m, in [0, 1]
};

// Full spiked-model description: spiked covariance of the signal, reduction
// law, noise placement, and the noise-variance profile.
//
// Population PCs are assumed delocalized (incoherent with the coordinate
// axes); this is not checked on user-supplied data. Spikes must be distinct:
// the almost-sure limits below are only stated for simple spiked eigenvalues.
struct ReducedModelConfig {
  double gamma = 0.5;           // aspect ratio p/n
  int rank = 0;                 // number of spikes r >= 0
  std::vector<double> spikes;   // ell_1 > ... > ell_r > 0 (sorted at construction)
  NoiseModel noise_model = NoiseModel::ReducedNoise;
  Reduction reduction;
  SpectralLaw noise_variances;  // law of the per-coordinate noise variances g_j^2

  ReducedModelConfig() = default;
  ReducedModelConfig(double gamma_, std::vector<double> spikes_, NoiseModel noise_model_,
                     Reduction reduction_, SpectralLaw noise_variances_ = SpectralLaw());

  double mu() const { return reduction.mu; }
  double sigma2() const { return reduction.sigma2; }
  double m() const { return reduction.m(); }
  double delta() const { return reduction.delta(); }

  void validate() const;

  std::string to_json() const;        // round-trippable config serialization
  static ReducedModelConfig from_json(const std::string& text);
  static ReducedModelConfig load_file(const std::string& path);
  void save_file(const std::string& path) const;
};

// (m, delta) pair derived from the reduction law.
std::pair<double, double> derived_moments(const ReducedModelConfig& config);

// Observed data: reduced observations Y (n x p), the reduction matrix D,
// and optional oracle pieces kept by the simulator for evaluation.
struct DataSet {
  Eigen::MatrixXd y;  // n x p
  Eigen::MatrixXd d;  // n x p, entrywise reduction coefficients
  std::optional<Eigen::MatrixXd> s_oracle;  // n x p latent signal
  std::optional<Eigen::MatrixXd> u_oracle;  // p x r population PCs (orthonormal columns)
  std::optional<Eigen::MatrixXd> z_oracle;  // n x r factor scores

  Eigen::Index n() const { return y.rows(); }
  Eigen::Index p() const { return y.cols(); }
};

}  // namespace redpca
