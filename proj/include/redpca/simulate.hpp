#pragma once

#include <cstdint>
#include <vector>

#include "redpca/model.hpp"
#include "redpca/mp_law.hpp"

namespace redpca {

// Sampling law for the factor scores z and the noise entries.
enum class SampleLaw { Gaussian, TwoPoint };  // TwoPoint: +-1 equiprobable

struct GenOptions {
  SampleLaw z_law = SampleLaw::Gaussian;
  SampleLaw noise_law = SampleLaw::Gaussian;
};

// Draw one dataset from the model: population PCs from a QR-orthonormalized
// Gaussian p x r draw, scores z (n x r), noise with per-coordinate variances
// tiled deterministically from the config's noise-variance law (atoms sorted,
// repeated by weight), and iid reduction D per the config. Deterministic for
// fixed seed.
DataSet gen_spiked_data(const ReducedModelConfig& config, Eigen::Index n, Eigen::Index p,
                        std::uint64_t seed, const GenOptions& options = GenOptions());

// Per-coordinate variances used by the generator for a given p (the tiling).
std::vector<double> tile_variances(const SpectralLaw& law, Eigen::Index p);

// Eigenvalues of the p x p AR(1) Toeplitz matrix rho^|i-j| as a uniform-weight
// spectral law.
SpectralLaw gen_ar1_variances(double rho, int p);

// Law of the noise Gram bulk for the config: the noise-variance law scaled by
// m = E D^2 under ReducedNoise, unscaled under UnreducedNoise.
SpectralLaw bulk_law(const ReducedModelConfig& config);

enum class McQuantity { TopEigenvalue, CosSq, CovLossOp, CovLossFro, DenoiseMse, BulkKs };

struct McResult {
  McQuantity quantity = McQuantity::TopEigenvalue;
  double empirical_mean = 0.0;
  double empirical_sd = 0.0;   // sd across replicates
  double theoretical = 0.0;
  int reps = 0;
  std::uint64_t seed = 0;      // master seed; replicate r uses seed + r
};

struct McOptions {
  int threads = 0;             // 0: hardware default, capped by REDUCED_PCA_THREADS
  GenOptions gen;
};

// Seeded Monte Carlo over `reps` replicates. TopEigenvalue/CosSq measure the
// debiased estimator against limit_spike for white noise, and the raw
// (1/n) Y^T Y spectrum against predict_general for a general noise-variance
// law (the debiasing theory assumes white noise). CovLoss* compare optimally
// shrunk estimates to the oracle signal covariance; DenoiseMse is the
// in-sample EBLP matrix error /n at the optimal coefficients; BulkKs is the
// Kolmogorov-Smirnov distance of the bulk spectrum to the solved MP law.
// Replicates run concurrently; aggregation order is fixed by replicate index.
std::vector<McResult> run_mc(const ReducedModelConfig& config, Eigen::Index n, Eigen::Index p,
                             int reps, const std::vector<McQuantity>& targets,
                             std::uint64_t master_seed, const McOptions& options = McOptions());

// Piecewise-linear CDF table of the solved MP law on [0, x_max], with the
// point mass at zero included when gamma > 1.
struct CdfTable {
  std::vector<double> xs;
  std::vector<double> cdf;
  double operator()(double x) const;
};

CdfTable mp_cdf_table(const SpectralLaw& law, double gamma, double x_max, int points = 1200);

// sup-distance between the empirical CDF of the samples and the table.
double ks_distance(std::vector<double> samples, const CdfTable& table);

const char* mc_quantity_name(McQuantity q);

}  // namespace redpca
