#pragma once

#include <vector>

#include "redpca/model.hpp"
#include "redpca/mp_law.hpp"

namespace redpca {

// Almost-sure spectral limits for supercritical spikes under the standard
// (white-noise, unit-variance) Marchenko-Pastur law, and their general-H
// counterparts through the D-transform.

// Limit of the top sample eigenvalue for population spike ell:
//   (1 + ell)(1 + gamma/ell) when ell > sqrt(gamma), else the bulk edge.
double spike_forward(double ell, double gamma);

// Limit squared cosine between population and sample PC (right singular
// vectors): (1 - gamma/ell^2)/(1 + gamma/ell) above the threshold, else 0.
double cos_forward(double ell, double gamma);

// Same for the left singular vectors (factor scores):
//   (1 - gamma/ell^2)/(1 + 1/ell) above the threshold, else 0.
double cos_forward_left(double ell, double gamma);

// Inverse of spike_forward on [(1+sqrt(gamma))^2, inf):
//   ell(y) = (y - 1 - gamma + sqrt((y - 1 - gamma)^2 - 4*gamma))/2.
double spike_inverse(double y, double gamma);

struct SpikedPrediction {
  std::vector<double> t_sq;           // limiting spiked (squared) singular values
  std::vector<double> cos_sq_right;   // |<u_k, u_hat_k>|^2 limits
  std::vector<double> cos_sq_left;    // |<z_k, z_hat_k>|^2 limits
  std::vector<bool> detectable;
};

// Closed-form predictions for the iid-reduction corollary. For ReducedNoise,
// t_sq refers to the m-normalized matrix (1/(n*m)) Y^T Y and the effective
// spike is delta*ell_k; for UnreducedNoise, t_sq refers to (1/n) Y^T Y and the
// effective spike is mu^2*ell_k.
SpikedPrediction predict_reduced(const ReducedModelConfig& config);

// General-theorem predictions from a solved MP law for the noise-variance
// distribution H: t_k^2 = D^{-1}(1/(tau_k ell_k)) when detectable (else the
// bulk edge), cosines m(t^2)/(D'(t^2) tau ell) and m_under(t^2)/(D'(t^2) tau ell).
// Assumes distinct spikes (simple limits). Subcritical spikes are reported
// with detectable = false, never as an error.
SpikedPrediction predict_general(const std::vector<double>& taus, const std::vector<double>& spikes,
                                 const MPSolution& sol);

}  // namespace redpca
