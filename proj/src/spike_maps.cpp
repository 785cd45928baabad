#include "redpca/spike_maps.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "redpca/errors.hpp"

namespace redpca {

namespace {

void check_gamma(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("gamma must be positive and finite");
  }
}

void check_spike(double ell) {
  if (!(ell > 0.0) || !std::isfinite(ell)) {
    throw std::invalid_argument("spike must be positive and finite");
  }
}

}  // namespace

double spike_forward(double ell, double gamma) {
  check_gamma(gamma);
  check_spike(ell);
  if (ell <= std::sqrt(gamma)) return standard_mp_edge(gamma);
  return (1.0 + ell) * (1.0 + gamma / ell);
}

double cos_forward(double ell, double gamma) {
  check_gamma(gamma);
  check_spike(ell);
  if (ell <= std::sqrt(gamma)) return 0.0;
  return (1.0 - gamma / (ell * ell)) / (1.0 + gamma / ell);
}

double cos_forward_left(double ell, double gamma) {
  check_gamma(gamma);
  check_spike(ell);
  if (ell <= std::sqrt(gamma)) return 0.0;
  return (1.0 - gamma / (ell * ell)) / (1.0 + 1.0 / ell);
}

double spike_inverse(double y, double gamma) {
  check_gamma(gamma);
  if (!(y >= standard_mp_edge(gamma))) {
    throw std::domain_error("spike_inverse needs y at or above the bulk edge");
  }
  const double b = y - 1.0 - gamma;
  const double disc = b * b - 4.0 * gamma;
  return 0.5 * (b + std::sqrt(std::max(disc, 0.0)));
}

SpikedPrediction predict_reduced(const ReducedModelConfig& config) {
  config.validate();
  const double gamma = config.gamma;
  const double scale =
      config.noise_model == NoiseModel::ReducedNoise ? config.delta() : config.mu() * config.mu();
  SpikedPrediction pred;
  pred.t_sq.reserve(config.spikes.size());
  for (double ell : config.spikes) {
    const double eff = scale * ell;  // effective spike after reduction
    pred.t_sq.push_back(spike_forward(eff, gamma));
    pred.cos_sq_right.push_back(cos_forward(eff, gamma));
    pred.cos_sq_left.push_back(cos_forward_left(eff, gamma));
    pred.detectable.push_back(eff > std::sqrt(gamma));
  }
  return pred;
}

SpikedPrediction predict_general(const std::vector<double>& taus, const std::vector<double>& spikes,
                                 const MPSolution& sol) {
  if (taus.size() != spikes.size()) {
    throw std::invalid_argument("predict_general needs one tau per spike");
  }
  SpikedPrediction pred;
  for (std::size_t k = 0; k < spikes.size(); ++k) {
    const double ell = spikes[k];
    const double tau = taus[k];
    check_spike(ell);
    if (!(tau > 0.0) || !std::isfinite(tau)) {
      throw std::invalid_argument("signal energies tau must be positive and finite");
    }
    bool detectable = ell * tau * sol.d_edge_limit > 1.0;
    double t_sq = sol.edge_sq;
    double c_right = 0.0;
    double c_left = 0.0;
    if (detectable) {
      try {
        t_sq = d_transform_inverse(1.0 / (tau * ell), sol);
        const TransformValues t = sol.evaluate(t_sq);
        c_right = std::clamp(t.m / (t.d_prime * tau * ell), 0.0, 1.0);
        c_left = std::clamp(t.m_under / (t.d_prime * tau * ell), 0.0, 1.0);
      } catch (const subcritical_error&) {
        // Threshold round-off: report as undetectable, never as a failure.
        detectable = false;
        t_sq = sol.edge_sq;
        c_right = c_left = 0.0;
      }
    }
    pred.t_sq.push_back(t_sq);
    pred.cos_sq_right.push_back(c_right);
    pred.cos_sq_left.push_back(c_left);
    pred.detectable.push_back(detectable);
  }
  return pred;
}

}  // namespace redpca
