// Covariance estimation: the debiased estimator and its spectrum limits,
// eigenvalue shrinkage, asymptotic losses, the entrywise linear-system
// estimator, reduction-moment estimation, and the diagonal concentration
// the debiasing rests on.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "redpca/covariance.hpp"
#include "redpca/errors.hpp"
#include "redpca/model.hpp"
#include "redpca/simulate.hpp"
#include "redpca/spike_maps.hpp"

using namespace redpca;

namespace {

ReducedModelConfig half_bernoulli_config(std::vector<double> spikes,
                                         NoiseModel noise = NoiseModel::ReducedNoise) {
  return ReducedModelConfig(0.5, std::move(spikes), noise, Reduction::bernoulli(0.5));
}

}  // namespace

// ===========================================================================
// Sample covariance and debiasing
// ===========================================================================

TEST_CASE("sample covariance of a tiny matrix") {
  DataSet data;
  data.y.resize(2, 2);
  data.y << 1.0, 2.0, 3.0, 4.0;
  const Eigen::MatrixXd s = sample_covariance(data);
  CHECK(s(0, 0) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(s(0, 1) == doctest::Approx(7.0).epsilon(1e-15));
  CHECK(s(1, 0) == doctest::Approx(7.0).epsilon(1e-15));
  CHECK(s(1, 1) == doctest::Approx(10.0).epsilon(1e-15));
  DataSet empty;
  CHECK_THROWS_AS(sample_covariance(empty), std::invalid_argument);
}

TEST_CASE("debiasing under reduced noise") {
  // mu = delta = 0.5, sigma2 = 0.25, m = 0.5:
  // sigma_hat = 4 S_Y - 2 diag(S_Y) - I.
  const ReducedModelConfig config = half_bernoulli_config({4.0});
  Eigen::MatrixXd sigma_y(2, 2);
  sigma_y << 1.5, 0.2, 0.2, 1.0;
  const CovEstimate est = debias(sigma_y, config);
  CHECK(est.provenance == Provenance::Debiased);
  CHECK(est.sigma_hat(0, 0) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(est.sigma_hat(0, 1) == doctest::Approx(0.8).epsilon(1e-14));
  CHECK(est.sigma_hat(1, 1) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(est.eigenvalues.size() == 2);
  CHECK(est.eigenvalues(0) >= est.eigenvalues(1));  // descending spectrum
  const CovEstimate bare = debias(sigma_y, config, false);
  CHECK(bare.eigenvalues.size() == 0);
}

TEST_CASE("debiasing under unreduced noise") {
  // mu = 0.5, sigma2 = 0.25, m = 0.5, identity input: 4 I - 2 I - 2 I = 0.
  const ReducedModelConfig config(0.5, {4.0}, NoiseModel::UnreducedNoise,
                                  Reduction::general_iid(0.5, 0.25));
  const CovEstimate est = debias(Eigen::MatrixXd::Identity(2, 2), config);
  CHECK(est.sigma_hat.norm() < 1e-14);
}

TEST_CASE("debiasing rejects a mean-zero reduction") {
  const ReducedModelConfig config(0.5, {4.0}, NoiseModel::ReducedNoise,
                                  Reduction::general_iid(0.0, 0.25));
  CHECK_THROWS_AS(debias(Eigen::MatrixXd::Identity(2, 2), config), degenerate_reduction_error);
  CHECK_THROWS_AS(debias(Eigen::MatrixXd::Zero(2, 3), half_bernoulli_config({4.0})),
                  std::invalid_argument);
}

// ===========================================================================
// Spectrum limits of the debiased estimator
// ===========================================================================

TEST_CASE("bulk edge of the debiased spectrum") {
  const ReducedModelConfig config = half_bernoulli_config({4.0});
  CHECK(debiased_bulk_edge(config, NoiseModel::ReducedNoise) ==
        doctest::Approx(3.8284271247461903).epsilon(1e-15));
  // Unreduced scaling uses mu^2 = 0.25.
  CHECK(debiased_bulk_edge(config, NoiseModel::UnreducedNoise) ==
        doctest::Approx(2.0 * 3.8284271247461903).epsilon(1e-14));
}

TEST_CASE("top-eigenvalue and cosine limits") {
  const ReducedModelConfig config = half_bernoulli_config({4.0});
  CHECK(limit_spike(4.0, config, SpikeLimit::Eigenvalue) ==
        doctest::Approx(5.5).epsilon(1e-14));
  CHECK(limit_spike(4.0, config, SpikeLimit::CosSq) == doctest::Approx(0.7).epsilon(1e-15));
  // Subcritical spike: the eigenvalue limit collapses to the bulk edge.
  CHECK(limit_spike(1.2, config, SpikeLimit::Eigenvalue) ==
        doctest::Approx(3.8284271247461903).epsilon(1e-15));
  CHECK(limit_spike(1.2, config, SpikeLimit::CosSq) == 0.0);
  CHECK_THROWS_AS(limit_spike(0.0, config, SpikeLimit::Eigenvalue), std::invalid_argument);

  const ReducedModelConfig unred(0.5, {4.0}, NoiseModel::UnreducedNoise,
                                 Reduction::bernoulli(0.5));
  CHECK(limit_spike(4.0, unred, SpikeLimit::Eigenvalue) == doctest::Approx(8.0).epsilon(1e-14));
  CHECK(limit_spike(4.0, unred, SpikeLimit::CosSq) ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

// ===========================================================================
// Optimal shrinkage
// ===========================================================================

TEST_CASE("pointwise shrinker values") {
  const ReducedModelConfig config = half_bernoulli_config({4.0});
  ShrinkageRule op{LossKind::Operator, NoiseModel::ReducedNoise, std::nullopt};
  ShrinkageRule fro{LossKind::Frobenius, NoiseModel::ReducedNoise, std::nullopt};
  // lambda = 5.5 inverts to ell = 4; Frobenius multiplies by cos^2 = 0.7.
  CHECK(shrinker_value(5.5, op, config) == doctest::Approx(4.0).epsilon(1e-13));
  CHECK(shrinker_value(5.5, fro, config) == doctest::Approx(2.8).epsilon(1e-13));

  const double edge = debiased_bulk_edge(config, NoiseModel::ReducedNoise);
  CHECK(shrinker_value(edge, op, config) == 0.0);
  CHECK(shrinker_value(edge * 1.05, op, config) == 0.0);   // inside the default margin
  CHECK(shrinker_value(edge * 1.06, op, config) > 0.0);    // just beyond it
  CHECK(shrinker_value(-1.0, op, config) == 0.0);

  ShrinkageRule wide = op;
  wide.bulk_margin = 10.0;
  CHECK(shrinker_value(5.5, wide, config) == 0.0);
  ShrinkageRule bad = op;
  bad.bulk_margin = 0.0;
  CHECK_THROWS_AS(shrinker_value(5.5, bad, config), std::invalid_argument);
  ShrinkageRule wrong_noise{LossKind::Operator, NoiseModel::UnreducedNoise, std::nullopt};
  CHECK_THROWS_AS(shrinker_value(5.5, wrong_noise, config), std::invalid_argument);
}

TEST_CASE("operator shrinker inverts the eigenvalue limit") {
  const ReducedModelConfig config = half_bernoulli_config({4.0});
  const ShrinkageRule op{LossKind::Operator, NoiseModel::ReducedNoise, std::nullopt};
  const ShrinkageRule fro{LossKind::Frobenius, NoiseModel::ReducedNoise, std::nullopt};
  for (int i = 0; i < 100; ++i) {
    const double ell = 2.2 + 0.2 * i;
    const double lambda = limit_spike(ell, config, SpikeLimit::Eigenvalue);
    CHECK(shrinker_value(lambda, op, config) == doctest::Approx(ell).epsilon(1e-12));
    // The Frobenius shrinker never exceeds the operator one.
    CHECK(shrinker_value(lambda, fro, config) <= shrinker_value(lambda, op, config) + 1e-15);
  }
}

TEST_CASE("shrinkage of a supercritical rank-one estimate") {
  const ReducedModelConfig config = half_bernoulli_config({6.0});
  const DataSet data = gen_spiked_data(config, 1200, 600, 31);
  const CovEstimate est = debias(sample_covariance(data), config);
  const ShrinkageRule op{LossKind::Operator, NoiseModel::ReducedNoise, std::nullopt};
  const CovEstimate shr = shrink_eigenvalues(est, op, config);
  CHECK(shr.provenance == Provenance::DebiasedShrunk);

  // Exactly the one supercritical eigenvalue survives, near ell = 6.
  int positive = 0;
  for (Eigen::Index i = 0; i < shr.eigenvalues.size(); ++i) {
    if (shr.eigenvalues(i) > 0.0) ++positive;
  }
  CHECK(positive == 1);
  CHECK(shr.eigenvalues(0) == doctest::Approx(6.0).epsilon(0.15));

  // sigma_hat is the rank-one reconstruction from the surviving eigenpair.
  const Eigen::MatrixXd expected = shr.eigenvalues(0) * est.eigenvectors.col(0) *
                                   est.eigenvectors.col(0).transpose();
  CHECK((shr.sigma_hat - expected).norm() < 1e-10);
}

TEST_CASE("shrinkage validates provenance and spectrum presence") {
  const ReducedModelConfig config = half_bernoulli_config({4.0});
  const ShrinkageRule op{LossKind::Operator, NoiseModel::ReducedNoise, std::nullopt};
  CovEstimate alt;
  alt.provenance = Provenance::AltLinearSystem;
  CHECK_THROWS_AS(shrink_eigenvalues(alt, op, config), std::invalid_argument);
  const CovEstimate bare = debias(Eigen::MatrixXd::Identity(2, 2), config, false);
  CHECK_THROWS_AS(shrink_eigenvalues(bare, op, config), std::invalid_argument);
}

TEST_CASE("asymptotic losses of the optimally shrunk estimator") {
  const ShrinkageRule op{LossKind::Operator, NoiseModel::ReducedNoise, std::nullopt};
  const ShrinkageRule fro{LossKind::Frobenius, NoiseModel::ReducedNoise, std::nullopt};
  const ReducedModelConfig one = half_bernoulli_config({4.0});
  // Operator: ell * sqrt(1 - 0.7) = 4 sqrt(0.3).
  CHECK(asymptotic_loss(op, one) == doctest::Approx(2.1908902300206643).epsilon(1e-15));
  // Frobenius: 16 * (1 - 0.49).
  CHECK(asymptotic_loss(fro, one) == doctest::Approx(8.16).epsilon(1e-14));

  // Frobenius loss adds across spikes; operator loss is set by the largest.
  const ReducedModelConfig two = half_bernoulli_config({4.0, 2.0});
  CHECK(asymptotic_loss(fro, two) == doctest::Approx(8.16 + 32.0 / 9.0).epsilon(1e-14));
  CHECK(asymptotic_loss(op, two) == doctest::Approx(2.1908902300206643).epsilon(1e-15));

  const ReducedModelConfig none(0.5, {}, NoiseModel::ReducedNoise, Reduction::bernoulli(0.5));
  CHECK(asymptotic_loss(fro, none) == 0.0);
}

// ===========================================================================
// Entrywise linear-system estimator
// ===========================================================================

TEST_CASE("zero design overlap is flagged and zeroed") {
  DataSet data;
  data.y.resize(2, 2);
  data.y << 1.0, 0.0, 2.0, 0.0;
  data.d.resize(2, 2);
  data.d << 1.0, 0.0, 1.0, 0.0;  // second coordinate never observed
  const ReducedModelConfig config = half_bernoulli_config({4.0});
  const CovEstimate est = alt_estimator(data, config, false);
  CHECK(est.provenance == Provenance::AltLinearSystem);
  CHECK(est.zero_overlap_count == 3);
  CHECK(est.sigma_hat(0, 0) == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(est.sigma_hat(0, 1) == 0.0);
  CHECK(est.sigma_hat(1, 1) == 0.0);

  DataSet bad = data;
  bad.d.resize(2, 3);
  CHECK_THROWS_AS(alt_estimator(bad, config, false), std::invalid_argument);
}

TEST_CASE("full observation makes both estimators identical") {
  DataSet data;
  data.y = Eigen::MatrixXd::Random(50, 10);
  data.d = Eigen::MatrixXd::Ones(50, 10);
  for (NoiseModel noise : {NoiseModel::ReducedNoise, NoiseModel::UnreducedNoise}) {
    const ReducedModelConfig config(0.2, {4.0}, noise, Reduction::bernoulli(1.0));
    const CovEstimate a = alt_estimator(data, config, false);
    const CovEstimate d = debias(sample_covariance(data), config, false);
    CHECK(relative_difference(a, d) < 1e-13);
  }
}

TEST_CASE("both estimators agree on simulated data at moderate size") {
  const ReducedModelConfig config(0.2, {6.0}, NoiseModel::ReducedNoise,
                                  Reduction::bernoulli(0.5));
  const DataSet data = gen_spiked_data(config, 1500, 300, 57);
  const CovEstimate a = alt_estimator(data, config, false);
  const CovEstimate d = debias(sample_covariance(data), config, false);
  CHECK(a.zero_overlap_count == 0);
  CHECK(relative_difference(a, d) < 0.2);
}

TEST_CASE("relative difference basics") {
  CovEstimate a, b;
  a.sigma_hat = 2.0 * Eigen::MatrixXd::Identity(2, 2);
  b.sigma_hat = Eigen::MatrixXd::Identity(2, 2);
  CHECK(relative_difference(a, b) == doctest::Approx(0.5).epsilon(1e-15));
  CovEstimate zero;
  zero.sigma_hat = Eigen::MatrixXd::Zero(2, 2);
  CHECK_THROWS_AS(relative_difference(zero, b), std::invalid_argument);
  CovEstimate small;
  small.sigma_hat = Eigen::MatrixXd::Identity(3, 3);
  CHECK_THROWS_AS(relative_difference(a, small), std::invalid_argument);
}

// ===========================================================================
// Reduction-moment estimation and diagonal concentration
// ===========================================================================

TEST_CASE("reduction moments from the design matrix") {
  Eigen::MatrixXd d(2, 2);
  d << 1.0, 0.0, 1.0, 1.0;
  const auto [mu, sigma2] = estimate_reduction_moments(d);
  CHECK(mu == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(sigma2 == doctest::Approx(0.1875).epsilon(1e-15));
  CHECK_THROWS_AS(estimate_reduction_moments(Eigen::MatrixXd()), std::invalid_argument);
}

TEST_CASE("gram diagonal concentrates around m") {
  // Pure reduced noise with unit-modulus entries: each diagonal entry of
  // (1/n) Y^T Y is a Bernoulli average with mean m = 0.5, and the maximum
  // deviation over all p coordinates stays small at this size.
  const ReducedModelConfig config(0.5, {}, NoiseModel::ReducedNoise,
                                  Reduction::bernoulli(0.5));
  GenOptions options;
  options.noise_law = SampleLaw::TwoPoint;
  const DataSet data = gen_spiked_data(config, 2000, 1000, 99, options);
  const Eigen::MatrixXd sigma_y = sample_covariance(data);
  const double max_dev = (sigma_y.diagonal().array() - config.m()).abs().maxCoeff();
  CHECK(max_dev < 0.05);
}
