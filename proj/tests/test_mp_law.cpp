// Marchenko-Pastur numerics: closed-form transforms of the standard law,
// the general-law fixed-point solver against those closed forms, transform
// identities on the solved grid, D-transform interpolation/inversion, the
// density evaluator, and one empirical-spectrum KS check.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "redpca/errors.hpp"
#include "redpca/model.hpp"
#include "redpca/mp_law.hpp"
#include "redpca/simulate.hpp"

using namespace redpca;

namespace {

// Central finite difference of the closed-form standard D-transform.
double standard_d_prime_fd(double x, double gamma) {
  const double h = 1e-6 * x;
  return (standard_mp_d_transform(x + h, gamma) - standard_mp_d_transform(x - h, gamma)) /
         (2.0 * h);
}

// Silverstein-equation residual: the companion transform v at x must satisfy
// x = -1/v + gamma * sum_j w_j t_j / (1 + t_j v).
double silverstein_residual(double x, double v, const SpectralLaw& law, double gamma) {
  double s = 0.0;
  for (std::size_t j = 0; j < law.atoms.size(); ++j) {
    s += law.weights[j] * law.atoms[j] / (1.0 + law.atoms[j] * v);
  }
  return std::abs(-1.0 / v + gamma * s - x);
}

}  // namespace

// ===========================================================================
// Standard law: closed forms
// ===========================================================================

TEST_CASE("bulk edges") {
  CHECK(standard_mp_edge(0.5) == doctest::Approx(2.9142135623730951).epsilon(1e-15));
  CHECK(standard_mp_lower_edge(0.5) == doctest::Approx(0.0857864376269049).epsilon(1e-13));
  CHECK(standard_mp_edge(1.0) == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(standard_mp_lower_edge(1.0) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK_THROWS_AS(standard_mp_edge(0.0), std::invalid_argument);
  CHECK_THROWS_AS(standard_mp_edge(-1.0), std::invalid_argument);
}

TEST_CASE("bulk density value and support") {
  // sqrt((g+ - x)(x - g-))/(2 pi x) at x = 1.5, gamma = 0.5 is sqrt(2)/(3 pi).
  CHECK(standard_mp_density(1.5, 0.5) ==
        doctest::Approx(0.15005271935951772).epsilon(1e-14));
  const double lo = standard_mp_lower_edge(0.5);
  const double hi = standard_mp_edge(0.5);
  CHECK(standard_mp_density(lo, 0.5) == 0.0);
  CHECK(standard_mp_density(hi, 0.5) == 0.0);
  CHECK(standard_mp_density(0.01, 0.5) == 0.0);
  CHECK(standard_mp_density(5.0, 0.5) == 0.0);
  CHECK(standard_mp_density(1.0, 0.5) > 0.0);
  CHECK_THROWS_AS(standard_mp_density(1.5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(standard_mp_density(1.5, 1.5), std::invalid_argument);
}

TEST_CASE("stieltjes transform above the edge") {
  // gamma = 0.5 at x = 3.75 (the spiked value of ell = 2): m = -0.4 exactly.
  CHECK(standard_mp_stieltjes(3.75, 0.5) == doctest::Approx(-0.4).epsilon(1e-15));
  CHECK(standard_mp_companion(3.75, 0.5) ==
        doctest::Approx(-1.0 / 3.0).epsilon(1e-15));
  CHECK(standard_mp_d_transform(3.75, 0.5) == doctest::Approx(0.5).epsilon(1e-15));
  // gamma = 1 at x = 4.5 (the spiked value of ell = 2): D = 1/2.
  CHECK(standard_mp_stieltjes(4.5, 1.0) == doctest::Approx(-1.0 / 3.0).epsilon(1e-14));
  CHECK(standard_mp_d_transform(4.5, 1.0) == doctest::Approx(0.5).epsilon(1e-14));
  // At or below the edge the real transform is undefined.
  CHECK_THROWS_AS(standard_mp_stieltjes(standard_mp_edge(0.5), 0.5), std::domain_error);
  CHECK_THROWS_AS(standard_mp_stieltjes(1.0, 0.5), std::domain_error);
  // Far tail: m(x) ~ -1/x.
  const double m_far = standard_mp_stieltjes(1e6, 0.5);
  CHECK(std::abs(m_far * 1e6 + 1.0) < 1e-5);
}

// ===========================================================================
// General solver vs the standard closed forms
// ===========================================================================

TEST_CASE("solver reproduces the standard law for a unit point mass") {
  for (double gamma : {0.3, 0.5, 1.0, 2.0}) {
    CAPTURE(gamma);
    const MPSolution sol = solve_general_mp(SpectralLaw::point_mass(1.0), gamma);
    const double edge = standard_mp_edge(gamma);
    CHECK(sol.edge_sq == doctest::Approx(edge).epsilon(1e-10));
    // Richardson-extrapolated edge limit of D is 1/sqrt(gamma).
    CHECK(sol.d_edge_limit == doctest::Approx(1.0 / std::sqrt(gamma)).epsilon(1e-8));
    CHECK(sol.edge_limit_extrapolated);
    for (double f : {1.001, 1.05, 1.5, 3.0, 10.0}) {
      const double x = edge * f;
      CAPTURE(x);
      const TransformValues t = sol.evaluate(x);
      CHECK(t.m == doctest::Approx(standard_mp_stieltjes(x, gamma)).epsilon(1e-9));
      CHECK(t.m_under == doctest::Approx(standard_mp_companion(x, gamma)).epsilon(1e-9));
      CHECK(t.d == doctest::Approx(standard_mp_d_transform(x, gamma)).epsilon(1e-9));
      CHECK(t.d_prime == doctest::Approx(standard_d_prime_fd(x, gamma)).epsilon(1e-5));
    }
  }
}

TEST_CASE("solver input validation") {
  CHECK_THROWS_AS(solve_general_mp(SpectralLaw::point_mass(1.0), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(solve_general_mp(SpectralLaw::point_mass(0.0), 0.5), std::invalid_argument);
  GridSpec bad;
  bad.points = 1;
  CHECK_THROWS_AS(solve_general_mp(SpectralLaw::point_mass(1.0), 0.5, bad),
                  std::invalid_argument);
}

TEST_CASE("starved iteration budget raises a convergence error with residual") {
  SolverOptions opts;
  opts.max_iter = 0;  // no fixed-point updates, no Newton polish
  bool thrown = false;
  try {
    solve_general_mp(SpectralLaw::point_mass(1.0), 0.5, GridSpec(), opts);
  } catch (const convergence_error& e) {
    thrown = true;
    CHECK(e.last_residual() > 0.0);
  }
  CHECK(thrown);
}

// ===========================================================================
// Transform identities on the solved grid
// ===========================================================================

TEST_CASE("grid identities for the unit point mass") {
  const double gamma = 0.5;
  const MPSolution sol = solve_general_mp(SpectralLaw::point_mass(1.0), gamma);
  REQUIRE(sol.grid.size() == 2000);
  for (std::size_t i = 0; i < sol.grid.size(); ++i) {
    const double x = sol.grid[i];
    const double m = sol.m_hat[i];
    const double mu = sol.m_under_hat[i];
    // Companion identity m_under = gamma*m + (gamma-1)/x.
    CHECK(std::abs(mu - (gamma * m + (gamma - 1.0) / x)) < 1e-10);
    // Quadratic defining the standard Stieltjes transform.
    CHECK(std::abs(gamma * x * m * m + (x + gamma - 1.0) * m + 1.0) < 1e-10);
  }
  // D-hat is strictly decreasing across the whole grid.
  CHECK(std::adjacent_find(sol.d_hat.begin(), sol.d_hat.end(),
                           [](double a, double b) { return !(a > b); }) == sol.d_hat.end());
}

TEST_CASE("grid identities for a two-atom variance law") {
  const SpectralLaw law({1.0, 2.0}, {0.5, 0.5});
  const double gamma = 0.5;
  const MPSolution sol = solve_general_mp(law, gamma);
  for (std::size_t i = 0; i < sol.grid.size(); ++i) {
    const double x = sol.grid[i];
    const double m = sol.m_hat[i];
    const double mu = sol.m_under_hat[i];
    CHECK(std::abs(mu - (gamma * m + (gamma - 1.0) / x)) < 1e-10);
    CHECK(silverstein_residual(x, mu, law, gamma) < 1e-8 * std::max(1.0, x));
    CHECK(std::abs(sol.d_hat[i] - x * m * mu) < 1e-12 * std::max(1.0, std::abs(sol.d_hat[i])));
  }
  CHECK(std::adjacent_find(sol.d_hat.begin(), sol.d_hat.end(),
                           [](double a, double b) { return !(a > b); }) == sol.d_hat.end());
  // The edge sits between the edges of the component point masses, scaled.
  CHECK(sol.edge_sq > standard_mp_edge(gamma));
  CHECK(sol.edge_sq < 2.0 * standard_mp_edge(gamma));
}

// ===========================================================================
// D-transform interpolation, boundary window, inversion
// ===========================================================================

TEST_CASE("interpolated D matches a direct solve between grid nodes") {
  const MPSolution sol = solve_general_mp(SpectralLaw({1.0, 2.0}, {0.5, 0.5}), 0.5);
  // The derivative of D blows up like a square root at the spectrum edge, so
  // cubic interpolation is coarser in the first cells and sharpens quickly.
  const std::vector<std::pair<std::size_t, double>> cells{
      {0, 1e-3}, {20, 1e-7}, {500, 1e-9}, {1500, 1e-9}};
  for (const auto& [i, tol] : cells) {
    const double x = std::sqrt(sol.grid[i] * sol.grid[i + 1]);  // between nodes
    CHECK(d_transform(x, sol) == doctest::Approx(sol.evaluate(x).d).epsilon(tol));
  }
  // Beyond the tabulated grid, d_transform falls back to a direct solve.
  const double x_far = sol.grid.back() * 8.0;
  CHECK(d_transform(x_far, sol) == doctest::Approx(sol.evaluate(x_far).d).epsilon(1e-12));
}

TEST_CASE("edge window returns the extrapolated limit, below-edge throws") {
  const MPSolution sol = solve_general_mp(SpectralLaw::point_mass(1.0), 0.5);
  CHECK(d_transform(sol.edge_sq * (1.0 + 1e-12), sol) == sol.d_edge_limit);
  CHECK(d_transform(sol.edge_sq, sol) == sol.d_edge_limit);
  CHECK_THROWS_AS(d_transform(sol.edge_sq * 0.5, sol), std::domain_error);
  CHECK_THROWS_AS(d_transform(0.0, sol), std::domain_error);
}

TEST_CASE("inverse undoes the D-transform") {
  const MPSolution sol = solve_general_mp(SpectralLaw({1.0, 2.0}, {0.5, 0.5}), 0.5);
  // Interior of the grid.
  for (double f : {1.01, 1.2, 2.0, 8.0, 30.0}) {
    const double x = sol.edge_sq * f;
    CAPTURE(x);
    const double y = d_transform(x, sol);
    CHECK(d_transform_inverse(y, sol) == doctest::Approx(x).epsilon(1e-6));
  }
  // Far beyond the grid (doubling bracket path).
  const double x_far = sol.grid.back() * 4.0;
  const double y_far = sol.evaluate(x_far).d;
  CHECK(d_transform_inverse(y_far, sol) == doctest::Approx(x_far).epsilon(1e-6));
}

TEST_CASE("inverse rejects values above the edge limit") {
  const MPSolution sol = solve_general_mp(SpectralLaw::point_mass(1.0), 0.5);
  CHECK_THROWS_AS(d_transform_inverse(sol.d_edge_limit * 1.01, sol), subcritical_error);
  CHECK_THROWS_AS(d_transform_inverse(0.0, sol), std::invalid_argument);
  CHECK_THROWS_AS(d_transform_inverse(-1.0, sol), std::invalid_argument);
}

// ===========================================================================
// Density evaluator
// ===========================================================================

TEST_CASE("general density matches the unit-mass standard density") {
  // For gamma < 1 the p-side law is purely continuous with total mass 1, so
  // it is the closed-form bulk density divided by gamma.
  const std::vector<double> xs{1.0, 1.5, 2.0};
  const std::vector<double> f = general_mp_density(SpectralLaw::point_mass(1.0), 0.5, xs);
  REQUIRE(f.size() == 3);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CHECK(f[i] == doctest::Approx(standard_mp_density(xs[i], 0.5) / 0.5).epsilon(5e-4));
  }
  CHECK(f[1] == doctest::Approx(0.30010543871903545).epsilon(5e-4));
}

TEST_CASE("general density vanishes off the bulk and integrates to one") {
  const std::vector<double> above = general_mp_density(SpectralLaw::point_mass(1.0), 0.5, {5.0});
  CHECK(above[0] < 1e-4);

  // Trapezoid mass over a grid covering the bulk.
  const double hi = standard_mp_edge(0.5) * 1.05;
  const int n = 600;
  std::vector<double> xs(n);
  for (int i = 0; i < n; ++i) xs[i] = hi * (i + 1) / n;
  const std::vector<double> f = general_mp_density(SpectralLaw::point_mass(1.0), 0.5, xs);
  double mass = 0.0;
  for (int i = 1; i < n; ++i) mass += 0.5 * (f[i] + f[i - 1]) * (xs[i] - xs[i - 1]);
  CHECK(mass == doctest::Approx(1.0).epsilon(2e-2));
}

TEST_CASE("density argument validation") {
  CHECK_THROWS_AS(general_mp_density(SpectralLaw::point_mass(1.0), -0.5, {1.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(general_mp_density(SpectralLaw::point_mass(1.0), 0.5, {1.0}, 0.0),
                  std::invalid_argument);
}

// ===========================================================================
// Empirical bulk spectrum vs the solved law
// ===========================================================================

TEST_CASE("pure-noise spectrum follows the solved two-atom law") {
  // Noise-only data with a two-atom variance profile; the sample covariance
  // spectrum should track the solved MP law closely at this size.
  const SpectralLaw law = SpectralLaw::uniform({1.0, 2.0});
  const ReducedModelConfig config(0.5, {}, NoiseModel::ReducedNoise,
                                  Reduction::bernoulli(1.0), law);
  const Eigen::Index n = 2000, p = 1000;
  const DataSet data = gen_spiked_data(config, n, p, 20260815u);
  const Eigen::MatrixXd sigma = (data.y.transpose() * data.y) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(sigma, Eigen::EigenvaluesOnly);
  std::vector<double> eigs(eig.eigenvalues().data(), eig.eigenvalues().data() + p);

  const MPSolution sol = solve_general_mp(law, config.gamma);
  const CdfTable table = mp_cdf_table(law, config.gamma, sol.edge_sq * 1.5);
  CHECK(ks_distance(eigs, table) < 0.05);
}
