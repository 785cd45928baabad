#pragma once

#include <vector>

#include "redpca/model.hpp"

namespace redpca {

// ---------- standard Marchenko-Pastur law (unit variance), closed forms ----------

// Bulk edges (1 +- sqrt(gamma))^2.
double standard_mp_edge(double gamma);
double standard_mp_lower_edge(double gamma);

// Closed-form bulk density sqrt((g+ - x)(x - g-))/(2 pi x) on [g-, g+],
// gamma in (0, 1); zero outside. Note this is the companion-law normalization
// (bulk mass gamma); general_mp_density reports the unit-mass p-side density.
double standard_mp_density(double x, double gamma);

// Stieltjes transform m(x) for real x above the bulk edge, any gamma > 0.
// Root of gamma*x*m^2 + (x + gamma - 1)*m + 1 = 0 on the branch m -> 0- as x -> inf.
double standard_mp_stieltjes(double x, double gamma);

// Companion transform m_under = gamma*m + (gamma - 1)/x.
double standard_mp_companion(double x, double gamma);

// D-transform x*m(x)*m_under(x) of the standard law, x above the edge.
double standard_mp_d_transform(double x, double gamma);

// ---------- general-H solver ----------

struct GridSpec {
  int points = 2000;   // log-spaced grid points on (edge, edge*span]
  double span = 50.0;
};

struct SolverOptions {
  double damping = 0.5;      // update damping of the fixed-point iteration
  double v_im_start = 1e-2;  // imaginary-part schedule: v_im_start * v_im_factor^k
  double v_im_factor = 0.1;
  double v_im_min = 1e-7;
  int max_iter = 2000;       // per schedule level
  double tol = 1e-12;        // fixed-point step tolerance
};

// Transforms of F_{gamma,H} evaluated at one real point above the edge.
struct TransformValues {
  double m = 0.0;              // Stieltjes transform of F_{gamma,H}
  double m_prime = 0.0;
  double m_under = 0.0;        // companion transform
  double m_under_prime = 0.0;
  double d = 0.0;              // D(x) = x * m(x) * m_under(x)
  double d_prime = 0.0;
};

// Solved Marchenko-Pastur law for a discrete variance distribution H:
// upper support edge plus tabulated transforms on a log grid above it.
struct MPSolution {
  double gamma = 0.0;
  SpectralLaw law;
  double edge_sq = 0.0;          // upper edge b^2 of supp F_{gamma,H}
  std::vector<double> grid;      // ascending, all > edge_sq
  std::vector<double> m_hat;
  std::vector<double> m_under_hat;
  std::vector<double> d_hat;     // strictly decreasing
  std::vector<double> d_prime_hat;
  double d_edge_limit = 0.0;     // lim_{x -> edge+} D(x), Richardson-extrapolated
  bool edge_limit_extrapolated = true;
  double v_star = 0.0;           // companion-transform value at the edge

  // Direct evaluation at one x > edge_sq (solves the fixed point, not interpolation).
  TransformValues evaluate(double x) const;
};

// Solve the MP forward problem for discrete H. Each grid point is solved via
// the damped fixed point for the companion transform at z = x + i*v with the
// decreasing imaginary-part schedule from `opts`, warm-started along the grid
// and polished by a bracket-guarded Newton step on the real axis.
MPSolution solve_general_mp(const SpectralLaw& law, double gamma, GridSpec grid = GridSpec(),
                            SolverOptions opts = SolverOptions());

// D-transform at x from a solved law. Inside the grid: cubic Hermite
// interpolation (D and D' are both tabulated); beyond the grid: direct solve;
// within relative 1e-9 of the edge: the extrapolated edge limit.
double d_transform(double x, const MPSolution& sol);

// Inverse of the (strictly decreasing) D-transform: the x > edge with
// D(x) = y. Throws subcritical_error when y exceeds the edge limit.
double d_transform_inverse(double y, const MPSolution& sol);

// Continuous density of F_{gamma,H} on a grid of real points, evaluated as
// Im m(x + i*v_im)/pi with the damped fixed point. Points outside the bulk
// come back ~0.
std::vector<double> general_mp_density(const SpectralLaw& law, double gamma,
                                       const std::vector<double>& xs, double v_im = 1e-6,
                                       SolverOptions opts = SolverOptions());

}  // namespace redpca
