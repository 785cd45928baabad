#include "redpca/mp_law.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <string>

#include "redpca/errors.hpp"

namespace redpca {

// ---------- standard closed forms ----------

double standard_mp_edge(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("gamma must be positive and finite");
  }
  const double s = std::sqrt(gamma);
  return (1.0 + s) * (1.0 + s);
}

double standard_mp_lower_edge(double gamma) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("gamma must be positive and finite");
  }
  const double s = std::sqrt(gamma);
  return (1.0 - s) * (1.0 - s);
}

double standard_mp_density(double x, double gamma) {
  if (!(gamma > 0.0) || gamma >= 1.0) {
    throw std::invalid_argument("standard MP density implemented for gamma in (0, 1)");
  }
  const double lo = standard_mp_lower_edge(gamma);
  const double hi = standard_mp_edge(gamma);
  if (x <= lo || x >= hi) return 0.0;
  // Companion-law normalization: the bulk carries mass gamma (the n-side law
  // puts the remaining 1-gamma at zero). The unit-mass p-side density is this
  // divided by gamma, which is what the general solver's density reports.
  return std::sqrt((hi - x) * (x - lo)) / (2.0 * M_PI * x);
}

double standard_mp_stieltjes(double x, double gamma) {
  const double edge = standard_mp_edge(gamma);  // validates gamma
  if (!(x > edge)) {
    throw std::domain_error("stieltjes transform evaluated at or below the bulk edge");
  }
  // gamma*x*m^2 + (x + gamma - 1)*m + 1 = 0; branch with m ~ -1/x at infinity.
  const double b = x + gamma - 1.0;
  const double disc = b * b - 4.0 * gamma * x;
  return (-b + std::sqrt(std::max(disc, 0.0))) / (2.0 * gamma * x);
}

double standard_mp_companion(double x, double gamma) {
  return gamma * standard_mp_stieltjes(x, gamma) + (gamma - 1.0) / x;
}

double standard_mp_d_transform(double x, double gamma) {
  const double m = standard_mp_stieltjes(x, gamma);
  return x * m * (gamma * m + (gamma - 1.0) / x);
}

// ---------- general-H machinery ----------

namespace {

// Inverse map z(v) = -1/v + gamma * int t/(1+tv) dH(t) of the companion
// transform (Silverstein equation), for real v in (-1/max_atom, 0).
double z_of_v(double v, const SpectralLaw& law, double gamma) {
  double s = 0.0;
  for (std::size_t j = 0; j < law.atoms.size(); ++j) {
    s += law.weights[j] * law.atoms[j] / (1.0 + law.atoms[j] * v);
  }
  return -1.0 / v + gamma * s;
}

double z_prime_of_v(double v, const SpectralLaw& law, double gamma) {
  double s = 0.0;
  for (std::size_t j = 0; j < law.atoms.size(); ++j) {
    const double q = 1.0 + law.atoms[j] * v;
    s += law.weights[j] * law.atoms[j] * law.atoms[j] / (q * q);
  }
  return 1.0 / (v * v) - gamma * s;
}

// v^2 * z'(v): strictly increasing on (-1/max_atom, 0), 1 at 0-, -inf at the
// pole, so its unique root locates the edge critical point.
double edge_indicator(double v, const SpectralLaw& law, double gamma) {
  double s = 0.0;
  for (std::size_t j = 0; j < law.atoms.size(); ++j) {
    const double av = law.atoms[j] * v;
    const double q = 1.0 + av;
    s += law.weights[j] * (av / q) * (av / q);
  }
  return 1.0 - gamma * s;
}

std::complex<double> fixed_point_map(std::complex<double> v, std::complex<double> z,
                                     const SpectralLaw& law, double gamma) {
  std::complex<double> s = 0.0;
  for (std::size_t j = 0; j < law.atoms.size(); ++j) {
    s += law.weights[j] * law.atoms[j] / (1.0 + law.atoms[j] * v);
  }
  return -1.0 / (z - gamma * s);
}

// Solve z(v) = x on the real bracket (v_star, 0), where z is strictly
// increasing: guarded Newton with bisection fallback.
double real_companion_solve(double x, const SpectralLaw& law, double gamma, double v_star,
                            double v_init, int newton_iters) {
  double lo = v_star;
  double hi = -std::numeric_limits<double>::min();
  double v = std::clamp(v_init, std::nextafter(lo, 0.0), hi);
  for (int it = 0; it < newton_iters; ++it) {
    const double f = z_of_v(v, law, gamma) - x;
    if (f < 0.0) {
      lo = v;
    } else {
      hi = v;
    }
    const double zp = z_prime_of_v(v, law, gamma);
    double next = v - f / zp;
    if (!(zp > 0.0) || !(next > lo) || !(next < hi)) {
      next = 0.5 * (lo + hi);
    }
    if (std::abs(next - v) <= 1e-16 * std::abs(v)) {
      v = next;
      break;
    }
    v = next;
  }
  return v;
}

TransformValues transforms_at(double x, double v, const SpectralLaw& law, double gamma) {
  TransformValues t;
  t.m_under = v;
  const double zp = z_prime_of_v(v, law, gamma);
  t.m_under_prime = 1.0 / zp;  // dv/dx along the real axis
  t.m = (v - (gamma - 1.0) / x) / gamma;
  t.m_prime = (t.m_under_prime + (gamma - 1.0) / (x * x)) / gamma;
  t.d = x * t.m * t.m_under;
  t.d_prime = t.m * t.m_under + x * (t.m_prime * t.m_under + t.m * t.m_under_prime);
  return t;
}

// Cubic Hermite interpolation on [x0, x1] from values and derivatives.
double hermite(double x, double x0, double x1, double f0, double f1, double d0, double d1) {
  const double h = x1 - x0;
  const double t = (x - x0) / h;
  const double t2 = t * t;
  const double t3 = t2 * t;
  return (2.0 * t3 - 3.0 * t2 + 1.0) * f0 + (t3 - 2.0 * t2 + t) * h * d0 +
         (-2.0 * t3 + 3.0 * t2) * f1 + (t3 - t2) * h * d1;
}

}  // namespace

TransformValues MPSolution::evaluate(double x) const {
  if (!(x > edge_sq)) {
    throw std::domain_error("transform evaluation needs x above the bulk edge");
  }
  // Warm start from the nearest tabulated companion value when available.
  double v_init = 0.5 * v_star;
  if (!grid.empty()) {
    const auto it = std::lower_bound(grid.begin(), grid.end(), x);
    const std::size_t idx = std::min<std::size_t>(it - grid.begin(), grid.size() - 1);
    v_init = m_under_hat[idx];
  }
  const double v = real_companion_solve(x, law, gamma, v_star, v_init, 120);
  return transforms_at(x, v, law, gamma);
}

MPSolution solve_general_mp(const SpectralLaw& law, double gamma, GridSpec grid,
                            SolverOptions opts) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("gamma must be positive and finite");
  }
  if (!(law.max_atom() > 0.0)) {
    throw std::invalid_argument("variance law with all-zero atoms has a degenerate MP law");
  }
  if (grid.points < 2 || !(grid.span > 1.0)) {
    throw std::invalid_argument("grid needs >= 2 points and span > 1");
  }

  MPSolution sol;
  sol.gamma = gamma;
  sol.law = law;

  // Upper edge: unique root of the (strictly increasing) edge indicator on
  // (-1/max_atom, 0), then the inverse map there.
  {
    double lo = -1.0 / law.max_atom();
    lo = std::nextafter(lo, 0.0);
    double hi = -std::numeric_limits<double>::min();
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (edge_indicator(mid, law, gamma) > 0.0) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    sol.v_star = 0.5 * (lo + hi);
    sol.edge_sq = z_of_v(sol.v_star, law, gamma);
  }

  // Log-spaced grid on (edge, edge*span].
  const int n = grid.points;
  sol.grid.resize(n);
  for (int i = 0; i < n; ++i) {
    sol.grid[i] = sol.edge_sq * std::pow(grid.span, static_cast<double>(i + 1) / n);
  }
  sol.m_hat.resize(n);
  sol.m_under_hat.resize(n);
  sol.d_hat.resize(n);
  sol.d_prime_hat.resize(n);

  const int newton_iters = opts.max_iter > 0 ? 120 : 0;
  std::complex<double> v_warm(sol.v_star * 0.999, opts.v_im_start);
  for (int i = 0; i < n; ++i) {
    const double x = sol.grid[i];
    std::complex<double> v = v_warm;
    // Imaginary-part schedule with damped fixed-point updates.
    for (double v_im = opts.v_im_start; v_im >= opts.v_im_min * (1.0 - 1e-12);
         v_im *= opts.v_im_factor) {
      const std::complex<double> z(x, v_im);
      for (int it = 0; it < opts.max_iter; ++it) {
        const std::complex<double> next =
            (1.0 - opts.damping) * v + opts.damping * fixed_point_map(v, z, law, gamma);
        const double step = std::abs(next - v);
        v = next;
        if (step <= opts.tol * (1.0 + std::abs(v))) break;
      }
    }
    v_warm = v;
    // Real-limit polish.
    const double vr = real_companion_solve(x, law, gamma, sol.v_star, v.real(), newton_iters);
    const double residual = std::abs(z_of_v(vr, law, gamma) - x);
    if (!std::isfinite(vr) || residual > 1e-9 * std::max(1.0, std::abs(x))) {
      throw convergence_error("MP fixed point failed to converge at x = " + std::to_string(x),
                              residual);
    }
    const TransformValues t = transforms_at(x, vr, law, gamma);
    sol.m_hat[i] = t.m;
    sol.m_under_hat[i] = t.m_under;
    sol.d_hat[i] = t.d;
    sol.d_prime_hat[i] = t.d_prime;
  }

  // Edge limit of D via sqrt-scaled Richardson extrapolation: with
  // D(x) = E - C*sqrt(x - b^2) + O(x - b^2), E = 2 D(x1) - D(x2) when
  // x2 - b^2 = 4 (x1 - b^2).
  {
    const double h = 1e-11 * sol.edge_sq;
    const double d1 = sol.evaluate(sol.edge_sq + h).d;
    const double d2 = sol.evaluate(sol.edge_sq + 4.0 * h).d;
    sol.d_edge_limit = 2.0 * d1 - d2;
    sol.edge_limit_extrapolated = true;
  }
  return sol;
}

double d_transform(double x, const MPSolution& sol) {
  if (!std::isfinite(x)) throw std::invalid_argument("d_transform needs finite x");
  const double edge = sol.edge_sq;
  if (x <= edge * (1.0 + 1e-9)) {
    if (x >= edge * (1.0 - 1e-9)) return sol.d_edge_limit;  // boundary case
    throw std::domain_error("d_transform evaluated at or below the bulk edge");
  }
  if (sol.grid.empty() || x < sol.grid.front() || x > sol.grid.back()) {
    return sol.evaluate(x).d;
  }
  const auto it = std::upper_bound(sol.grid.begin(), sol.grid.end(), x);
  std::size_t i = it - sol.grid.begin();
  if (i == 0) return sol.d_hat.front();
  if (i >= sol.grid.size()) return sol.d_hat.back();
  return hermite(x, sol.grid[i - 1], sol.grid[i], sol.d_hat[i - 1], sol.d_hat[i],
                 sol.d_prime_hat[i - 1], sol.d_prime_hat[i]);
}

double d_transform_inverse(double y, const MPSolution& sol) {
  if (!(y > 0.0) || !std::isfinite(y)) {
    throw std::invalid_argument("d_transform_inverse needs y > 0");
  }
  if (y > sol.d_edge_limit * (1.0 + 1e-4)) {
    throw subcritical_error("requested D value " + std::to_string(y) +
                            " exceeds the edge limit " + std::to_string(sol.d_edge_limit));
  }
  const auto bisect = [&sol](double lo, double hi, double target) {
    // D is strictly decreasing in x.
    for (int it = 0; it < 120; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (sol.evaluate(mid).d > target) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  };

  if (y >= sol.d_hat.front()) {
    // Between the edge and the first grid point (or at the edge limit itself).
    return bisect(sol.edge_sq * (1.0 + 1e-12), sol.grid.front(), y);
  }
  if (y < sol.d_hat.back()) {
    // Beyond the grid: expand a bracket by doubling (D decays like 1/x).
    double lo = sol.grid.back();
    double hi = 2.0 * lo;
    while (sol.evaluate(hi).d > y) {
      lo = hi;
      hi *= 2.0;
      if (!std::isfinite(hi)) {
        throw std::invalid_argument("d_transform_inverse target too small to bracket");
      }
    }
    return bisect(lo, hi, y);
  }
  // Grid bracket: first index with d_hat < y, searching the decreasing table.
  const auto it = std::upper_bound(sol.d_hat.begin(), sol.d_hat.end(), y, std::greater<double>());
  const std::size_t i = it - sol.d_hat.begin();
  if (i == 0) return sol.grid.front();
  if (i >= sol.d_hat.size()) return sol.grid.back();
  return bisect(sol.grid[i - 1], sol.grid[i], y);
}

std::vector<double> general_mp_density(const SpectralLaw& law, double gamma,
                                       const std::vector<double>& xs, double v_im,
                                       SolverOptions opts) {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) {
    throw std::invalid_argument("gamma must be positive and finite");
  }
  if (!(v_im > 0.0)) throw std::invalid_argument("density smoothing v_im must be > 0");
  std::vector<double> out(xs.size(), 0.0);
  std::complex<double> v(-0.5 / std::max(law.max_atom(), 1.0), 1e-2);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const std::complex<double> z(xs[i], v_im);
    for (int it = 0; it < opts.max_iter; ++it) {
      const std::complex<double> next =
          (1.0 - opts.damping) * v + opts.damping * fixed_point_map(v, z, law, gamma);
      const double step = std::abs(next - v);
      v = next;
      if (step <= opts.tol * (1.0 + std::abs(v))) break;
    }
    const std::complex<double> m = (v - (gamma - 1.0) / z) / gamma;
    out[i] = std::max(m.imag() / M_PI, 0.0);
  }
  return out;
}

}  // namespace redpca
