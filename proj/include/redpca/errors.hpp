#pragma once

#include <stdexcept>
#include <string>

namespace redpca {

// A spike sits at or below the detection threshold: the requested inverse
// D-transform value lies above the edge limit of the D-transform.
class subcritical_error : public std::domain_error {
 public:
  explicit subcritical_error(const std::string& what) : std::domain_error(what) {}
};

// The Marchenko-Pastur fixed point failed to reach the requested tolerance.
class convergence_error : public std::runtime_error {
 public:
  convergence_error(const std::string& what, double last_residual)
      : std::runtime_error(what + " (last residual " + std::to_string(last_residual) + ")"),
        last_residual_(last_residual) {}
  double last_residual() const { return last_residual_; }

 private:
  double last_residual_;
};

// Reduction with mu = 0: observations carry no first-order signal and the
// debiasing formulas divide by mu^2.
class degenerate_reduction_error : public std::domain_error {
 public:
  explicit degenerate_reduction_error(const std::string& what) : std::domain_error(what) {}
};

}  // namespace redpca
