#pragma once

// Small numerical toolbox shared by the physics and analysis modules:
// Gauss-Legendre rules, adaptive Gauss-Kronrod quadrature, a bracketed
// root refiner, log-space modified Bessel functions and a damped
// least-squares solver.

#include <complex>
#include <functional>
#include <span>
#include <vector>

namespace nfc::numerics {

inline constexpr double kPi = 3.14159265358979323846;

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule on [-1, 1], nodes ascending.
QuadratureRule gauss_legendre(int n);

/// Gauss-Legendre rule mapped onto [lo, hi].
QuadratureRule gauss_legendre(int n, double lo, double hi);

struct IntegrationResult {
  double value = 0.0;
  double error = 0.0;
  int evaluations = 0;
};

/// Adaptive 7/15-point Gauss-Kronrod on [lo, hi]. Subdivides until the
/// Kronrod error estimate is below max(abs_tol, rel_tol * |I|).
/// Throws ConvergenceError when the interval budget runs out.
IntegrationResult integrate(const std::function<double(double)>& f, double lo, double hi,
                            double rel_tol = 1e-10, double abs_tol = 0.0,
                            int max_intervals = 4000);

/// Integral over [lo, inf) via the map x = lo + scale * t / (1 - t).
/// `scale` should be of the order of the decay length of f.
IntegrationResult integrate_to_infinity(const std::function<double(double)>& f, double lo,
                                        double scale, double rel_tol = 1e-10,
                                        double abs_tol = 0.0);

struct RootOptions {
  double rel_tol = 1e-15;
  int max_iterations = 200;
};

/// Refines a sign-change bracket [lo, hi] of f. Bisection narrows the
/// bracket to 1e-6 relative width, then a safeguarded secant step
/// (Illinois variant) finishes. Throws DomainError if f(lo), f(hi) do not
/// bracket a root, ConvergenceError if the iteration cap is hit.
double refine_root(const std::function<double(double)>& f, double lo, double hi,
                   const RootOptions& opts = {});

/// log K_nu(x) for integer order, valid where K_nu itself under- or overflows.
double log_bessel_k(int nu, double x);

/// J_nu(x) + i Y_nu(x) for integer nu >= 0, real x > 0.
std::complex<double> hankel1(int nu, double x);

// Cylinder functions of integer order 0..n_max at one argument, with
// derivatives. Negative orders follow from Z_{-n} = (-1)^n Z_n.
struct BesselTable {
  std::vector<double> value;
  std::vector<double> derivative;

  double at(int order) const;
  double prime(int order) const;
};

BesselTable bessel_j_table(int n_max, double x);
BesselTable bessel_y_table(int n_max, double x);
BesselTable bessel_k_table(int n_max, double x);

// Levenberg-Marquardt on r(p) with an analytic Jacobian. The residual
// callback fills `residual` (size m) and, when `jacobian` is non-null, the
// row-major m x n Jacobian.
using ResidualFn =
    std::function<void(std::span<const double> params, std::span<double> residual,
                       std::span<double> jacobian)>;

struct LeastSquaresOptions {
  double rel_step_tol = 1e-8;
  int max_iterations = 500;
  double initial_damping = 1e-3;
};

struct LeastSquaresResult {
  std::vector<double> params;
  std::vector<double> param_sigma;  // sqrt(diag((J^T J)^-1) * chi2 / dof)
  double sum_squares = 0.0;
  int iterations = 0;
  bool converged = false;
};

LeastSquaresResult levenberg_marquardt(const ResidualFn& fn, std::vector<double> initial,
                                       std::size_t residual_count,
                                       const LeastSquaresOptions& opts = {});

}  // namespace nfc::numerics
