#include "nfc/numerics.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>

#include "nfc/errors.hpp"

namespace nfc::numerics {

QuadratureRule gauss_legendre(int n) {
  if (n < 1) throw DomainError("gauss_legendre: need at least one node");
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Tricomi initial guess, then Newton on P_n.
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = w;
    rule.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  return rule;
}

QuadratureRule gauss_legendre(int n, double lo, double hi) {
  QuadratureRule rule = gauss_legendre(n);
  const double mid = 0.5 * (lo + hi);
  const double half = 0.5 * (hi - lo);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = mid + half * rule.nodes[i];
    rule.weights[i] *= half;
  }
  return rule;
}

namespace {

// Kronrod 15-point nodes/weights with the embedded 7-point Gauss weights.
constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double lo, hi, value, error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

Segment kronrod(const std::function<double(double)>& f, double lo, double hi) {
  const double c = 0.5 * (lo + hi);
  const double h = 0.5 * (hi - lo);
  const double fc = f(c);
  double gauss = fc * kWg[3];
  double kron = fc * kWgk[7];
  for (int j = 0; j < 7; ++j) {
    const double dx = h * kXgk[j];
    const double f1 = f(c - dx);
    const double f2 = f(c + dx);
    kron += kWgk[j] * (f1 + f2);
    if (j % 2 == 1) gauss += kWg[j / 2] * (f1 + f2);
  }
  return {lo, hi, kron * h, std::abs((kron - gauss) * h)};
}

}  // namespace

IntegrationResult integrate(const std::function<double(double)>& f, double lo, double hi,
                            double rel_tol, double abs_tol, int max_intervals) {
  if (lo == hi) return {};
  std::priority_queue<Segment> heap;
  Segment first = kronrod(f, lo, hi);
  double total = first.value;
  double error = first.error;
  heap.push(first);
  int evaluations = 15;
  while (error > std::max(abs_tol, rel_tol * std::abs(total))) {
    if (static_cast<int>(heap.size()) >= max_intervals) {
      throw ConvergenceError("adaptive quadrature exhausted its interval budget", total - error,
                             total);
    }
    const Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    const Segment left = kronrod(f, worst.lo, mid);
    const Segment right = kronrod(f, mid, worst.hi);
    evaluations += 30;
    total += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    // Error bookkeeping drifts after many updates; resum occasionally.
    if (evaluations % 3000 == 0) {
      auto copy = heap;
      total = 0.0;
      error = 0.0;
      while (!copy.empty()) {
        total += copy.top().value;
        error += copy.top().error;
        copy.pop();
      }
    }
  }
  return {total, error, evaluations};
}

IntegrationResult integrate_to_infinity(const std::function<double(double)>& f, double lo,
                                        double scale, double rel_tol, double abs_tol) {
  auto mapped = [&](double t) {
    if (t >= 1.0) return 0.0;
    const double one_minus = 1.0 - t;
    const double x = lo + scale * t / one_minus;
    const double v = f(x);
    if (v == 0.0) return 0.0;
    return v * scale / (one_minus * one_minus);
  };
  return integrate(mapped, 0.0, 1.0, rel_tol, abs_tol);
}

double refine_root(const std::function<double(double)>& f, double lo, double hi,
                   const RootOptions& opts) {
  double flo = f(lo);
  double fhi = f(hi);
  if (flo == 0.0) return lo;
  if (fhi == 0.0) return hi;
  if ((flo > 0) == (fhi > 0)) throw DomainError("refine_root: interval does not bracket a root");
  int iter = 0;
  // Bisection phase.
  while (std::abs(hi - lo) > 1e-6 * std::max(std::abs(lo), std::abs(hi))) {
    if (++iter > opts.max_iterations) throw ConvergenceError("root bisection", lo, hi);
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (fm == 0.0) return mid;
    if ((fm > 0) == (flo > 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
      fhi = fm;
    }
  }
  // Illinois regula falsi: a secant step that always keeps the bracket.
  int side = 0;
  while (true) {
    if (++iter > opts.max_iterations) throw ConvergenceError("root secant", lo, hi);
    const double x = (lo * fhi - hi * flo) / (fhi - flo);
    const double width = std::abs(hi - lo);
    if (!(x > std::min(lo, hi) && x < std::max(lo, hi)) ||
        width <= opts.rel_tol * std::max(std::abs(lo), std::abs(hi))) {
      return std::abs(flo) < std::abs(fhi) ? lo : hi;
    }
    const double fx = f(x);
    if (fx == 0.0) return x;
    if ((fx > 0) == (flo > 0)) {
      lo = x;
      flo = fx;
      if (side == -1) fhi *= 0.5;
      side = -1;
    } else {
      hi = x;
      fhi = fx;
      if (side == 1) flo *= 0.5;
      side = 1;
    }
    const double next_lo = std::nextafter(lo, hi);
    if (next_lo == hi) return std::abs(flo) < std::abs(fhi) ? lo : hi;
  }
}

double log_bessel_k(int nu, double x) {
  if (x <= 0.0) throw DomainError("log_bessel_k: argument must be positive");
  nu = std::abs(nu);
  if (x < 500.0) {
    const double k = std::cyl_bessel_k(static_cast<double>(nu), x);
    if (std::isfinite(k) && k > 0.0) return std::log(k);
    // Overflow at small x: leading term Gamma(nu)/2 * (2/x)^nu.
    return std::lgamma(static_cast<double>(nu)) - std::log(2.0) + nu * std::log(2.0 / x);
  }
  // Large-argument expansion: sqrt(pi/2x) e^-x sum_k a_k(nu)/x^k.
  const double mu = 4.0 * nu * nu;
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k < 30; ++k) {
    term *= (mu - (2.0 * k - 1) * (2.0 * k - 1)) / (k * 8.0 * x);
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return 0.5 * std::log(kPi / (2.0 * x)) - x + std::log(sum);
}

std::complex<double> hankel1(int nu, double x) {
  return {std::cyl_bessel_j(static_cast<double>(nu), x),
          std::cyl_neumann(static_cast<double>(nu), x)};
}

double BesselTable::at(int order) const {
  const int n = std::abs(order);
  const double v = value[n];
  return (order < 0 && (n % 2 == 1)) ? -v : v;
}

double BesselTable::prime(int order) const {
  const int n = std::abs(order);
  const double v = derivative[n];
  return (order < 0 && (n % 2 == 1)) ? -v : v;
}

namespace {

template <class Fn>
BesselTable make_table(int n_max, double x, Fn fn, bool modified) {
  BesselTable t;
  t.value.resize(n_max + 1);
  t.derivative.resize(n_max + 1);
  std::vector<double> v(n_max + 2);
  for (int n = 0; n <= n_max + 1; ++n) v[n] = fn(static_cast<double>(n), x);
  for (int n = 0; n <= n_max; ++n) {
    t.value[n] = v[n];
    // Z_0' = -Z_1 (J, Y) or -K_1; Z_n' = (Z_{n-1} - Z_{n+1})/2 or -(K_{n-1}+K_{n+1})/2.
    if (modified) {
      t.derivative[n] = n == 0 ? -v[1] : -0.5 * (v[n - 1] + v[n + 1]);
    } else {
      t.derivative[n] = n == 0 ? -v[1] : 0.5 * (v[n - 1] - v[n + 1]);
    }
  }
  return t;
}

}  // namespace

BesselTable bessel_j_table(int n_max, double x) {
  return make_table(n_max, x, [](double n, double z) { return std::cyl_bessel_j(n, z); }, false);
}

BesselTable bessel_y_table(int n_max, double x) {
  return make_table(n_max, x, [](double n, double z) { return std::cyl_neumann(n, z); }, false);
}

BesselTable bessel_k_table(int n_max, double x) {
  return make_table(n_max, x, [](double n, double z) { return std::cyl_bessel_k(n, z); }, true);
}

LeastSquaresResult levenberg_marquardt(const ResidualFn& fn, std::vector<double> initial,
                                       std::size_t residual_count,
                                       const LeastSquaresOptions& opts) {
  const std::size_t n = initial.size();
  const std::size_t m = residual_count;
  if (m < n) throw InsufficientDataError("least squares: fewer residuals than parameters");

  std::vector<double> r(m), j(m * n), r_trial(m);
  auto sum_sq = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
  };

  LeastSquaresResult out;
  std::vector<double> p = std::move(initial);
  fn(p, r, j);
  double cost = sum_sq(r);
  double lambda = opts.initial_damping;

  Eigen::MatrixXd jtj(n, n);
  Eigen::VectorXd jtr(n);
  for (int iter = 1; iter <= opts.max_iterations; ++iter) {
    out.iterations = iter;
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> jm(
        j.data(), m, n);
    Eigen::Map<const Eigen::VectorXd> rv(r.data(), m);
    jtj = jm.transpose() * jm;
    jtr = jm.transpose() * rv;

    bool improved = false;
    double max_rel_step = 0.0;
    for (int attempt = 0; attempt < 40; ++attempt) {
      Eigen::MatrixXd a = jtj;
      for (std::size_t k = 0; k < n; ++k) a(k, k) += lambda * std::max(jtj(k, k), 1e-300);
      const Eigen::VectorXd step = a.ldlt().solve(-jtr);
      std::vector<double> trial(p);
      max_rel_step = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        trial[k] += step[k];
        max_rel_step =
            std::max(max_rel_step, std::abs(step[k]) / std::max(std::abs(p[k]), 1e-12));
      }
      fn(trial, r_trial, {});
      const double trial_cost = sum_sq(r_trial);
      if (std::isfinite(trial_cost) && trial_cost <= cost) {
        p = std::move(trial);
        cost = trial_cost;
        lambda = std::max(lambda / 3.0, 1e-12);
        improved = true;
        break;
      }
      lambda *= 4.0;
    }
    fn(p, r, j);
    // No downhill step left means we sit at the minimum to working precision.
    if (!improved || max_rel_step < opts.rel_step_tol) {
      out.converged = true;
      break;
    }
  }

  out.params = p;
  out.sum_squares = cost;
  out.param_sigma.assign(n, std::numeric_limits<double>::quiet_NaN());
  if (m > n) {
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> jm(
        j.data(), m, n);
    const Eigen::MatrixXd cov =
        (jm.transpose() * jm).completeOrthogonalDecomposition().pseudoInverse();
    const double scale = cost / static_cast<double>(m - n);
    for (std::size_t k = 0; k < n; ++k) out.param_sigma[k] = std::sqrt(cov(k, k) * scale);
  }
  return out;
}

}  // namespace nfc::numerics
