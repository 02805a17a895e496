#include "nfc/fiber_modes.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include "nfc/errors.hpp"
#include "nfc/numerics.hpp"

namespace nfc {

using numerics::kPi;
using cd = std::complex<double>;

namespace {

constexpr cd kI{0.0, 1.0};

// Smallest cladding decay parameter w we try to resolve. Below it the
// fundamental mode is spread over > 1e120 radii and carries no coupling.
constexpr double kMinDecay = 1e-120;

double jn(int l, double x) { return std::cyl_bessel_j(static_cast<double>(l), x); }

// J_l'(x)
double jn_prime(int l, double x) {
  if (l == 0) return -jn(1, x);
  return 0.5 * (jn(l - 1, x) - jn(l + 1, x));
}

// K_{l-1}(w) / K_l(w), overflow-safe. For l = 0 this is K_1/K_0.
double k_ratio(int l, double w) {
  const int lower = l == 0 ? 1 : l - 1;
  return std::exp(numerics::log_bessel_k(lower, w) - numerics::log_bessel_k(l, w));
}

struct Indices {
  double n1sq, n2sq;
};

// Characteristic functions in the variable w, continuous on (0, V) and
// free of the J_l(u) poles of the textbook form. Zeros coincide with the
// exact eigenvalue equation.
double characteristic(ModeKind kind, int l, double v, double w, Indices n) {
  const double u = std::sqrt(std::max(v * v - w * w, 0.0));
  if (kind == ModeKind::TE || kind == ModeKind::TM) {
    const double lhs = w * jn(1, u) * k_ratio(1, w);  // k_ratio(1, w) = K_0(w)/K_1(w)
    return kind == ModeKind::TE ? lhs + u * jn(0, u) : n.n1sq * lhs + n.n2sq * u * jn(0, u);
  }
  const double ju = jn(l, u);
  const double jpu = jn_prime(l, u);
  const double rho = k_ratio(l, w);
  const double delta = w * rho;
  const double r2 = (w * w) / (u * u);
  const double scaled_r = l * l * (1.0 + r2) * (n.n2sq + n.n1sq * r2);
  const double dn = n.n1sq - n.n2sq;
  const double lk = l + delta;
  // Root of the quadratic without cancellation (EH branch), w^2-scaled.
  const double x_eh =
      ((n.n1sq + n.n2sq) * lk + std::sqrt(dn * dn * lk * lk + 4.0 * n.n1sq * scaled_r)) /
      (2.0 * n.n1sq);
  if (kind == ModeKind::EH) return w * w * jpu / u - ju * x_eh;
  // HE branch from the product of the roots, divided by w^2 analytically.
  const double num = n.n2sq * (2.0 * l * rho / w + rho * rho) -
                     l * l * ((n.n1sq + n.n2sq) / (u * u) + n.n1sq * w * w / (u * u * u * u));
  const double x_he = num / (n.n1sq * x_eh);
  return jpu / u - ju * x_he;
}

// Sample points over (0, V): logarithmic near w -> 0 (near-cutoff roots and
// the fundamental at small V), uniform in u elsewhere (roots ~pi apart in u).
std::vector<double> scan_grid(double v) {
  std::vector<double> grid;
  const double w_split = std::min(0.05, 0.05 * v);
  const int n_log = 320;
  const double log_lo = std::log(kMinDecay);
  const double log_hi = std::log(w_split);
  for (int i = 0; i < n_log; ++i) {
    grid.push_back(std::exp(log_lo + (log_hi - log_lo) * i / (n_log - 1)));
  }
  const double u_top = std::sqrt(v * v - w_split * w_split);
  const int n_u = std::max(400, static_cast<int>(40.0 * v));
  for (int i = 1; i < n_u; ++i) {
    const double u = u_top * (1.0 - static_cast<double>(i) / n_u);
    grid.push_back(std::sqrt(v * v - u * u));
  }
  // Approach u -> 0 geometrically.
  for (int k = 1; k <= 12; ++k) {
    const double u = u_top / n_u * std::pow(10.0, -k);
    grid.push_back(std::sqrt(v * v - u * u));
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  grid.erase(std::remove_if(grid.begin(), grid.end(), [v](double w) { return !(w < v); }),
             grid.end());
  return grid;
}

// Roots w of one family, sorted by decreasing w (= decreasing beta).
std::vector<double> family_roots(ModeKind kind, int l, double v, Indices n, int max_roots) {
  const std::vector<double> grid = scan_grid(v);
  auto f = [&](double w) { return characteristic(kind, l, v, w, n); };
  std::vector<double> roots;
  double prev_w = grid.front();
  double prev_f = f(prev_w);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double cur_w = grid[i];
    const double cur_f = f(cur_w);
    if (std::isfinite(prev_f) && std::isfinite(cur_f) && (prev_f > 0) != (cur_f > 0) &&
        prev_f != 0.0) {
      const double w = numerics::refine_root(f, prev_w, cur_w);
      // Sign flips pinned at u -> 0 are artefacts of the scaled form.
      if (std::sqrt(std::max(v * v - w * w, 0.0)) > 1e-6 * std::max(1.0, v)) roots.push_back(w);
    }
    prev_w = cur_w;
    prev_f = cur_f;
  }
  std::sort(roots.begin(), roots.end(), std::greater<>());
  if (static_cast<int>(roots.size()) > max_roots) roots.resize(max_roots);
  return roots;
}

// Integer-order J with J_{-n} = (-1)^n J_n.
double jn_signed(int n, double x) {
  const double v = jn(std::abs(n), x);
  return (n < 0 && (std::abs(n) % 2 == 1)) ? -v : v;
}

using Amplitudes = GuidedMode::Amplitudes;

Amplitudes from_longitudinal(cd a, cd b, double beta, double k0, double n_sq) {
  return {a, b, beta * a + kI * k0 * b, beta * a - kI * k0 * b, beta * b - kI * k0 * n_sq * a,
          beta * b + kI * k0 * n_sq * a};
}

// Raw (unnormalized) amplitudes of the forward +l state in both regions.
void set_amplitudes(GuidedMode& m, const FiberGeometry& g) {
  const int l = m.family.l;
  const double n1sq = g.core_index * g.core_index;
  const double n2sq = g.clad_index * g.clad_index;
  const double j = jn(l, m.u);
  if (m.family.kind == ModeKind::TE || m.family.kind == ModeKind::TM) {
    const cd a = m.family.kind == ModeKind::TM ? 1.0 : 0.0;
    const cd b = m.family.kind == ModeKind::TE ? 1.0 : 0.0;
    m.core = from_longitudinal(a, b, m.beta, m.k0, n1sq);
    m.clad = from_longitudinal(a * j, b * j, m.beta, m.k0, n2sq);
    return;
  }
  // From E_phi continuity, P+ and P- are proportional to t_plus and t_minus;
  // both are sums of same-signed terms near cutoff, so the small one keeps
  // full relative precision.
  const double kl = numerics::log_bessel_k(l, m.w);
  const double k_lower = std::exp(numerics::log_bessel_k(l - 1, m.w) - kl);
  const double k_upper = std::exp(numerics::log_bessel_k(l + 1, m.w) - kl);
  const double t_plus = j * k_upper / m.w + jn(l + 1, m.u) / m.u;
  const double t_minus = j * k_lower / m.w - jn(l - 1, m.u) / m.u;
  const double a_rad = g.radius;
  const double h_sq = (m.u / a_rad) * (m.u / a_rad);
  const double q_sq = (m.w / a_rad) * (m.w / a_rad);
  const double b_sq = m.beta * m.beta;
  const double k0sq = m.k0 * m.k0;
  const cd ci = kI / (2.0 * m.k0);

  Amplitudes core;
  core.ez = 0.5 * (t_plus + t_minus);
  core.hz = -kI * m.beta * (t_plus - t_minus) / (2.0 * m.k0);
  core.p_plus = m.beta * t_plus;
  core.p_minus = m.beta * t_minus;
  core.q_plus = -ci * (t_plus * (b_sq + k0sq * n1sq) + t_minus * h_sq);
  core.q_minus = ci * (t_plus * h_sq + t_minus * (k0sq * n1sq + b_sq));

  Amplitudes clad;
  clad.ez = core.ez * j;
  clad.hz = core.hz * j;
  clad.p_plus = core.p_plus * j;
  clad.p_minus = core.p_minus * j;
  clad.q_plus = -ci * j * (t_plus * (b_sq + k0sq * n2sq) - t_minus * q_sq);
  clad.q_minus = ci * j * (-t_plus * q_sq + t_minus * (k0sq * n2sq + b_sq));
  m.core = core;
  m.clad = clad;
}

// Amplitudes of the (direction, polarization) state. With B -> f*p*B and
// beta -> f*beta: P+- -> f*P+- (p = +1) or f*P-+ (p = -1), Q+- -> Q+- or -Q-+.
Amplitudes state_amplitudes(const Amplitudes& base, const GuidedMode& m, int f, int p,
                            double n_sq) {
  if (m.family.l == 0) {
    return from_longitudinal(base.ez, base.hz, f * m.beta, m.k0, n_sq);
  }
  Amplitudes s = base;
  const double ff = f;
  if (p > 0) {
    s.p_plus = ff * base.p_plus;
    s.p_minus = ff * base.p_minus;
  } else {
    s.hz = -base.hz;
    s.p_plus = ff * base.p_minus;
    s.p_minus = ff * base.p_plus;
    s.q_plus = -base.q_minus;
    s.q_minus = -base.q_plus;
  }
  if (f < 0) s.hz = -s.hz;
  return s;
}

ModeFieldValue field_at(const GuidedMode& m, const FiberGeometry& g, const CylindricalPoint& pt,
                        int direction, int polarization, bool inside) {
  if (pt.r < 0.0) throw DomainError("mode_field: negative radius");
  const int f = direction >= 0 ? 1 : -1;
  const int p = (m.family.l == 0 || polarization >= 0) ? 1 : -1;
  const int l = p * m.family.l;
  const double beta = f * m.beta;
  const double a = g.radius;

  ModeFieldValue out;
  if (inside) {
    const Amplitudes s = state_amplitudes(m.core, m, f, p, g.core_index * g.core_index);
    const double h = m.u / a;
    const double x = h * pt.r;
    const double zl = jn_signed(l, x);
    const double zm = jn_signed(l - 1, x);
    const double zp = jn_signed(l + 1, x);
    out.e[0] = kI / (2.0 * h) * (s.p_plus * zm - s.p_minus * zp);
    out.e[1] = -1.0 / (2.0 * h) * (s.p_plus * zm + s.p_minus * zp);
    out.e[2] = s.ez * zl;
    out.h[0] = kI / (2.0 * h) * (s.q_plus * zm - s.q_minus * zp);
    out.h[1] = -1.0 / (2.0 * h) * (s.q_plus * zm + s.q_minus * zp);
    out.h[2] = s.hz * zl;
  } else {
    const Amplitudes s = state_amplitudes(m.clad, m, f, p, g.clad_index * g.clad_index);
    const double q = m.w / a;
    const double x = q * pt.r;
    const int al = m.family.l;
    const double log_kw = numerics::log_bessel_k(al, m.w);
    const double zl = std::exp(numerics::log_bessel_k(al, x) - log_kw);
    const double zm = std::exp(numerics::log_bessel_k(std::abs(l - 1), x) - log_kw);
    const double zp = std::exp(numerics::log_bessel_k(std::abs(l + 1), x) - log_kw);
    out.e[0] = kI / (2.0 * q) * (s.p_plus * zm + s.p_minus * zp);
    out.e[1] = 1.0 / (2.0 * q) * (-s.p_plus * zm + s.p_minus * zp);
    out.e[2] = s.ez * zl;
    out.h[0] = kI / (2.0 * q) * (s.q_plus * zm + s.q_minus * zp);
    out.h[1] = 1.0 / (2.0 * q) * (-s.q_plus * zm + s.q_minus * zp);
    out.h[2] = s.hz * zl;
  }
  const cd phase = std::exp(kI * (static_cast<double>(l) * pt.phi + beta * pt.z));
  for (auto& c : out.e) c *= phase;
  for (auto& c : out.h) c *= phase;
  return out;
}

double power_density(const GuidedMode& m, const FiberGeometry& g, double r) {
  const ModeFieldValue f = field_at(m, g, {r, 0.0, 0.0}, 1, 1, r < g.radius);
  return (f.e[0] * std::conj(f.h[1]) - f.e[1] * std::conj(f.h[0])).real() * r;
}

double power_integral(const GuidedMode& m, const FiberGeometry& g) {
  const double a = g.radius;
  const double q = m.w / a;
  auto core = [&](double r) { return power_density(m, g, r); };
  const double p_core = numerics::integrate(core, 0.0, a, 1e-12).value;
  // Cladding: [a, a + 1/q] in log r (power-law part near cutoff), then the tail.
  const double r_mid = a + 1.0 / q;
  auto clad_log = [&](double s) {
    const double r = std::exp(s);
    return power_density(m, g, r) * r;
  };
  const double p_near = numerics::integrate(clad_log, std::log(a), std::log(r_mid), 1e-12).value;
  auto tail = [&](double r) { return power_density(m, g, r); };
  const double p_tail = numerics::integrate_to_infinity(tail, r_mid, 0.5 / q, 1e-12).value;
  return numerics::kPi * (p_core + p_near + p_tail) / kVacuumImpedance;
}

GuidedMode build_mode(const FiberGeometry& g, double wavelength, ModeFamily family, double w) {
  GuidedMode m;
  m.family = family;
  m.wavelength = wavelength;
  m.k0 = 2.0 * kPi / wavelength;
  m.v_number = v_number(g, wavelength);
  m.w = w;
  m.u = std::sqrt(std::max(m.v_number * m.v_number - w * w, 0.0));
  const double q = w / g.radius;
  const double n2k0 = g.clad_index * m.k0;
  m.beta = std::sqrt(n2k0 * n2k0 + q * q);
  set_amplitudes(m, g);
  const double p = power_integral(m, g);
  if (!(p > 0.0)) throw ConvergenceError("mode power is not positive", 0.0, p);
  m.norm = 1.0 / std::sqrt(p);
  for (Amplitudes* amp : {&m.core, &m.clad}) {
    for (cd* c : {&amp->ez, &amp->hz, &amp->p_plus, &amp->p_minus, &amp->q_plus, &amp->q_minus}) {
      *c *= m.norm;
    }
  }
  return m;
}

}  // namespace

void FiberGeometry::validate() const {
  if (!(radius > 0.0)) throw DomainError("fiber radius must be positive");
  if (!(clad_index >= 1.0)) throw DomainError("cladding index must be >= 1");
  if (!(core_index > clad_index)) throw DomainError("core index must exceed cladding index");
}

std::string ModeFamily::name() const {
  const char* k = kind == ModeKind::HE ? "HE" : kind == ModeKind::EH ? "EH"
                : kind == ModeKind::TE ? "TE" : "TM";
  return std::string(k) + std::to_string(l) + std::to_string(m);
}

double v_number(const FiberGeometry& geom, double wavelength) {
  if (!(wavelength > 0.0)) throw DomainError("wavelength must be positive");
  if (!(geom.radius > 0.0)) throw DomainError("fiber radius must be positive");
  const double na_sq = geom.core_index * geom.core_index - geom.clad_index * geom.clad_index;
  if (na_sq < 0.0) throw DomainError("core index below cladding index");
  return 2.0 * kPi * geom.radius / wavelength * std::sqrt(na_sq);
}

std::vector<GuidedMode> solve_guided_modes(const FiberGeometry& geom, double wavelength,
                                           const ModeSolverOptions& opts) {
  geom.validate();
  const double v = v_number(geom, wavelength);
  std::vector<GuidedMode> modes;
  if (v < 1e-6) return modes;
  const Indices n{geom.core_index * geom.core_index, geom.clad_index * geom.clad_index};
  const int cap = opts.max_radial_order;

  auto add_family = [&](ModeKind kind, int l) {
    const std::vector<double> roots = family_roots(kind, l, v, n, cap);
    for (std::size_t i = 0; i < roots.size(); ++i) {
      modes.push_back(build_mode(geom, wavelength, {kind, l, static_cast<int>(i) + 1}, roots[i]));
    }
    return roots.size();
  };

  add_family(ModeKind::TE, 0);
  add_family(ModeKind::TM, 0);
  for (int l = 1;; ++l) {
    const std::size_t found = add_family(ModeKind::HE, l) + add_family(ModeKind::EH, l);
    // Lowest cutoffs grow with l, so the first empty order ends the search.
    if (found == 0) break;
    if (opts.max_modes && modes.size() >= 4 * opts.max_modes && l > 2) break;
  }
  std::sort(modes.begin(), modes.end(),
            [](const GuidedMode& x, const GuidedMode& y) { return x.beta > y.beta; });
  if (opts.max_modes && modes.size() > opts.max_modes) modes.resize(opts.max_modes);
  return modes;
}

std::optional<GuidedMode> solve_fundamental_mode(const FiberGeometry& geom, double wavelength) {
  geom.validate();
  const double v = v_number(geom, wavelength);
  if (v < 1e-6) return std::nullopt;
  const Indices n{geom.core_index * geom.core_index, geom.clad_index * geom.clad_index};
  const std::vector<double> roots = family_roots(ModeKind::HE, 1, v, n, 1);
  if (roots.empty()) return std::nullopt;
  return build_mode(geom, wavelength, {ModeKind::HE, 1, 1}, roots.front());
}

ModeFieldValue mode_field(const GuidedMode& mode, const FiberGeometry& geom,
                          const CylindricalPoint& where, int direction, int polarization) {
  return field_at(mode, geom, where, direction, polarization, where.r < geom.radius);
}

ModeFieldValue mode_field_inside(const GuidedMode& mode, const FiberGeometry& geom,
                                 const CylindricalPoint& where, int direction,
                                 int polarization) {
  return field_at(mode, geom, where, direction, polarization, true);
}

double dispersion_residual(const GuidedMode& mode, const FiberGeometry& geom) {
  const double n1sq = geom.core_index * geom.core_index;
  const double n2sq = geom.clad_index * geom.clad_index;
  const double u = mode.u;
  const double w = mode.w;
  const int l = mode.family.l;
  if (mode.family.kind == ModeKind::TE || mode.family.kind == ModeKind::TM) {
    // J1/(u J0) = -(n2^2/n1^2)^s K1/(w K0), s = 0 (TE) or 1 (TM)
    const double lhs = jn(1, u) / (u * jn(0, u));
    const double ratio = mode.family.kind == ModeKind::TE ? 1.0 : n2sq / n1sq;
    const double rhs = -ratio / (w * k_ratio(1, w));
    return std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs));
  }
  // (Jt + Kt)(n1^2 Jt + n2^2 Kt) = l^2 (1/u^2 + 1/w^2)(n1^2/u^2 + n2^2/w^2), times w^4.
  const double jt = w * w * jn_prime(l, u) / (u * jn(l, u));
  const double kt = -w * k_ratio(l, w) - l;
  const double r2 = w * w / (u * u);
  const double lhs = (jt + kt) * (n1sq * jt + n2sq * kt);
  const double rhs = l * l * (1.0 + r2) * (n2sq + n1sq * r2);
  return std::abs(lhs - rhs) / std::max(std::abs(lhs), std::abs(rhs));
}

double boundary_mismatch(const GuidedMode& mode, const FiberGeometry& geom) {
  const CylindricalPoint at{geom.radius, 0.0, 0.0};
  const ModeFieldValue in = field_at(mode, geom, at, 1, 1, true);
  const ModeFieldValue out = field_at(mode, geom, at, 1, 1, false);
  double scale = 0.0;
  for (int i = 0; i < 3; ++i) scale = std::max({scale, std::abs(in.e[i]), std::abs(in.h[i])});
  double worst = 0.0;
  for (int i : {1, 2}) {
    worst = std::max(worst, std::abs(in.e[i] - out.e[i]) / scale);
    worst = std::max(worst, std::abs(in.h[i] - out.h[i]) / scale);
  }
  return worst;
}

double mode_power(const GuidedMode& mode, const FiberGeometry& geom) {
  return power_integral(mode, geom);
}

SizeParameter size_parameter(const MeasuredValue& diameter, const MeasuredValue& wavelength,
                             Propagation mode) {
  if (wavelength.value == 0.0) throw DomainError("size parameter: zero wavelength");
  if (diameter.value < 0.0 || wavelength.value < 0.0) {
    throw DomainError("size parameter: diameter and wavelength must be positive");
  }
  const MeasuredValue x = monomial(kPi, {{diameter, 1.0}, {wavelength, -1.0}}, mode);
  return {x.value, x.sigma};
}

}  // namespace nfc
