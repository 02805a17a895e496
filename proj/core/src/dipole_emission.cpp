#include "nfc/dipole_emission.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>

#include "nfc/errors.hpp"
#include "nfc/numerics.hpp"
#include "parallel.hpp"

namespace nfc {

using numerics::kPi;
using cd = std::complex<double>;

namespace {

constexpr cd kI{0.0, 1.0};

// Local-frame unit vectors (r, phi, z) of the three basis orientations.
constexpr std::array<std::array<double, 3>, 3> kBasis{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

int basis_index(Orientation o) {
  switch (o) {
    case Orientation::radial: return 0;
    case Orientation::azimuthal: return 1;
    case Orientation::axial: return 2;
    default: return -1;
  }
}

// Combine per-basis values for an orientation: the basis value itself, or
// the mean of all three for the isotropic average.
double pick(const std::array<double, 3>& v, Orientation o) {
  const int i = basis_index(o);
  return i >= 0 ? v[i] : (v[0] + v[1] + v[2]) / 3.0;
}

// J_n, Y_n and derivatives for n = 0..n_max at one argument. Y runs by
// upward recurrence and may overflow to inf at large order, small x.
struct CylinderTable {
  std::vector<double> j, jp, y, yp;

  CylinderTable(int n_max, double x, bool with_y) {
    j.resize(n_max + 2);
    for (int n = 0; n <= n_max + 1; ++n) j[n] = std::cyl_bessel_j(static_cast<double>(n), x);
    jp.resize(n_max + 1);
    for (int n = 0; n <= n_max; ++n) jp[n] = n == 0 ? -j[1] : 0.5 * (j[n - 1] - j[n + 1]);
    if (!with_y) return;
    y.resize(n_max + 2);
    y[0] = std::cyl_neumann(0.0, x);
    y[1] = std::cyl_neumann(1.0, x);
    for (int n = 1; n <= n_max; ++n) y[n + 1] = 2.0 * n / x * y[n] - y[n - 1];
    yp.resize(n_max + 1);
    for (int n = 0; n <= n_max; ++n) yp[n] = n == 0 ? -y[1] : 0.5 * (y[n - 1] - y[n + 1]);
  }

  static double sign(int m) { return (m < 0 && (-m) % 2 == 1) ? -1.0 : 1.0; }
  double J(int m) const { return sign(m) * j[std::abs(m)]; }
  double Jp(int m) const { return sign(m) * jp[std::abs(m)]; }
  cd H(int m) const { return sign(m) * cd(j[std::abs(m)], y[std::abs(m)]); }
  cd Hp(int m) const { return sign(m) * cd(jp[std::abs(m)], yp[std::abs(m)]); }
};

struct Setup {
  double k0, k, n1sq, n2sq, a, r0;

  Setup(const FiberGeometry& g, double wavelength, double r0_)
      : k0(2.0 * kPi / wavelength),
        k(g.clad_index * k0),
        n1sq(g.core_index * g.core_index),
        n2sq(g.clad_index * g.clad_index),
        a(g.radius),
        r0(r0_) {}
};

using Triple = std::array<cd, 3>;

// Outgoing cylindrical-wave amplitudes of E_z and Z0*H_z at one polar angle,
// for the three basis dipoles at phi0 = 0. Index m + m_max.
struct OrderAmplitudes {
  int m_max = 0;
  std::vector<Triple> c, d;

  const Triple& c_at(int m) const { return c[m + m_max]; }
  const Triple& d_at(int m) const { return d[m + m_max]; }
};

bool finite(cd z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

// Incident (source) coefficients of E_z and Z0*H_z for radial function R at r0.
void source_terms(const Setup& s, int m, double beta, double kappa, cd r, cd rp, Triple& e,
                  Triple& h) {
  for (int o = 0; o < 3; ++o) {
    const double pr = kBasis[o][0], pp = kBasis[o][1], pz = kBasis[o][2];
    e[o] = kI / (8.0 * kPi * s.n2sq) *
           (kappa * kappa * pz * r - kI * beta * kappa * pr * rp - (m * beta / s.r0) * pp * r);
    h[o] = s.k0 / (8.0 * kPi) * (-(kI * static_cast<double>(m) / s.r0) * pr * r - kappa * pp * rp);
  }
}

class OrderSolver {
 public:
  OrderSolver(const Setup& s, double theta, int n_max)
      : s_(s),
        beta_(s.k * std::cos(theta)),
        kappa_(s.k * std::sin(theta)),
        h_(std::sqrt(s.k0 * s.k0 * s.n1sq - beta_ * beta_)),
        n_max_(n_max),
        at_a_(n_max, kappa_ * s.a, true),
        inside_(n_max, h_ * s.a, false),
        at_r0_(n_max, kappa_ * s.r0, true) {}

  int capacity() const { return n_max_; }

  // Total outgoing amplitudes (c, d) of order m. Where H_m(kappa a) or
  // H_m(kappa r0) leave floating range the scattered part is negligible
  // (it scales like J_m(kappa a) H_m(kappa r0) / H_m(kappa a)) and only the
  // free-space part is kept.
  void solve(int m, Triple& c, Triple& d) const {
    const cd hk = at_a_.H(m), hkp = at_a_.Hp(m);
    const cd hr = at_r0_.H(m), hrp = at_r0_.Hp(m);
    Triple e_out, h_out;
    source_terms(s_, m, beta_, kappa_, at_r0_.J(m), at_r0_.Jp(m), e_out, h_out);
    for (int o = 0; o < 3; ++o) {
      c[o] = finite(e_out[o]) ? e_out[o] : 0.0;
      d[o] = finite(h_out[o]) ? h_out[o] : 0.0;
    }
    if (!finite(hk) || !finite(hkp) || !finite(hr) || !finite(hrp) || hk == 0.0) return;

    const double jh = inside_.J(m), jhp = inside_.Jp(m);
    const double jk = at_a_.J(m), jkp = at_a_.Jp(m);
    const double a = s_.a, k0 = s_.k0;
    const double h = h_, kap = kappa_;
    const double bm = beta_ * m;
    const cd ratio = hkp / hk;

    Triple e_in, h_in;
    source_terms(s_, m, beta_, kap, hr, hrp, e_in, h_in);

    // Unknowns: inside A, B (E_z, H_z on J_m(h r)); scattered C' = C H_m(kappa a), D' likewise.
    Eigen::Matrix4cd mat;
    mat << jh, 0.0, -1.0, 0.0,
           0.0, jh, 0.0, -1.0,
           -bm / (h * h * a) * jh, -kI * k0 / h * jhp, bm / (kap * kap * a), kI * k0 / kap * ratio,
           kI * k0 * s_.n1sq / h * jhp, -bm / (h * h * a) * jh,
           -kI * k0 * s_.n2sq / kap * ratio, bm / (kap * kap * a);
    Eigen::Matrix<cd, 4, 3> rhs;
    for (int o = 0; o < 3; ++o) {
      rhs(0, o) = e_in[o] * jk;
      rhs(1, o) = h_in[o] * jk;
      rhs(2, o) = -bm / (kap * kap * a) * e_in[o] * jk - kI * k0 / kap * h_in[o] * jkp;
      rhs(3, o) = -bm / (kap * kap * a) * h_in[o] * jk + kI * k0 * s_.n2sq / kap * e_in[o] * jkp;
    }
    // Row then column equilibration before the pivoted solve.
    Eigen::Vector4d row_scale, col_scale;
    for (int i = 0; i < 4; ++i) {
      const double rmax = mat.row(i).cwiseAbs().maxCoeff();
      row_scale(i) = rmax > 0.0 ? 1.0 / rmax : 1.0;
    }
    mat = row_scale.asDiagonal() * mat;
    rhs = row_scale.asDiagonal() * rhs;
    for (int j = 0; j < 4; ++j) {
      const double cmax = mat.col(j).cwiseAbs().maxCoeff();
      col_scale(j) = cmax > 0.0 ? 1.0 / cmax : 1.0;
    }
    mat = mat * col_scale.asDiagonal();
    const Eigen::Matrix<cd, 4, 3> sol = col_scale.asDiagonal() * mat.fullPivLu().solve(rhs);
    for (int o = 0; o < 3; ++o) {
      const cd cc = e_out[o] + sol(2, o) / hk;
      const cd dd = h_out[o] + sol(3, o) / hk;
      if (finite(cc) && finite(dd)) {
        c[o] = cc;
        d[o] = dd;
      }
    }
  }

 private:
  const Setup& s_;
  double beta_, kappa_, h_;
  int n_max_;
  CylinderTable at_a_, inside_, at_r0_;
};

double order_power(const Setup& s, const Triple& c, const Triple& d) {
  double p = 0.0;
  for (int o = 0; o < 3; ++o) p += s.n2sq * std::norm(c[o]) + std::norm(d[o]);
  return p;
}

OrderAmplitudes amplitudes_at(const Setup& s, double theta, const RadiationQuadratureSpec& quad) {
  const bool fixed = quad.m_max > 0;
  int capacity = fixed ? quad.m_max : std::max(16, static_cast<int>(2.0 * s.k * s.r0) + 16);
  if (!fixed) capacity = std::min(capacity, quad.m_cap);
  std::vector<Triple> cs, ds;  // m = 0 first, then +m at 2m-1 and -m at 2m
  auto solver = std::make_unique<OrderSolver>(s, theta, capacity + 1);
  double total = 0.0;
  int quiet = 0;
  int m = 0;
  for (;; ++m) {
    if (fixed && m > quad.m_max) break;
    if (m > capacity) {
      if (capacity >= quad.m_cap) {
        throw ConvergenceError("radiation: azimuthal order cap reached", 0.0, total);
      }
      capacity = std::min(2 * capacity, quad.m_cap);
      solver = std::make_unique<OrderSolver>(s, theta, capacity + 1);
    }
    Triple c, d;
    double p = 0.0;
    solver->solve(m, c, d);
    cs.push_back(c);
    ds.push_back(d);
    p += order_power(s, c, d);
    if (m > 0) {
      solver->solve(-m, c, d);
      cs.push_back(c);
      ds.push_back(d);
      p += order_power(s, c, d);
    }
    total += p;
    if (!fixed) {
      quiet = (p <= quad.m_stop * total) ? quiet + 1 : 0;
      if (m >= 5 && quiet >= 2) break;
    }
  }
  const int m_max = fixed ? quad.m_max : m;
  OrderAmplitudes out;
  out.m_max = m_max;
  out.c.assign(2 * m_max + 1, Triple{});
  out.d.assign(2 * m_max + 1, Triple{});
  for (int n = 0; n <= m_max; ++n) {
    out.c[m_max + n] = cs[n == 0 ? 0 : 2 * n - 1];
    out.d[m_max + n] = ds[n == 0 ? 0 : 2 * n - 1];
    if (n > 0) {
      out.c[m_max - n] = cs[2 * n];
      out.d[m_max - n] = ds[2 * n];
    }
  }
  return out;
}

// Sum over orders of the outgoing power at one polar angle, per basis dipole.
std::array<double, 3> basis_power(const Setup& s, const OrderAmplitudes& amp) {
  std::array<double, 3> p{0.0, 0.0, 0.0};
  for (int m = -amp.m_max; m <= amp.m_max; ++m) {
    for (int o = 0; o < 3; ++o) {
      p[o] += s.n2sq * std::norm(amp.c_at(m)[o]) + std::norm(amp.d_at(m)[o]);
    }
  }
  return p;
}

// Gamma_r/gamma0 per basis dipole with a fixed n-node rule in theta.
std::array<double, 3> radiation_basis_rates(const Setup& s, int nodes,
                                            const RadiationQuadratureSpec& quad) {
  const numerics::QuadratureRule rule = numerics::gauss_legendre(nodes, 0.0, kPi);
  std::array<double, 3> sum{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double theta = rule.nodes[i];
    const std::array<double, 3> p = basis_power(s, amplitudes_at(s, theta, quad));
    for (int o = 0; o < 3; ++o) sum[o] += rule.weights[i] * p[o] / std::sin(theta);
  }
  const double scale = 48.0 * kPi * kPi / (s.k0 * s.k0 * s.k0 * s.k);
  for (double& v : sum) v *= scale;
  return sum;
}

std::array<double, 3> converged_radiation_rates(const Setup& s,
                                                const RadiationQuadratureSpec& quad) {
  quad.validate();
  int nodes = quad.nodes;
  std::array<double, 3> prev = radiation_basis_rates(s, nodes, quad);
  double prev_iso = pick(prev, Orientation::isotropic_average);
  double before_iso = std::nan("");
  while (2 * nodes <= quad.max_nodes) {
    nodes *= 2;
    const std::array<double, 3> cur = radiation_basis_rates(s, nodes, quad);
    const double scale = std::max({cur[0], cur[1], cur[2]});
    double worst = 0.0;
    for (int o = 0; o < 3; ++o) worst = std::max(worst, std::abs(cur[o] - prev[o]) / scale);
    if (worst <= quad.rel_tol) return cur;
    before_iso = prev_iso;
    prev = cur;
    prev_iso = pick(cur, Orientation::isotropic_average);
  }
  throw ConvergenceError("radiation: node doubling did not converge", before_iso, prev_iso);
}

std::array<double, 3> guided_basis_rates(const GuidedMode& mode, const FiberGeometry& geom,
                                         double r0, double phi0) {
  std::array<double, 3> rate{0.0, 0.0, 0.0};
  const int pols = mode.polarization_count();
  for (int f : {1, -1}) {
    for (int p = 0; p < pols; ++p) {
      const ModeFieldValue e = mode_field(mode, geom, {r0, phi0, 0.0}, f, p == 0 ? 1 : -1);
      for (int o = 0; o < 3; ++o) rate[o] += std::norm(e.e[o]);
    }
  }
  const double scale = 3.0 * kPi / (4.0 * kVacuumImpedance * mode.k0 * mode.k0);
  for (double& v : rate) v *= scale;
  return rate;
}

// Far-field sum S = sum_m (-i)^m a_m e^{i m (phi - phi0)} for each basis dipole.
std::array<cd, 3> far_sum(const OrderAmplitudes& amp, bool electric, double dphi) {
  std::array<cd, 3> s{0.0, 0.0, 0.0};
  for (int m = -amp.m_max; m <= amp.m_max; ++m) {
    const cd phase = std::pow(-kI, m) * std::exp(kI * (m * dphi));
    const Triple& t = electric ? amp.c_at(m) : amp.d_at(m);
    for (int o = 0; o < 3; ++o) s[o] += phase * t[o];
  }
  return s;
}

// dGamma/dOmega per basis dipole in direction (theta, phi) for emitter at phi0.
std::array<double, 3> basis_intensity(const Setup& s, const OrderAmplitudes& amp, double theta,
                                      double phi, double phi0) {
  const std::array<cd, 3> sc = far_sum(amp, true, phi - phi0);
  const std::array<cd, 3> sd = far_sum(amp, false, phi - phi0);
  const double sin_t = std::sin(theta);
  const double scale = 24.0 * kPi / (s.k0 * s.k0 * s.k0 * s.k * sin_t * sin_t);
  std::array<double, 3> out{};
  for (int o = 0; o < 3; ++o) out[o] = scale * (s.n2sq * std::norm(sc[o]) + std::norm(sd[o]));
  return out;
}

double combine_ratio(const std::array<double, 3>& num, const std::array<double, 3>& den,
                     Orientation o) {
  const int i = basis_index(o);
  if (i >= 0) return num[i] / den[i];
  return (num[0] + num[1] + num[2]) / (den[0] + den[1] + den[2]);
}

struct ConePoint {
  double theta, phi, weight;
};

// Directions inside the cone of half-angle alpha around -y.
std::vector<ConePoint> cone_points(double alpha, const ConeSpec& cone) {
  const numerics::QuadratureRule psi = numerics::gauss_legendre(cone.n_psi, 0.0, alpha);
  std::vector<ConePoint> pts;
  for (std::size_t i = 0; i < psi.nodes.size(); ++i) {
    const double sp = std::sin(psi.nodes[i]), cp = std::cos(psi.nodes[i]);
    for (int j = 0; j < cone.n_chi; ++j) {
      const double chi = 2.0 * kPi * (j + 0.5) / cone.n_chi;
      const double dx = sp * std::cos(chi), dy = -cp, dz = sp * std::sin(chi);
      pts.push_back({std::acos(std::clamp(dz, -1.0, 1.0)), std::atan2(dy, dx),
                     psi.weights[i] * sp * 2.0 * kPi / cone.n_chi});
    }
  }
  return pts;
}

struct ConeAmplitudes {
  std::vector<ConePoint> points;
  std::vector<OrderAmplitudes> amps;
  std::array<double, 3> gamma_r;
};

ConeAmplitudes cone_amplitudes(const Setup& s, double numerical_aperture, const ConeSpec& cone,
                               const RadiationQuadratureSpec& quad) {
  ConeAmplitudes out;
  out.points = cone_points(std::asin(std::min(numerical_aperture, 1.0)), cone);
  out.amps.reserve(out.points.size());
  for (const ConePoint& p : out.points) out.amps.push_back(amplitudes_at(s, p.theta, quad));
  out.gamma_r = converged_radiation_rates(s, quad);
  return out;
}

double cone_factor(const Setup& s, const ConeAmplitudes& ca, double phi0, Orientation o,
                   double fraction) {
  std::array<double, 3> collected{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < ca.points.size(); ++i) {
    const ConePoint& p = ca.points[i];
    const std::array<double, 3> v = basis_intensity(s, ca.amps[i], p.theta, p.phi, phi0);
    for (int k = 0; k < 3; ++k) collected[k] += p.weight * v[k];
  }
  return combine_ratio(collected, ca.gamma_r, o) / fraction;
}

void check_phi0(double phi0) {
  if (phi0 < -1e-12 || phi0 > kPi + 1e-12) {
    throw DomainError("emitter azimuth must lie on the upper half, [0, pi]");
  }
}

}  // namespace

Orientation parse_orientation(const std::string& text) {
  if (text == "radial") return Orientation::radial;
  if (text == "azimuthal") return Orientation::azimuthal;
  if (text == "axial") return Orientation::axial;
  if (text == "isotropic" || text == "isotropic_average") return Orientation::isotropic_average;
  throw DomainError("unknown orientation '" + text + "'");
}

std::string to_string(Orientation o) {
  switch (o) {
    case Orientation::radial: return "radial";
    case Orientation::azimuthal: return "azimuthal";
    case Orientation::axial: return "axial";
    default: return "isotropic_average";
  }
}

Denominator parse_denominator(const std::string& text) {
  if (text == "all" || text == "all_guided") return Denominator::all_guided;
  if (text == "he11" || text == "he11_only") return Denominator::he11_only;
  throw DomainError("unknown denominator '" + text + "' (expected all|he11)");
}

std::string to_string(Denominator d) {
  return d == Denominator::all_guided ? "all_guided" : "he11_only";
}

double DipoleEmitter::resolved_radius(const FiberGeometry& geom) const {
  if (radial_position == 0.0) return geom.radius;
  if (radial_position < geom.radius) throw DomainError("emitter inside the fiber");
  return radial_position;
}

void RadiationQuadratureSpec::validate() const {
  if (m_max != 0 && m_max < 5) throw DomainError("radiation quadrature: m_max must be >= 5");
  if (nodes < 2) throw DomainError("radiation quadrature: need at least 2 nodes");
  if (!(rel_tol > 0.0 && rel_tol <= 1e-4)) {
    throw DomainError("radiation quadrature: tolerance must lie in (0, 1e-4]");
  }
}

double guided_rate(const GuidedMode& mode, const FiberGeometry& geom, const DipoleEmitter& dipole) {
  const double r0 = dipole.resolved_radius(geom);
  return pick(guided_basis_rates(mode, geom, r0, dipole.azimuth), dipole.orientation);
}

double radiation_rate(const FiberGeometry& geom, double wavelength, const DipoleEmitter& dipole,
                      const RadiationQuadratureSpec& quad) {
  geom.validate();
  if (!(wavelength > 0.0)) throw DomainError("wavelength must be positive");
  const Setup s(geom, wavelength, dipole.resolved_radius(geom));
  return pick(converged_radiation_rates(s, quad), dipole.orientation);
}

RateBreakdown channeling_efficiency(const FiberGeometry& geom, double wavelength,
                                    const DipoleEmitter& dipole, Denominator denominator,
                                    const RadiationQuadratureSpec& quad) {
  RateBreakdown out;
  out.denominator = denominator;
  for (const GuidedMode& m : solve_guided_modes(geom, wavelength)) {
    const double r = guided_rate(m, geom, dipole);
    out.modes.push_back({m.family, r});
    out.gamma_guided += r;
    if (m.family == ModeFamily{ModeKind::HE, 1, 1}) out.gamma_he11 = r;
  }
  out.gamma_radiation = radiation_rate(geom, wavelength, dipole, quad);
  const double guided = denominator == Denominator::all_guided ? out.gamma_guided : out.gamma_he11;
  const double total = guided + out.gamma_radiation;
  out.eta_c = total > 0.0 ? out.gamma_he11 / total : 0.0;
  return out;
}

std::vector<CurvePoint> efficiency_curve(const std::vector<double>& x_values,
                                         const CurveOptions& opts) {
  for (double x : x_values) {
    if (!(x > 0.0)) throw DomainError("size parameter must be positive");
  }
  std::vector<CurvePoint> out(x_values.size());
  detail::parallel_for(x_values.size(), opts.threads, [&](std::size_t i) {
    const double x = x_values[i];
    const FiberGeometry g{x * opts.wavelength / (2.0 * kPi), opts.core_index, opts.clad_index};
    DipoleEmitter d;
    d.orientation = opts.orientation;
    out[i] = {x, channeling_efficiency(g, opts.wavelength, d, opts.denominator, opts.quad)};
  });
  return out;
}

double FarFieldPattern::sphere_integral() const {
  double sum = 0.0;
  const double dphi = 2.0 * kPi / static_cast<double>(phi.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    for (std::size_t j = 0; j < phi.size(); ++j) sum += theta_weights[i] * dphi * at(i, j);
  }
  return sum;
}

FarFieldPattern far_field(const FiberGeometry& geom, double wavelength, const DipoleEmitter& dipole,
                          int n_theta, int n_phi, const RadiationQuadratureSpec& quad) {
  geom.validate();
  if (n_theta < 2 || n_phi < 1) throw DomainError("far field: grid too small");
  const Setup s(geom, wavelength, dipole.resolved_radius(geom));
  const std::array<double, 3> gamma = converged_radiation_rates(s, quad);

  FarFieldPattern out;
  const numerics::QuadratureRule rule = numerics::gauss_legendre(n_theta, 0.0, kPi);
  out.theta = rule.nodes;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    out.theta_weights.push_back(rule.weights[i] * std::sin(rule.nodes[i]));
  }
  for (int j = 0; j < n_phi; ++j) out.phi.push_back(2.0 * kPi * j / n_phi);
  out.values.resize(out.theta.size() * out.phi.size());
  const int idx = basis_index(dipole.orientation);
  const double norm = idx >= 0 ? gamma[idx] : gamma[0] + gamma[1] + gamma[2];
  for (std::size_t i = 0; i < out.theta.size(); ++i) {
    const OrderAmplitudes amp = amplitudes_at(s, out.theta[i], quad);
    for (std::size_t j = 0; j < out.phi.size(); ++j) {
      const std::array<double, 3> v =
          basis_intensity(s, amp, out.theta[i], out.phi[j], dipole.azimuth);
      const double num = idx >= 0 ? v[idx] : v[0] + v[1] + v[2];
      out.values[i * out.phi.size() + j] = num / norm;
    }
  }
  out.gamma_radiation = pick(gamma, dipole.orientation);
  return out;
}

double na_collection_fraction(double numerical_aperture) {
  if (!(numerical_aperture > 0.0 && numerical_aperture <= 1.0)) {
    throw DomainError("numerical aperture must lie in (0, 1]");
  }
  // 1 - sqrt(1 - NA^2) without the cancellation at small NA.
  const double na2 = numerical_aperture * numerical_aperture;
  return 0.5 * na2 / (1.0 + std::sqrt(1.0 - na2));
}

double enhancement_factor(const FiberGeometry& geom, double wavelength, const DipoleEmitter& dipole,
                          double numerical_aperture, const ConeSpec& cone,
                          const RadiationQuadratureSpec& quad) {
  geom.validate();
  check_phi0(dipole.azimuth);
  const double fraction = na_collection_fraction(numerical_aperture);
  const Setup s(geom, wavelength, dipole.resolved_radius(geom));
  const ConeAmplitudes ca = cone_amplitudes(s, numerical_aperture, cone, quad);
  return cone_factor(s, ca, dipole.azimuth, dipole.orientation, fraction);
}

std::vector<double> enhancement_profile(const FiberGeometry& geom, double wavelength,
                                        Orientation orientation, double numerical_aperture,
                                        int n_phi0, const ConeSpec& cone,
                                        const RadiationQuadratureSpec& quad) {
  geom.validate();
  if (n_phi0 < 1) throw DomainError("enhancement: need at least one emitter position");
  const double fraction = na_collection_fraction(numerical_aperture);
  const Setup s(geom, wavelength, geom.radius);
  const ConeAmplitudes ca = cone_amplitudes(s, numerical_aperture, cone, quad);
  std::vector<double> out;
  for (int i = 0; i < n_phi0; ++i) {
    const double phi0 = kPi * (i + 0.5) / n_phi0;
    out.push_back(cone_factor(s, ca, phi0, orientation, fraction));
  }
  return out;
}

double mean_enhancement(const FiberGeometry& geom, double wavelength, double numerical_aperture,
                        const EnhancementOptions& opts) {
  const std::vector<double> f =
      enhancement_profile(geom, wavelength, Orientation::isotropic_average, numerical_aperture,
                          opts.n_phi0, opts.cone, opts.quad);
  double sum = 0.0;
  for (double v : f) sum += v;
  return sum / static_cast<double>(f.size());
}

EnhancementSweep average_enhancement(const std::vector<double>& diameters, double wavelength,
                                     double numerical_aperture, const EnhancementOptions& opts) {
  if (diameters.empty()) throw DomainError("enhancement sweep: no diameters");
  EnhancementSweep out;
  out.diameters = diameters;
  out.mean_factor.resize(diameters.size());
  detail::parallel_for(diameters.size(), opts.threads, [&](std::size_t i) {
    const FiberGeometry g{0.5 * diameters[i], opts.core_index, opts.clad_index};
    out.mean_factor[i] = mean_enhancement(g, wavelength, numerical_aperture, opts);
  });
  double mean = 0.0;
  for (double v : out.mean_factor) mean += v;
  mean /= static_cast<double>(out.mean_factor.size());
  double spread = 0.0;
  for (double v : out.mean_factor) spread = std::max(spread, std::abs(v - mean));
  out.average = MeasuredValue(mean, spread, "mean enhancement");
  return out;
}

}  // namespace nfc
