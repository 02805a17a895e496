#pragma once

// Exact guided modes of a step-index cylinder (core n1, infinite cladding n2).
//
// Fields carry the dependence exp(i(l*phi + beta*z - omega*t)). Magnetic
// fields are reported as Z0*H so that E and H share units (V/m). Modes are
// normalized to carry 1 W through the cross-section.

#include <array>
#include <complex>
#include <optional>
#include <string>
#include <vector>

#include "nfc/measured_value.hpp"

namespace nfc {

inline constexpr double kVacuumImpedance = 376.730313668;  // ohm

struct FiberGeometry {
  double radius = 0.0;      // m
  double core_index = 1.45;
  double clad_index = 1.0;

  /// Throws DomainError unless radius > 0 and core_index > clad_index >= 1.
  void validate() const;
};

enum class ModeKind { HE, EH, TE, TM };

struct ModeFamily {
  ModeKind kind = ModeKind::HE;
  int l = 1;  // azimuthal order (0 for TE/TM)
  int m = 1;  // radial order, 1-based
  std::string name() const;
  friend bool operator==(const ModeFamily&, const ModeFamily&) = default;
};

struct GuidedMode {
  ModeFamily family;
  double wavelength = 0.0;  // m
  double k0 = 0.0;          // 1/m
  double beta = 0.0;        // 1/m, > 0 (forward state)
  double u = 0.0;           // a * sqrt(n1^2 k0^2 - beta^2)
  double w = 0.0;           // a * sqrt(beta^2 - n2^2 k0^2)
  double v_number = 0.0;
  // Field amplitudes of the forward, +l state after normalization. In each
  // region the transverse fields are combinations of Z_{l-1} and Z_{l+1}
  // weighted by P+- = beta*A +- i*k0*B and Q+- = beta*B -+ i*k0*n^2*A, where
  // A, B are the E_z and Z0*H_z amplitudes. Near cutoff one of each pair is
  // tiny and is computed directly rather than by subtraction.
  struct Amplitudes {
    std::complex<double> ez, hz;
    std::complex<double> p_plus, p_minus, q_plus, q_minus;
  };
  Amplitudes core;  // radial function J_l(u r/a)
  Amplitudes clad;  // radial function K_l(w r/a) / K_l(w)
  double norm = 1.0;  // scale applied to the raw solution to reach 1 W

  double effective_index() const { return beta / k0; }
  /// Number of degenerate states per direction: 2 (+-l) for hybrid modes, 1 for TE/TM.
  int polarization_count() const { return family.l == 0 ? 1 : 2; }
};

// Cylindrical components (r, phi, z).
struct ModeFieldValue {
  std::array<std::complex<double>, 3> e;
  std::array<std::complex<double>, 3> h;  // Z0 * H
};

struct CylindricalPoint {
  double r = 0.0;
  double phi = 0.0;
  double z = 0.0;
};

double v_number(const FiberGeometry& geom, double wavelength);

struct ModeSolverOptions {
  /// Stop after this many modes (sorted by decreasing beta). 0 = no limit.
  std::size_t max_modes = 0;
  /// Radial-order cap per family; keeps large-V solves bounded.
  int max_radial_order = 50;
};

/// Every guided mode at this wavelength, sorted by decreasing effective
/// index (HE11 first). Empty if the fundamental's decay constant is below
/// the representable floor (V well below ~0.2 for glass in air).
std::vector<GuidedMode> solve_guided_modes(const FiberGeometry& geom, double wavelength,
                                           const ModeSolverOptions& opts = {});

/// HE11 only; std::nullopt when unresolvable (see solve_guided_modes).
std::optional<GuidedMode> solve_fundamental_mode(const FiberGeometry& geom, double wavelength);

/// Fields of one state of `mode`. direction = +1 forward, -1 backward;
/// polarization = +1 for exp(+i l phi), -1 for exp(-i l phi) (ignored for TE/TM).
ModeFieldValue mode_field(const GuidedMode& mode, const FiberGeometry& geom,
                          const CylindricalPoint& where, int direction = 1,
                          int polarization = 1);

/// Same, evaluated on the core side of r = a (the default picks the
/// cladding expression for r >= a).
ModeFieldValue mode_field_inside(const GuidedMode& mode, const FiberGeometry& geom,
                                 const CylindricalPoint& where, int direction = 1,
                                 int polarization = 1);

/// Relative residual of the canonical eigenvalue equation at the mode's (u, w).
double dispersion_residual(const GuidedMode& mode, const FiberGeometry& geom);

/// Largest relative jump of (E_z, E_phi, H_z, H_phi) across r = a.
double boundary_mismatch(const GuidedMode& mode, const FiberGeometry& geom);

/// Axial power of the stored mode, (1/2) Re int (E x H*).z dA, in W.
double mode_power(const GuidedMode& mode, const FiberGeometry& geom);

struct SizeParameter {
  double value = 0.0;
  double sigma = 0.0;
};

/// k0 a = pi d / lambda from a diameter and a wavelength, both in metres.
SizeParameter size_parameter(const MeasuredValue& diameter, const MeasuredValue& wavelength,
                             Propagation mode = Propagation::linear);

}  // namespace nfc
