#pragma once

// Spontaneous emission of a point dipole next to a step-index cylinder:
// decay rates into guided and radiation modes (in units of the vacuum rate
// gamma0), channeling efficiency, far-field patterns and the collection
// enhancement seen by an objective lens on the far side of the fiber.

#include <array>
#include <string>
#include <vector>

#include "nfc/fiber_modes.hpp"
#include "nfc/measured_value.hpp"

namespace nfc {

enum class Orientation { radial, azimuthal, axial, isotropic_average };

Orientation parse_orientation(const std::string& text);
std::string to_string(Orientation o);

/// Which guided rates enter the denominator of eta_c.
enum class Denominator { all_guided, he11_only };

Denominator parse_denominator(const std::string& text);
std::string to_string(Denominator d);

struct DipoleEmitter {
  double radial_position = 0.0;  // m; 0 places the emitter on the surface (r0 = a)
  double azimuth = 0.0;          // phi0, rad
  Orientation orientation = Orientation::isotropic_average;

  /// r0, resolving the on-surface default. Throws DomainError if 0 < r0 < a.
  double resolved_radius(const FiberGeometry& geom) const;
};

struct RadiationQuadratureSpec {
  int m_max = 0;             // fixed azimuthal truncation (>= 5); 0 = adaptive
  double m_stop = 1e-6;      // adaptive: stop after two orders below this relative share
  int m_cap = 400;           // adaptive ceiling
  int nodes = 256;           // initial Gauss-Legendre nodes in the polar angle
  int max_nodes = 16384;     // doubling ceiling
  double rel_tol = 1e-5;     // doubling stops when successive results agree to this

  /// Throws DomainError on m_max in 1..4, nodes < 2 or rel_tol outside (0, 1e-4].
  void validate() const;
};

struct GuidedContribution {
  ModeFamily family;
  double rate = 0.0;  // gamma / gamma0, both directions and polarizations
};

struct RateBreakdown {
  double gamma_he11 = 0.0;
  double gamma_guided = 0.0;     // all guided families
  double gamma_radiation = 0.0;
  double eta_c = 0.0;
  Denominator denominator = Denominator::all_guided;
  std::vector<GuidedContribution> modes;
};

/// Gamma/gamma0 into one guided family, summed over both directions and
/// both circular states.
double guided_rate(const GuidedMode& mode, const FiberGeometry& geom, const DipoleEmitter& dipole);

/// Gamma/gamma0 into the radiation continuum. Throws ConvergenceError when
/// node doubling exhausts max_nodes.
double radiation_rate(const FiberGeometry& geom, double wavelength, const DipoleEmitter& dipole,
                      const RadiationQuadratureSpec& quad = {});

RateBreakdown channeling_efficiency(const FiberGeometry& geom, double wavelength,
                                    const DipoleEmitter& dipole,
                                    Denominator denominator = Denominator::all_guided,
                                    const RadiationQuadratureSpec& quad = {});

struct CurveOptions {
  double core_index = 1.45;
  double clad_index = 1.0;
  double wavelength = 780e-9;  // results depend on x only; sets the length scale
  Orientation orientation = Orientation::isotropic_average;
  Denominator denominator = Denominator::all_guided;
  RadiationQuadratureSpec quad;
  unsigned threads = 0;  // 0 = hardware concurrency
};

struct CurvePoint {
  double x = 0.0;
  RateBreakdown rates;
};

/// eta_c for an on-surface emitter at each size parameter x = k0 a.
std::vector<CurvePoint> efficiency_curve(const std::vector<double>& x_values,
                                         const CurveOptions& opts = {});

/// Radiated power per solid angle on a (theta, phi) grid, theta measured
/// from the fiber axis and phi from the x axis. Normalized to unit total.
struct FarFieldPattern {
  std::vector<double> theta;          // Gauss-Legendre nodes on (0, pi)
  std::vector<double> theta_weights;  // including sin(theta)
  std::vector<double> phi;            // uniform on [0, 2 pi)
  std::vector<double> values;         // row-major [theta][phi]
  double gamma_radiation = 0.0;       // Gamma_r/gamma0 from the same amplitudes

  double at(std::size_t i_theta, std::size_t i_phi) const {
    return values[i_theta * phi.size() + i_phi];
  }
  double sphere_integral() const;
};

FarFieldPattern far_field(const FiberGeometry& geom, double wavelength, const DipoleEmitter& dipole,
                          int n_theta = 96, int n_phi = 96, const RadiationQuadratureSpec& quad = {});

/// Fraction of the full sphere inside a cone of half-angle asin(NA).
double na_collection_fraction(double numerical_aperture);

struct ConeSpec {
  int n_psi = 32;  // polar nodes inside the cone
  int n_chi = 64;  // azimuthal nodes around the cone axis
};

/// Ratio of the radiated fraction collected by a lens looking along -y
/// (emitter at phi0 on the upper half, phi0 in [0, pi]) to the bare-dipole
/// fraction na_collection_fraction(NA).
double enhancement_factor(const FiberGeometry& geom, double wavelength, const DipoleEmitter& dipole,
                          double numerical_aperture, const ConeSpec& cone = {},
                          const RadiationQuadratureSpec& quad = {});

/// F(phi0) sampled at the midpoints of `n_phi0` equal slices of [0, pi].
std::vector<double> enhancement_profile(const FiberGeometry& geom, double wavelength,
                                        Orientation orientation, double numerical_aperture,
                                        int n_phi0, const ConeSpec& cone = {},
                                        const RadiationQuadratureSpec& quad = {});

struct EnhancementOptions {
  double core_index = 1.45;
  double clad_index = 1.0;
  int n_phi0 = 32;
  ConeSpec cone;
  RadiationQuadratureSpec quad;
  unsigned threads = 0;
};

struct EnhancementSweep {
  std::vector<double> diameters;  // m
  std::vector<double> mean_factor;
  MeasuredValue average;  // mean over diameters; sigma = largest deviation from it
};

/// Isotropic emitter, F averaged over phi0 in [0, pi] for one geometry.
double mean_enhancement(const FiberGeometry& geom, double wavelength, double numerical_aperture,
                        const EnhancementOptions& opts = {});

/// mean_enhancement across diameters, summarized as a MeasuredValue.
EnhancementSweep average_enhancement(const std::vector<double>& diameters, double wavelength,
                                     double numerical_aperture,
                                     const EnhancementOptions& opts = {});

}  // namespace nfc
