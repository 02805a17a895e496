#pragma once

// Transmission chains and the calibration constant C that converts the
// observed count ratio of the two detection paths into an emission ratio.

#include <istream>
#include <optional>
#include <string>
#include <vector>

#include "nfc/measured_value.hpp"

namespace nfc {

/// Ordered transmission factors, each in (0, 1].
struct TransmissionChain {
  std::vector<MeasuredValue> factors;
};

/// Product of the factors. Throws DomainError on an empty chain or a
/// factor outside (0, 1].
MeasuredValue chain_transmission(const TransmissionChain& chain,
                                 Propagation mode = Propagation::linear);

/// eta_r = (NA collection fraction) * (lens enhancement).
MeasuredValue effective_collection(const MeasuredValue& na_fraction,
                                   const MeasuredValue& enhancement,
                                   Propagation mode = Propagation::linear);

/// C = kappa_g * detector_ratio / (2 kappa_r eta_r), detector_ratio = eta_APD1/eta_APD2.
MeasuredValue compute_C(const MeasuredValue& kappa_g, const MeasuredValue& kappa_r,
                        const MeasuredValue& eta_r,
                        const MeasuredValue& detector_ratio = MeasuredValue(1.0, 0.0),
                        Propagation mode = Propagation::linear);

struct CalibrationConstants {
  MeasuredValue kappa_g;
  MeasuredValue kappa_r;
  MeasuredValue eta_r;
  MeasuredValue detector_ratio{1.0, 0.0, "detector_ratio"};
  MeasuredValue C;
  Propagation propagation = Propagation::linear;
  // Chain products, kept alongside measured values when both are given.
  std::optional<MeasuredValue> kappa_g_chain;
  std::optional<MeasuredValue> kappa_r_chain;
};

/// Fills C from the other fields.
CalibrationConstants make_calibration(const MeasuredValue& kappa_g, const MeasuredValue& kappa_r,
                                      const MeasuredValue& eta_r,
                                      const MeasuredValue& detector_ratio = MeasuredValue(1.0, 0.0),
                                      Propagation mode = Propagation::linear);

// Flat "key = value" calibration file; '#' starts a comment.
//
//   kappa_g.value / kappa_g.sigma     measured guided-path transmission
//   kappa_g.factors = 0.81, 0.81, ... chain factors (value or value+-sigma)
//   kappa_r.value / .sigma / .factors likewise for the radiation path
//   eta_r.value / eta_r.sigma         effective collection, or instead
//   na = 0.6 with enhancement.value / enhancement.sigma
//   detector_ratio.value / .sigma     eta_APD1 / eta_APD2, default 1 +- 0
//   propagation = linear|quadrature
//
// A measured kappa takes precedence over its chain. `mode_override`
// replaces the file's propagation key when set.
CalibrationConstants parse_calibration(std::istream& in,
                                       std::optional<Propagation> mode_override = std::nullopt);
CalibrationConstants load_calibration(const std::string& path,
                                      std::optional<Propagation> mode_override = std::nullopt);

}  // namespace nfc
