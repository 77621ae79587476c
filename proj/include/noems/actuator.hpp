#pragma once

#include <iosfwd>
#include <vector>

#include "noems/neff_curve.hpp"

namespace noems {

/// Electrostatic comb-drive gap model d(V) = d0 - eta * scale * V^2.
struct ActuatorParams {
    double d0_nm = 150.0;
    double eta_nm_per_V2 = 0.6;
    double temperature_scale = 1.0;  // multiplier on eta; 1 at room temperature
    double v_max_V = 12.0;

    double effective_eta() const { return eta_nm_per_V2 * temperature_scale; }
    /// Throws GeometryError on non-positive values or a gap closed at v_max.
    void validate() const;
};

/// Slot width at bias v; std::out_of_range for v outside [0, v_max].
double displacement(const ActuatorParams& a, double v);

struct PhaseShifterSpec {
    double length_nm = 10'000.0;
    double wavelength_nm = 950.0;
    NeffCurve neff_curve;
    ActuatorParams actuator;

    /// Throws GeometryError on L <= 0 or a curve not covering [d(v_max), d0].
    void validate() const;
};

/// Phase relative to zero bias, (2 pi / lambda) L (n_eff(d(v)) - n_eff(d0)).
double phase_shift(const PhaseShifterSpec& spec, double v);
/// Same law at an arbitrary wavelength, taking delta n_eff from the curve.
double phase_shift(const PhaseShifterSpec& spec, double v, double wavelength_nm);
/// Phase for a signed gap change dy (positive widens the slot).
double phase_for_displacement(const PhaseShifterSpec& spec, double dy_nm);

/// Smallest dV > 0 with |phase(v_bias + dV) - phase(v_bias)| = pi, by a
/// bracketing scan and bisection. SolverError if pi is unreachable below v_max.
double v_pi(const PhaseShifterSpec& spec, double v_bias = 0.0, double tolerance_V = 1e-4);

/// V_pi L in V cm.
double figure_of_merit(const PhaseShifterSpec& spec, double v_bias = 0.0);

struct SweepPoint {
    double v;
    double d_nm;
    double delta_phi_rad;
};

std::vector<SweepPoint> bias_sweep(const PhaseShifterSpec& spec, const std::vector<double>& voltages);
/// CSV `V,V_squared,d_nm,delta_phi_rad`.
void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points);

}  // namespace noems
