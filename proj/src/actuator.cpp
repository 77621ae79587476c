#include "noems/actuator.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include "noems/csv.hpp"

namespace noems {

void ActuatorParams::validate() const {
    if (!(d0_nm > 0.0)) throw GeometryError("actuator: d0_nm must be > 0");
    if (!(eta_nm_per_V2 > 0.0)) throw GeometryError("actuator: eta_nm_per_V2 must be > 0");
    if (!(temperature_scale > 0.0 && temperature_scale <= 1.0))
        throw GeometryError("actuator: temperature_scale must lie in (0, 1]");
    if (!(v_max_V > 0.0)) throw GeometryError("actuator: v_max_V must be > 0");
    if (!(d0_nm - effective_eta() * v_max_V * v_max_V > 0.0)) {
        std::ostringstream msg;
        msg << "actuator: slot closes before v_max (d(" << v_max_V << " V) <= 0)";
        throw GeometryError(msg.str());
    }
}

double displacement(const ActuatorParams& a, double v) {
    if (!(v >= 0.0 && v <= a.v_max_V)) {
        std::ostringstream msg;
        msg << "bias " << v << " V outside [0, " << a.v_max_V << "] V";
        throw std::out_of_range(msg.str());
    }
    return a.d0_nm - a.effective_eta() * v * v;
}

void PhaseShifterSpec::validate() const {
    if (!(length_nm > 0.0)) throw GeometryError("phase shifter: length must be > 0");
    if (!(wavelength_nm > 0.0)) throw GeometryError("phase shifter: wavelength must be > 0");
    actuator.validate();
    const double d_lo = displacement(actuator, actuator.v_max_V);
    if (!neff_curve.covers(d_lo) || !neff_curve.covers(actuator.d0_nm)) {
        std::ostringstream msg;
        msg << "phase shifter: curve range [" << neff_curve.d_min() << ", " << neff_curve.d_max()
            << "] nm does not cover the actuation range [" << d_lo << ", " << actuator.d0_nm << "] nm";
        throw GeometryError(msg.str());
    }
}

double phase_shift(const PhaseShifterSpec& spec, double v, double wavelength_nm) {
    const double d = displacement(spec.actuator, v);
    const double dn = spec.neff_curve(d) - spec.neff_curve(spec.actuator.d0_nm);
    return 2.0 * std::numbers::pi / wavelength_nm * spec.length_nm * dn;
}

double phase_shift(const PhaseShifterSpec& spec, double v) { return phase_shift(spec, v, spec.wavelength_nm); }

double phase_for_displacement(const PhaseShifterSpec& spec, double dy_nm) {
    const double d0 = spec.actuator.d0_nm;
    const double dn = spec.neff_curve(d0 + dy_nm) - spec.neff_curve(d0);
    return 2.0 * std::numbers::pi / spec.wavelength_nm * spec.length_nm * dn;
}

double v_pi(const PhaseShifterSpec& spec, double v_bias, double tolerance_V) {
    spec.validate();
    const double v_max = spec.actuator.v_max_V;
    if (!(v_bias >= 0.0 && v_bias < v_max)) throw std::out_of_range("v_pi: bias outside [0, v_max)");
    const double ref = phase_shift(spec, v_bias);
    auto excess = [&](double dv) { return std::abs(phase_shift(spec, v_bias + dv) - ref) - std::numbers::pi; };

    constexpr int scan_steps = 4000;
    const double span = v_max - v_bias;
    double lo = 0.0;
    double hi = -1.0;
    for (int k = 1; k <= scan_steps; ++k) {
        const double dv = span * k / scan_steps;
        if (excess(dv) >= 0.0) {
            hi = dv;
            break;
        }
        lo = dv;
    }
    if (hi < 0.0) {
        std::ostringstream msg;
        msg << "pi phase shift unreachable below v_max = " << v_max << " V from bias " << v_bias << " V";
        throw SolverError(msg.str());
    }
    while (hi - lo > tolerance_V / 16.0) {
        const double mid = 0.5 * (lo + hi);
        if (excess(mid) >= 0.0)
            hi = mid;
        else
            lo = mid;
    }
    return 0.5 * (lo + hi);
}

double figure_of_merit(const PhaseShifterSpec& spec, double v_bias) {
    if (!(spec.length_nm > 0.0)) throw GeometryError("figure of merit: length must be > 0");
    return v_pi(spec, v_bias) * spec.length_nm * 1e-7;
}

std::vector<SweepPoint> bias_sweep(const PhaseShifterSpec& spec, const std::vector<double>& voltages) {
    std::vector<SweepPoint> out;
    out.reserve(voltages.size());
    for (double v : voltages) out.push_back({v, displacement(spec.actuator, v), phase_shift(spec, v)});
    return out;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepPoint>& points) {
    out << "V,V_squared,d_nm,delta_phi_rad\n";
    for (const auto& p : points)
        out << csv::number(p.v) << ',' << csv::number(p.v * p.v) << ',' << csv::number(p.d_nm) << ','
            << csv::number(p.delta_phi_rad) << '\n';
}

}  // namespace noems
