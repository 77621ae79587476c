#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

// Independent closed-form references used by the tests.
namespace oracle {

/// Fundamental TE root of the symmetric slab, tan(kappa t / 2) = gamma / kappa.
inline double slab_te0_neff(double thickness_nm, double n_core, double n_clad, double wavelength_nm) {
    const double k0 = 2.0 * std::numbers::pi / wavelength_nm;
    auto f = [&](double n) {
        const double kappa = k0 * std::sqrt(n_core * n_core - n * n);
        const double gamma = k0 * std::sqrt(n * n - n_clad * n_clad);
        return std::tan(kappa * thickness_nm / 2.0) - gamma / kappa;
    };
    // TE0 lies where kappa t / 2 in (0, pi / 2): f rises from -inf... bracket by that window.
    const double kappa_max = std::numbers::pi / thickness_nm;  // kappa t / 2 = pi / 2
    double lo = std::sqrt(std::max(n_clad * n_clad, n_core * n_core - (kappa_max / k0) * (kappa_max / k0))) + 1e-12;
    double hi = n_core - 1e-12;
    if (f(lo) * f(hi) > 0.0) throw std::runtime_error("slab oracle: no bracket");
    for (int i = 0; i < 200; ++i) {
        const double m = 0.5 * (lo + hi);
        if ((f(m) > 0.0) == (f(lo) > 0.0))
            lo = m;
        else
            hi = m;
    }
    return 0.5 * (lo + hi);
}

/// Two-beam visibility for power split R : T.
inline double two_beam_visibility(double r, double t) { return 2.0 * std::sqrt(r * t) / (r + t); }

}  // namespace oracle
