#include "noems/neff_curve.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "noems/csv.hpp"
#include "noems/parallel.hpp"

namespace noems {

namespace {

boost::math::interpolators::pchip<std::vector<double>> make_interp(const std::vector<CurveSample>& samples) {
    std::vector<double> d, n;
    d.reserve(samples.size());
    n.reserve(samples.size());
    for (const auto& s : samples) {
        d.push_back(s.d_nm);
        n.push_back(s.n_eff);
    }
    return {std::move(d), std::move(n)};
}

const std::vector<CurveSample>& checked(const std::vector<CurveSample>& samples, double wavelength_nm) {
    if (!(wavelength_nm > 0.0)) throw GeometryError("neff curve: wavelength must be > 0");
    if (samples.size() < 4) throw GeometryError("neff curve: at least 4 samples required");
    for (std::size_t k = 0; k < samples.size(); ++k) {
        if (!std::isfinite(samples[k].d_nm) || !std::isfinite(samples[k].n_eff))
            throw GeometryError("neff curve: non-finite sample");
        if (k == 0) continue;
        if (!(samples[k].d_nm > samples[k - 1].d_nm)) {
            std::ostringstream msg;
            msg << "neff curve: slot widths must be strictly increasing (d = " << samples[k].d_nm << " nm)";
            throw GeometryError(msg.str());
        }
        if (!(samples[k].n_eff < samples[k - 1].n_eff)) {
            std::ostringstream msg;
            msg << "neff curve: n_eff must decrease strictly with d (d = " << samples[k].d_nm << " nm)";
            throw GeometryError(msg.str());
        }
    }
    return samples;
}

}  // namespace

NeffCurve::NeffCurve(double wavelength_nm, std::vector<CurveSample> samples)
    : wavelength_nm_(wavelength_nm),
      samples_(std::move(samples)),
      interp_(make_interp(checked(samples_, wavelength_nm_))) {}

double NeffCurve::operator()(double d_nm) const {
    if (!covers(d_nm)) {
        std::ostringstream msg;
        msg << "slot width " << d_nm << " nm outside curve range [" << d_min() << ", " << d_max() << "] nm";
        throw CoverageError(msg.str());
    }
    return interp_(d_nm);
}

double NeffCurve::slope(double d_nm) const {
    (void)operator()(d_nm);
    return interp_.prime(d_nm);
}

void NeffCurve::write_csv(std::ostream& out) const {
    out << "d_nm,n_eff\n";
    for (const auto& s : samples_) out << csv::number(s.d_nm) << ',' << csv::number(s.n_eff) << '\n';
}

NeffCurve NeffCurve::read_csv(std::istream& in, double wavelength_nm) {
    std::vector<CurveSample> samples;
    for (const auto& row : csv::read(in, "d_nm,n_eff")) samples.push_back({csv::to_double(row, 0), csv::to_double(row, 1)});
    try {
        return NeffCurve(wavelength_nm, std::move(samples));
    } catch (const GeometryError& e) {
        throw ParseError(e.what());
    }
}

NeffCurve NeffCurve::linear(double wavelength_nm, double n0, double slope_per_nm, double d_lo, double d_hi,
                            int points) {
    std::vector<CurveSample> samples;
    for (int k = 0; k < points; ++k) {
        const double d = d_lo + (d_hi - d_lo) * k / (points - 1);
        samples.push_back({d, n0 - slope_per_nm * d});
    }
    return NeffCurve(wavelength_nm, std::move(samples));
}

SolverGrid curve_grid(const CrossSection& cs, const CurveOptions& options) {
    SolverGrid grid = SolverGrid::around(cs, options.dx_nm, options.dy_nm, options.margin_nm);
    if (options.fold_lateral && cs.laterally_symmetric()) grid.lateral = Mirror::ex_even;
    return grid;
}

NeffCurve build_neff_curve(const CrossSection& cs_template, double wavelength_nm, std::span<const double> d_values,
                           const CurveOptions& options) {
    if (d_values.size() < 4) throw GeometryError("neff curve: at least 4 slot widths required");
    for (std::size_t k = 1; k < d_values.size(); ++k)
        if (!(d_values[k] > d_values[k - 1])) throw GeometryError("neff curve: slot widths must be sorted ascending");

    std::vector<CurveSample> samples(d_values.size());
    parallel_for(d_values.size(), options.jobs, [&](std::size_t k) {
        CrossSection cs = cs_template;
        cs.slot_width_nm = d_values[k];
        const auto mode = fundamental_te_mode(cs, curve_grid(cs, options), wavelength_nm, options.candidates,
                                              options.solver);
        if (!mode) {
            std::ostringstream msg;
            msg << "no guided mode at slot width d = " << d_values[k] << " nm";
            throw CutoffError(msg.str());
        }
        samples[k] = {d_values[k], mode->n_eff};
    });
    return NeffCurve(wavelength_nm, std::move(samples));
}

}  // namespace noems
