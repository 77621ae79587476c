#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include <math.h>  // boost pchip calls unqualified isnan

#include <boost/math/interpolators/pchip.hpp>

#include "noems/modesolver.hpp"

namespace noems {

struct CurveSample {
    double d_nm;
    double n_eff;
};

/// Effective index versus slot width at one wavelength, with a monotone
/// cubic (PCHIP) interpolant through the samples.
class NeffCurve {
public:
    /// Throws GeometryError unless d is strictly increasing, n_eff strictly
    /// decreasing and there are at least four samples.
    NeffCurve(double wavelength_nm, std::vector<CurveSample> samples);

    double wavelength_nm() const { return wavelength_nm_; }
    std::span<const CurveSample> samples() const { return samples_; }
    double d_min() const { return samples_.front().d_nm; }
    double d_max() const { return samples_.back().d_nm; }
    bool covers(double d_nm) const { return d_nm >= d_min() && d_nm <= d_max(); }

    /// Interpolated n_eff; CoverageError outside [d_min, d_max].
    double operator()(double d_nm) const;
    double slope(double d_nm) const;

    /// CSV with header `d_nm,n_eff`.
    void write_csv(std::ostream& out) const;
    static NeffCurve read_csv(std::istream& in, double wavelength_nm);

    /// n_eff(d) = n0 - s d sampled on [d_lo, d_hi]; used as an analytic test
    /// curve (PCHIP reproduces linear data exactly).
    static NeffCurve linear(double wavelength_nm, double n0, double slope_per_nm, double d_lo, double d_hi,
                            int points = 16);

private:
    double wavelength_nm_;
    std::vector<CurveSample> samples_;
    boost::math::interpolators::pchip<std::vector<double>> interp_;
};

struct CurveOptions {
    double dx_nm = SolverGrid::default_step_nm;
    double dy_nm = SolverGrid::default_step_nm;
    double margin_nm = SolverGrid::default_margin_nm;
    /// Fold the slot mid-plane when the rails are equal (even supermode only).
    bool fold_lateral = true;
    int candidates = 3;
    int jobs = 1;
    SolverOptions solver;
};

/// One fundamental-TE solve per slot width. Throws CutoffError naming the
/// first width without a guided mode.
NeffCurve build_neff_curve(const CrossSection& cs_template, double wavelength_nm, std::span<const double> d_values,
                           const CurveOptions& options = {});

/// Grid used for one slot width of a curve build.
SolverGrid curve_grid(const CrossSection& cs, const CurveOptions& options);

}  // namespace noems
