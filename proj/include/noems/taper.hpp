#pragma once

#include <complex>
#include <map>
#include <vector>

#include "noems/modesolver.hpp"

namespace noems {

struct TaperNode {
    double x_nm;
    double width_nm;
};

/// Piece-wise linear taper sampled at its vertices. Each vertex becomes one
/// uniform section of the staircase.
struct TaperProfile {
    std::vector<TaperNode> nodes;

    double entry_width_nm() const { return nodes.front().width_nm; }
    double exit_width_nm() const { return nodes.back().width_nm; }
    double max_width_nm() const;
    std::size_t segments() const { return nodes.empty() ? 0 : nodes.size() - 1; }

    /// Throws GeometryError on fewer than two nodes, non-increasing
    /// positions or non-positive widths.
    void validate() const;

    /// Linear width ramp from entry to exit with `segments` equal steps.
    static TaperProfile linear(double entry_width_nm, double exit_width_nm, int segments, double pitch_nm);
    /// Each segment split into `factor` pieces along the same polyline.
    TaperProfile refined(int factor) const;
    TaperProfile reversed() const;
};

/// Power-normalized transverse E-field overlap. Both modes must share grid
/// and wavelength (GeometryError otherwise).
std::complex<double> overlap(const ModeSolution& a, const ModeSolution& b);

struct TaperLoss {
    std::vector<double> segment_db;  // -10 log10 |overlap|^2 per junction
    double total_db = 0.0;
};

struct TaperOptions {
    double dx_nm = 10.0;
    double dy_nm = 10.0;
    double margin_nm = SolverGrid::default_margin_nm;
    int candidates = 3;
    int jobs = 1;
    SolverOptions solver;
};

/// Staircase mode matching through two-rail cross-sections: at each vertex
/// both rails take the local width, separated by the companion slot. The
/// even supermode is used throughout. Node modes are cached by width, so
/// refinements of one profile share solves.
class TaperSolver {
public:
    TaperSolver(const CrossSection& companion, double wavelength_nm, double max_width_nm,
                const TaperOptions& options = {});

    const SolverGrid& grid() const { return grid_; }
    double wavelength_nm() const { return wavelength_nm_; }

    CrossSection section(double width_nm) const;
    /// Throws CutoffError if no guided mode exists at this width.
    const ModeSolution& mode(double width_nm);
    /// Throws CutoffError naming the segment index at a cutoff vertex.
    TaperLoss loss(const TaperProfile& profile);

private:
    void solve_missing(const std::vector<double>& widths);

    CrossSection companion_;
    double wavelength_nm_;
    double max_width_nm_;
    TaperOptions options_;
    SolverGrid grid_;
    std::map<double, ModeSolution> cache_;
};

TaperLoss taper_loss(const TaperProfile& profile, const CrossSection& companion, double wavelength_nm,
                     const TaperOptions& options = {});

}  // namespace noems
