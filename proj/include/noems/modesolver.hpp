#pragma once

#include <complex>
#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/SparseCore>

#include "noems/errors.hpp"

namespace noems {

/// Rectangular two-rail cross-section of a suspended membrane waveguide.
///
/// The structure is centered on the origin: x runs across the rails
/// (the slot width direction), y along the membrane thickness. Both rails
/// share the membrane thickness. A zero slot width merges the rails into a
/// single waveguide of width left + right.
struct CrossSection {
    double rail_width_left_nm = 150.0;
    double rail_width_right_nm = 150.0;
    double slot_width_nm = 150.0;
    double thickness_nm = 160.0;
    double n_core = 3.48;
    double n_clad = 1.0;

    double total_width_nm() const { return rail_width_left_nm + slot_width_nm + rail_width_right_nm; }
    bool laterally_symmetric() const { return rail_width_left_nm == rail_width_right_nm; }

    void validate() const;

    /// Single rectangular waveguide of the given width.
    static CrossSection single_rail(double width_nm, double thickness_nm, double n_core = 3.48,
                                    double n_clad = 1.0);
};

/// Perfectly conducting walls: tangential E vanishes on the domain edge.
enum class Boundary { zero_field };

/// Mirror folding of the computational domain. `ex_even` keeps the half
/// domain on the positive side of the mirror plane and imposes Ex even, Ey
/// odd across it. Through the membrane mid-plane this selects TE-like modes;
/// across the slot center it selects the even (slot) supermode.
enum class Mirror { none, ex_even };

struct SolverGrid {
    double dx_nm = 5.0;
    double dy_nm = 5.0;
    double domain_width_nm = 0.0;
    double domain_height_nm = 0.0;
    Boundary boundary = Boundary::zero_field;
    Mirror lateral = Mirror::none;
    Mirror vertical = Mirror::ex_even;

    static constexpr double default_step_nm = 5.0;
    static constexpr double default_margin_nm = 1500.0;

    /// Grid enclosing `cs` with `margin_nm` of cladding on every side.
    ///
    /// A zero `lateral_margin_nm` lets the core run into the side walls. The
    /// conducting walls then image the structure into a laterally infinite
    /// slab, which is how the one-dimensional slab limit is represented.
    static SolverGrid around(const CrossSection& cs, double dx_nm = default_step_nm,
                             double dy_nm = default_step_nm, double margin_nm = default_margin_nm);
    static SolverGrid around(const CrossSection& cs, double dx_nm, double dy_nm, double margin_nm,
                             double lateral_margin_nm);

    /// Cell counts of the full (unfolded) domain; always even.
    int nx() const;
    int ny() const;

    /// Smallest admissible cladding margin at a wavelength.
    static double minimum_margin_nm(double wavelength_nm, double n_clad);
    /// Minimum cell count across any nonzero geometric feature.
    static constexpr int minimum_cells_per_feature = 4;

    /// Throws GeometryError if the grid cannot host `cs` at `wavelength_nm`.
    void validate(const CrossSection& cs, double wavelength_nm) const;

    friend bool operator==(const SolverGrid&, const SolverGrid&) = default;
};

/// Sampled field component on its staggered lattice, x-fastest. Points on
/// the conducting walls are stored (as zeros) so the array covers the full
/// unfolded domain.
struct Field2D {
    int nx = 0;
    int ny = 0;
    double dx_nm = 0.0;
    double dy_nm = 0.0;
    double x0_nm = 0.0;  // coordinate of sample (0, *), origin at the waveguide center
    double y0_nm = 0.0;
    std::vector<std::complex<double>> values;

    std::complex<double>& at(int i, int j) { return values[static_cast<std::size_t>(j) * nx + i]; }
    const std::complex<double>& at(int i, int j) const {
        return values[static_cast<std::size_t>(j) * nx + i];
    }
    double x_nm(int i) const { return x0_nm + i * dx_nm; }
    double y_nm(int j) const { return y0_nm + j * dy_nm; }
};

struct ModeSolution {
    double n_eff = 0.0;
    double beta_sq = 0.0;  // nm^-2
    double wavelength_nm = 0.0;
    double te_fraction = 0.0;
    double residual = 0.0;  // relative eigen-residual on the folded operator
    Field2D ex;             // cell centers in x, grid lines in y
    Field2D ey;             // grid lines in x, cell centers in y
    SolverGrid grid;

    /// Discrete transverse field power, sum |Et|^2 dA. Equals 1 for returned modes.
    double power() const;
};

/// Discretized eigen-operator A with A u = beta^2 u, u = [Ex; Ey] over the
/// unknowns left after walls and mirror folding.
struct ModeOperator {
    Eigen::SparseMatrix<double> matrix;
    SolverGrid grid;
    double wavelength_nm = 0.0;
    double k0 = 0.0;  // nm^-1
    int ex_unknowns = 0;
    int ey_unknowns = 0;

    int unknowns() const { return ex_unknowns + ey_unknowns; }
};

/// Relative permittivity of each cell (x-fastest) by exact area averaging.
std::vector<double> cell_permittivity(const CrossSection& cs, const SolverGrid& grid);

/// Permittivity seen by a field component centered at (x, y) over a
/// dx-by-dy averaging cell. The normal direction of the component is
/// averaged harmonically, the tangential one arithmetically.
enum class Polarization { x, y, z };
double averaged_permittivity(const CrossSection& cs, double x_nm, double y_nm, double dx_nm, double dy_nm,
                             Polarization p);

ModeOperator assemble_operator(const CrossSection& cs, const SolverGrid& grid, double wavelength_nm);

struct SolverOptions {
    int max_restarts = 400;
    double tolerance = 1e-10;
    /// Extra Ritz vectors kept beyond the requested mode count.
    int guard_vectors = 1;
    /// Estimate the shift from a coarser grid before the fine solve.
    bool coarse_shift = true;
    /// Explicit shift in beta^2 (nm^-2); overrides the coarse estimate.
    std::optional<double> shift;
};

/// Guided modes sorted by descending n_eff. Radiation and box modes with
/// n_eff <= n_clad are discarded; an empty result means nothing is guided.
std::vector<ModeSolution> solve_modes(const CrossSection& cs, const SolverGrid& grid,
                                      double wavelength_nm, int n_modes,
                                      const SolverOptions& options = {});

/// Index of the mode with the highest TE fraction. Ties go to the higher n_eff.
std::size_t most_te_like(const std::vector<ModeSolution>& modes);

/// Fundamental TE-dominant mode, or nullopt if no mode is guided.
std::optional<ModeSolution> fundamental_te_mode(const CrossSection& cs, const SolverGrid& grid,
                                                double wavelength_nm, int candidates = 3,
                                                const SolverOptions& options = {});

/// Relative L2 asymmetry of the fundamental Ex under the x -> -x mirror.
double lateral_asymmetry(const ModeSolution& mode);

}  // namespace noems
