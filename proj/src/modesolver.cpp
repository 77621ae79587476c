#include "noems/modesolver.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <numbers>
#include <sstream>

#include <Eigen/UmfPackSupport>
#include <arpack/arpack.hpp>

namespace noems {

namespace {

constexpr double two_pi = 2.0 * std::numbers::pi;

// Fine grids above this size get their shift from a 2x coarser solve.
constexpr int coarse_shift_threshold = 24000;

using SpMat = Eigen::SparseMatrix<double>;
using Triplets = std::vector<Eigen::Triplet<double>>;

double overlap_1d(double a0, double a1, double b0, double b1) {
    return std::max(0.0, std::min(a1, b1) - std::max(a0, b0));
}

int even_cells(double extent, double step) {
    const double half = extent / (2.0 * step);
    return 2 * static_cast<int>(std::ceil(half - 1e-9));
}

// Yee lattices in doubled integer coordinates: X = 2x/dx from the left wall,
// so grid lines have even X and cell centers odd X. Ex/Hy live on
// (odd, even), Ey/Hx on (even, odd), Ez on (even, even), Hz on (odd, odd).
// Tangential E vanishes on the walls. A folded mirror keeps X >= nx (or
// Y >= ny); lattices odd under the mirror vanish on the plane itself.
struct Lattice {
    bool half_x = false;
    bool half_y = false;
    int parity_lateral = 1;
    int parity_vertical = 1;
    std::vector<int> x_index;  // doubled X -> kept column, or -1
    std::vector<int> y_index;
    std::vector<int> xs;
    std::vector<int> ys;

    int size() const { return static_cast<int>(xs.size() * ys.size()); }
};

class YeeLayout {
public:
    enum Kind { ex = 0, ey = 1, ez = 2, hz = 3 };

    explicit YeeLayout(const SolverGrid& grid)
        : nx_(grid.nx()), ny_(grid.ny()),
          fold_x_(grid.lateral == Mirror::ex_even),
          fold_y_(grid.vertical == Mirror::ex_even) {
        // Ex-even class parities, (lateral, vertical).
        build(lattices_[ex], true, false, +1, +1);
        build(lattices_[ey], false, true, -1, -1);
        build(lattices_[ez], false, false, -1, +1);
        build(lattices_[hz], true, true, +1, -1);
    }

    int nx() const { return nx_; }
    int ny() const { return ny_; }
    const Lattice& lattice(Kind k) const { return lattices_[k]; }

    // Unknown index of (X, Y) on lattice k, or -1 where the value is zero.
    int lookup(Kind k, int X, int Y, double& sign) const {
        const Lattice& l = lattices_[k];
        sign = 1.0;
        if (fold_x_ && X < nx_) {
            X = 2 * nx_ - X;
            sign *= l.parity_lateral;
        }
        if (fold_y_ && Y < ny_) {
            Y = 2 * ny_ - Y;
            sign *= l.parity_vertical;
        }
        if (X < 0 || X > 2 * nx_ || Y < 0 || Y > 2 * ny_) return -1;
        const int ix = l.x_index[X];
        const int iy = l.y_index[Y];
        if (ix < 0 || iy < 0) return -1;
        return iy * static_cast<int>(l.xs.size()) + ix;
    }

    double x_nm(int X, double dx) const { return 0.5 * (X - nx_) * dx; }
    double y_nm(int Y, double dy) const { return 0.5 * (Y - ny_) * dy; }

private:
    void build(Lattice& l, bool half_x, bool half_y, int par_x, int par_y) {
        l.half_x = half_x;
        l.half_y = half_y;
        l.parity_lateral = par_x;
        l.parity_vertical = par_y;
        auto axis = [](int n, bool half, bool fold, int parity, std::vector<int>& index, std::vector<int>& kept) {
            index.assign(2 * n + 1, -1);
            for (int X = half ? 1 : 2; X <= 2 * n - 1; X += 2) {
                if (fold && X < n) continue;
                if (fold && X == n && parity < 0) continue;
                index[X] = static_cast<int>(kept.size());
                kept.push_back(X);
            }
        };
        axis(nx_, half_x, fold_x_, par_x, l.x_index, l.xs);
        axis(ny_, half_y, fold_y_, par_y, l.y_index, l.ys);
    }

    int nx_, ny_;
    bool fold_x_, fold_y_;
    std::array<Lattice, 4> lattices_;
};

// Centered difference from lattice `from` onto lattice `to`.
SpMat difference(const YeeLayout& layout, YeeLayout::Kind from, YeeLayout::Kind to, bool along_x, double step) {
    const Lattice& out = layout.lattice(to);
    Triplets t;
    t.reserve(2 * static_cast<std::size_t>(out.size()));
    int row = 0;
    for (int Y : out.ys) {
        for (int X : out.xs) {
            double sp = 1.0, sm = 1.0;
            const int cp = along_x ? layout.lookup(from, X + 1, Y, sp) : layout.lookup(from, X, Y + 1, sp);
            const int cm = along_x ? layout.lookup(from, X - 1, Y, sm) : layout.lookup(from, X, Y - 1, sm);
            if (cp >= 0) t.emplace_back(row, cp, sp / step);
            if (cm >= 0) t.emplace_back(row, cm, -sm / step);
            ++row;
        }
    }
    SpMat m(out.size(), layout.lattice(from).size());
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

SpMat permittivity_diagonal(const YeeLayout& layout, YeeLayout::Kind k, const CrossSection& cs,
                            const SolverGrid& grid, Polarization p, bool inverse) {
    const Lattice& l = layout.lattice(k);
    Triplets t;
    t.reserve(l.size());
    int row = 0;
    for (int Y : l.ys) {
        for (int X : l.xs) {
            const double e = averaged_permittivity(cs, layout.x_nm(X, grid.dx_nm), layout.y_nm(Y, grid.dy_nm),
                                                   grid.dx_nm, grid.dy_nm, p);
            t.emplace_back(row, row, inverse ? 1.0 / e : e);
            ++row;
        }
    }
    SpMat m(l.size(), l.size());
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

void append(Triplets& t, const SpMat& m, Eigen::Index row0, Eigen::Index col0) {
    for (int k = 0; k < m.outerSize(); ++k)
        for (SpMat::InnerIterator it(m, k); it; ++it) t.emplace_back(row0 + it.row(), col0 + it.col(), it.value());
}

SpMat hstack(const SpMat& a, const SpMat& b) {
    Triplets t;
    t.reserve(a.nonZeros() + b.nonZeros());
    append(t, a, 0, 0);
    append(t, b, 0, a.cols());
    SpMat m(a.rows(), a.cols() + b.cols());
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

SpMat vstack(const SpMat& a, const SpMat& b) {
    Triplets t;
    t.reserve(a.nonZeros() + b.nonZeros());
    append(t, a, 0, 0);
    append(t, b, a.rows(), 0);
    SpMat m(a.rows() + b.rows(), a.cols());
    m.setFromTriplets(t.begin(), t.end());
    return m;
}

ModeOperator assemble_unchecked(const CrossSection& cs, const SolverGrid& grid, double wavelength_nm) {
    using K = YeeLayout::Kind;
    const YeeLayout layout(grid);
    const double dx = grid.dx_nm;
    const double dy = grid.dy_nm;
    const double k0 = two_pi / wavelength_nm;

    const int n_ex = layout.lattice(K::ex).size();
    const int n_ey = layout.lattice(K::ey).size();

    const SpMat fx_ey_hz = difference(layout, K::ey, K::hz, true, dx);
    const SpMat fy_ex_hz = difference(layout, K::ex, K::hz, false, dy);
    const SpMat bx_hz_ey = difference(layout, K::hz, K::ey, true, dx);
    const SpMat by_hz_ex = difference(layout, K::hz, K::ex, false, dy);
    const SpMat bx_ex_ez = difference(layout, K::ex, K::ez, true, dx);
    const SpMat by_ey_ez = difference(layout, K::ey, K::ez, false, dy);
    const SpMat fx_ez_ex = difference(layout, K::ez, K::ex, true, dx);
    const SpMat fy_ez_ey = difference(layout, K::ez, K::ey, false, dy);
    const SpMat eps_x = permittivity_diagonal(layout, K::ex, cs, grid, Polarization::x, false);
    const SpMat eps_y = permittivity_diagonal(layout, K::ey, cs, grid, Polarization::y, false);
    const SpMat inv_eps_z = permittivity_diagonal(layout, K::ez, cs, grid, Polarization::z, true);

    // Ez and Hz eliminated; beta H = P_EH E and beta E = P_HE H, with the
    // E unknowns ordered [Ex; Ey].
    const SpMat zero_ex(n_ey, n_ex);
    const SpMat zero_ey(n_ex, n_ey);
    const SpMat curl_z = hstack(SpMat(-fy_ex_hz), fx_ey_hz);
    const SpMat hx = SpMat(-k0 * hstack(zero_ex, eps_y)) - SpMat((1.0 / k0) * SpMat(bx_hz_ey * curl_z));
    const SpMat hy = SpMat(k0 * hstack(eps_x, zero_ey)) - SpMat((1.0 / k0) * SpMat(by_hz_ex * curl_z));
    const SpMat g = inv_eps_z * SpMat(SpMat(bx_ex_ez * hy) - SpMat(by_ey_ez * hx));
    const SpMat a_ex = SpMat(k0 * hy) + SpMat((1.0 / k0) * SpMat(fx_ez_ex * g));
    const SpMat a_ey = SpMat(-k0 * hx) + SpMat((1.0 / k0) * SpMat(fy_ez_ey * g));

    ModeOperator op;
    op.matrix = vstack(a_ex, a_ey);
    op.matrix.prune(0.0);
    op.matrix.makeCompressed();
    op.grid = grid;
    op.wavelength_nm = wavelength_nm;
    op.k0 = k0;
    op.ex_unknowns = n_ex;
    op.ey_unknowns = n_ey;
    return op;
}

struct Eigenpair {
    double value;
    Eigen::VectorXd vector;
    double residual;
};

// splitmix64-perturbed constant, identical on every platform.
Eigen::VectorXd start_vector(int n) {
    Eigen::VectorXd v(n);
    std::uint64_t state = 0x9E3779B97F4A7C15ull;
    for (int k = 0; k < n; ++k) {
        state += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        z ^= z >> 31;
        const double u = static_cast<double>(z >> 11) * 0x1.0p-53;
        v[k] = 1.0 + 0.5 * (u - 0.5);
    }
    return v;
}

std::vector<Eigenpair> shift_invert_eigs(const SpMat& a, double sigma, int nev, const SolverOptions& options) {
    const int n = static_cast<int>(a.rows());
    nev = std::min(nev, n - 2);
    if (nev < 1) throw SolverError("operator too small for the requested mode count");
    const int ncv = std::min(n, std::max(2 * nev + 1, 8));

    SpMat shifted = a;
    for (int k = 0; k < n; ++k) shifted.coeffRef(k, k) -= sigma;
    shifted.makeCompressed();
    Eigen::UmfPackLU<SpMat> lu;
    lu.umfpackControl()(UMFPACK_IRSTEP) = 0;
    lu.compute(shifted);
    if (lu.info() != Eigen::Success) throw SolverError("factorization of the shifted operator failed");

    // ARPACK keeps SAVEd Fortran state between reverse-communication calls.
    static std::mutex arpack_mutex;
    const std::lock_guard lock(arpack_mutex);
    a_int ido = 0;
    a_int info = 1;
    Eigen::VectorXd resid = start_vector(n);
    std::vector<double> v(static_cast<std::size_t>(n) * ncv);
    std::vector<double> workd(3 * static_cast<std::size_t>(n));
    std::vector<double> workl(3 * static_cast<std::size_t>(ncv) * ncv + 6 * ncv);
    a_int iparam[11] = {};
    a_int ipntr[14] = {};
    iparam[0] = 1;
    iparam[2] = options.max_restarts;
    iparam[6] = 1;

    Eigen::VectorXd y(n);
    while (true) {
        arpack::naupd(ido, arpack::bmat::identity, n, arpack::which::largest_magnitude, nev, options.tolerance,
                      resid.data(), ncv, v.data(), n, iparam, ipntr, workd.data(), workl.data(),
                      static_cast<a_int>(workl.size()), info);
        if (ido != -1 && ido != 1) break;
        Eigen::Map<const Eigen::VectorXd> x(workd.data() + ipntr[0] - 1, n);
        Eigen::Map<Eigen::VectorXd> out(workd.data() + ipntr[1] - 1, n);
        y = lu.solve(x);
        out = y;
    }
    if (info == 1) {
        std::ostringstream msg;
        msg << "eigensolver did not converge after " << options.max_restarts << " restarts";
        throw SolverError(msg.str());
    }
    if (info < 0) {
        std::ostringstream msg;
        msg << "eigensolver error (ARPACK code " << info << ")";
        throw SolverError(msg.str());
    }

    std::vector<a_int> select(ncv, 1);
    std::vector<double> dr(nev + 1), di(nev + 1);
    std::vector<double> z(static_cast<std::size_t>(n) * (nev + 1));
    std::vector<double> workev(3 * static_cast<std::size_t>(ncv));
    a_int rinfo = 0;
    arpack::neupd(1, arpack::howmny::ritz_vectors, select.data(), dr.data(), di.data(), z.data(), n, 0.0, 0.0,
                  workev.data(), arpack::bmat::identity, n, arpack::which::largest_magnitude, nev,
                  options.tolerance, resid.data(), ncv, v.data(), n, iparam, ipntr, workd.data(), workl.data(),
                  static_cast<a_int>(workl.size()), rinfo);
    if (rinfo != 0) {
        std::ostringstream msg;
        msg << "eigenvector extraction failed (ARPACK code " << rinfo << ")";
        throw SolverError(msg.str());
    }

    const int converged = static_cast<int>(iparam[4]);
    std::vector<Eigenpair> pairs;
    for (int k = 0; k < converged; ++k) {
        // complex Ritz pairs are not guided modes; skip both halves
        if (std::abs(di[k]) > 1e-9 * std::abs(dr[k])) {
            ++k;
            continue;
        }
        if (dr[k] == 0.0) continue;
        Eigen::VectorXd vec = Eigen::Map<const Eigen::VectorXd>(z.data() + static_cast<std::size_t>(k) * n, n);
        vec.normalize();
        const double lambda = sigma + 1.0 / dr[k];
        const double res = (a * vec - lambda * vec).norm() / std::max(std::abs(lambda), 1e-300);
        pairs.push_back({lambda, std::move(vec), res});
    }
    std::sort(pairs.begin(), pairs.end(), [](const Eigenpair& l, const Eigenpair& r) { return l.value > r.value; });
    return pairs;
}

std::vector<Eigenpair> solve_level(const CrossSection& cs, const SolverGrid& grid, double wavelength_nm, int nev,
                                   const SolverOptions& options, const ModeOperator& op) {
    const double k0 = op.k0;
    const double clad_sq = k0 * k0 * cs.n_clad * cs.n_clad;
    double sigma = k0 * k0 * cs.n_core * cs.n_core;
    if (options.shift) {
        sigma = *options.shift;
    } else if (options.coarse_shift && op.unknowns() > coarse_shift_threshold) {
        SolverGrid coarse = grid;
        coarse.dx_nm *= 2.0;
        coarse.dy_nm *= 2.0;
        const ModeOperator coarse_op = assemble_unchecked(cs, coarse, wavelength_nm);
        const auto coarse_pairs = solve_level(cs, coarse, wavelength_nm, nev, options, coarse_op);
        if (!coarse_pairs.empty() && coarse_pairs.front().value > clad_sq) {
            const double top = coarse_pairs.front().value;
            sigma = std::min(top + 0.25 * (top - clad_sq), sigma);
        }
    }
    return shift_invert_eigs(op.matrix, sigma, nev, options);
}

Field2D unfold(const YeeLayout& layout, YeeLayout::Kind k, const SolverGrid& grid, const Eigen::VectorXd& u,
               int offset) {
    const Lattice& l = layout.lattice(k);
    Field2D f;
    f.nx = l.half_x ? layout.nx() : layout.nx() + 1;
    f.ny = l.half_y ? layout.ny() : layout.ny() + 1;
    f.dx_nm = grid.dx_nm;
    f.dy_nm = grid.dy_nm;
    const int X0 = l.half_x ? 1 : 0;
    const int Y0 = l.half_y ? 1 : 0;
    f.x0_nm = layout.x_nm(X0, grid.dx_nm);
    f.y0_nm = layout.y_nm(Y0, grid.dy_nm);
    f.values.assign(static_cast<std::size_t>(f.nx) * f.ny, {0.0, 0.0});
    for (int j = 0; j < f.ny; ++j) {
        for (int i = 0; i < f.nx; ++i) {
            double sign = 1.0;
            const int idx = layout.lookup(k, X0 + 2 * i, Y0 + 2 * j, sign);
            if (idx >= 0) f.at(i, j) = sign * u[offset + idx];
        }
    }
    return f;
}

double margin_x(const CrossSection& cs, const SolverGrid& g) { return (g.nx() * g.dx_nm - cs.total_width_nm()) / 2.0; }
double margin_y(const CrossSection& cs, const SolverGrid& g) { return (g.ny() * g.dy_nm - cs.thickness_nm) / 2.0; }

}  // namespace

void CrossSection::validate() const {
    auto fail = [](const std::string& what) { throw GeometryError("cross-section: " + what); };
    if (!(rail_width_left_nm > 0.0)) fail("rail_width_left_nm must be > 0");
    if (!(rail_width_right_nm > 0.0)) fail("rail_width_right_nm must be > 0");
    if (!(slot_width_nm >= 0.0)) fail("slot_width_nm must be >= 0");
    if (!(thickness_nm > 0.0)) fail("thickness_nm must be > 0");
    if (!(n_clad >= 1.0)) fail("n_clad must be >= 1");
    if (!(n_core > n_clad)) fail("n_core must exceed n_clad");
}

CrossSection CrossSection::single_rail(double width_nm, double thickness_nm, double n_core, double n_clad) {
    CrossSection cs;
    cs.rail_width_left_nm = width_nm / 2.0;
    cs.rail_width_right_nm = width_nm / 2.0;
    cs.slot_width_nm = 0.0;
    cs.thickness_nm = thickness_nm;
    cs.n_core = n_core;
    cs.n_clad = n_clad;
    return cs;
}

SolverGrid SolverGrid::around(const CrossSection& cs, double dx_nm, double dy_nm, double margin_nm) {
    return around(cs, dx_nm, dy_nm, margin_nm, margin_nm);
}

SolverGrid SolverGrid::around(const CrossSection& cs, double dx_nm, double dy_nm, double margin_nm,
                              double lateral_margin_nm) {
    SolverGrid g;
    g.dx_nm = dx_nm;
    g.dy_nm = dy_nm;
    g.domain_width_nm = cs.total_width_nm() + 2.0 * lateral_margin_nm;
    g.domain_height_nm = cs.thickness_nm + 2.0 * margin_nm;
    return g;
}

int SolverGrid::nx() const { return even_cells(domain_width_nm, dx_nm); }
int SolverGrid::ny() const { return even_cells(domain_height_nm, dy_nm); }

double SolverGrid::minimum_margin_nm(double wavelength_nm, double n_clad) { return 1.5 * wavelength_nm / n_clad; }

void SolverGrid::validate(const CrossSection& cs, double wavelength_nm) const {
    cs.validate();
    auto fail = [](const std::string& what) { throw GeometryError("grid: " + what); };
    if (!(dx_nm > 0.0) || !(dy_nm > 0.0)) fail("dx_nm and dy_nm must be > 0");
    if (!(wavelength_nm > 0.0)) fail("wavelength must be > 0");
    if (!(domain_width_nm > 0.0) || !(domain_height_nm > 0.0)) fail("domain size must be > 0");
    const double need = minimum_margin_nm(wavelength_nm, cs.n_clad);
    const double mx = margin_x(cs, *this);
    const double my = margin_y(cs, *this);
    const bool slab = std::abs(mx) < 1e-9;
    if ((!slab && mx + 1e-9 < need) || my + 1e-9 < need) {
        std::ostringstream msg;
        msg << "domain too small: cladding margin " << (slab ? my : std::min(mx, my)) << " nm < required " << need
            << " nm at " << wavelength_nm << " nm";
        fail(msg.str());
    }
    auto check = [&](const char* name, double size, double step) {
        if (size > 0.0 && size < minimum_cells_per_feature * step - 1e-9) {
            std::ostringstream msg;
            msg << "feature unresolved: " << name << " = " << size << " nm spans fewer than "
                << minimum_cells_per_feature << " cells of " << step << " nm";
            fail(msg.str());
        }
    };
    if (cs.slot_width_nm > 0.0) {
        check("rail_width_left_nm", cs.rail_width_left_nm, dx_nm);
        check("rail_width_right_nm", cs.rail_width_right_nm, dx_nm);
        check("slot_width_nm", cs.slot_width_nm, dx_nm);
    } else {
        check("width", cs.total_width_nm(), dx_nm);
    }
    check("thickness_nm", cs.thickness_nm, dy_nm);
    if (lateral == Mirror::ex_even && !cs.laterally_symmetric())
        fail("lateral mirror folding requires equal rail widths");
}

double ModeSolution::power() const {
    double sum = 0.0;
    for (const auto& v : ex.values) sum += std::norm(v);
    for (const auto& v : ey.values) sum += std::norm(v);
    return sum * ex.dx_nm * ex.dy_nm;
}

std::vector<double> cell_permittivity(const CrossSection& cs, const SolverGrid& grid) {
    const int nx = grid.nx();
    const int ny = grid.ny();
    std::vector<double> eps(static_cast<std::size_t>(nx) * ny);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            eps[static_cast<std::size_t>(j) * nx + i] =
                averaged_permittivity(cs, (i + 0.5 - nx / 2.0) * grid.dx_nm, (j + 0.5 - ny / 2.0) * grid.dy_nm,
                                      grid.dx_nm, grid.dy_nm, Polarization::z);
    return eps;
}

double averaged_permittivity(const CrossSection& cs, double x_nm, double y_nm, double dx_nm, double dy_nm,
                             Polarization p) {
    const double w = cs.total_width_nm();
    const double left = -w / 2.0;
    const double x0 = x_nm - dx_nm / 2.0;
    const double x1 = x_nm + dx_nm / 2.0;
    const double core_x = overlap_1d(x0, x1, left, left + cs.rail_width_left_nm) +
                          overlap_1d(x0, x1, left + cs.rail_width_left_nm + cs.slot_width_nm, left + w);
    const double fx = core_x / dx_nm;
    const double fy =
        overlap_1d(y_nm - dy_nm / 2.0, y_nm + dy_nm / 2.0, -cs.thickness_nm / 2.0, cs.thickness_nm / 2.0) / dy_nm;
    const double ec = cs.n_core * cs.n_core;
    const double el = cs.n_clad * cs.n_clad;
    auto harmonic = [&](double f) { return 1.0 / (f / ec + (1.0 - f) / el); };
    switch (p) {
        case Polarization::x: return fy * harmonic(fx) + (1.0 - fy) * el;
        case Polarization::y: return fx * harmonic(fy) + (1.0 - fx) * el;
        case Polarization::z: break;
    }
    return el + fx * fy * (ec - el);
}

ModeOperator assemble_operator(const CrossSection& cs, const SolverGrid& grid, double wavelength_nm) {
    grid.validate(cs, wavelength_nm);
    return assemble_unchecked(cs, grid, wavelength_nm);
}

std::vector<ModeSolution> solve_modes(const CrossSection& cs, const SolverGrid& grid, double wavelength_nm,
                                      int n_modes, const SolverOptions& options) {
    if (n_modes < 1) throw std::invalid_argument("solve_modes: n_modes must be >= 1");
    const ModeOperator op = assemble_operator(cs, grid, wavelength_nm);
    const auto pairs = solve_level(cs, grid, wavelength_nm, n_modes + options.guard_vectors, options, op);

    const YeeLayout layout(grid);
    std::vector<ModeSolution> modes;
    for (const auto& p : pairs) {
        if (p.value <= 0.0) continue;
        const double n_eff = std::sqrt(p.value) / op.k0;
        if (!(n_eff > cs.n_clad && n_eff < cs.n_core)) continue;

        ModeSolution m;
        m.n_eff = n_eff;
        m.beta_sq = p.value;
        m.wavelength_nm = wavelength_nm;
        m.residual = p.residual;
        m.grid = grid;
        m.ex = unfold(layout, YeeLayout::ex, grid, p.vector, 0);
        m.ey = unfold(layout, YeeLayout::ey, grid, p.vector, op.ex_unknowns);

        double px = 0.0;
        double py = 0.0;
        std::size_t peak = 0;
        for (std::size_t k = 0; k < m.ex.values.size(); ++k) {
            px += std::norm(m.ex.values[k]);
            if (std::abs(m.ex.values[k]) > std::abs(m.ex.values[peak])) peak = k;
        }
        for (const auto& v : m.ey.values) py += std::norm(v);
        const double total = px + py;
        m.te_fraction = total > 0.0 ? std::clamp(px / total, 0.0, 1.0) : 0.0;
        const double sign = m.ex.values[peak].real() < 0.0 ? -1.0 : 1.0;
        const double scale = sign / std::sqrt(total * grid.dx_nm * grid.dy_nm);
        for (auto& v : m.ex.values) v *= scale;
        for (auto& v : m.ey.values) v *= scale;
        modes.push_back(std::move(m));
        if (static_cast<int>(modes.size()) == n_modes) break;
    }
    return modes;
}

std::size_t most_te_like(const std::vector<ModeSolution>& modes) {
    if (modes.empty()) throw std::invalid_argument("most_te_like: no modes");
    std::size_t best = 0;
    for (std::size_t k = 1; k < modes.size(); ++k)
        if (modes[k].te_fraction > modes[best].te_fraction + 1e-12) best = k;
    return best;
}

std::optional<ModeSolution> fundamental_te_mode(const CrossSection& cs, const SolverGrid& grid, double wavelength_nm,
                                                int candidates, const SolverOptions& options) {
    auto modes = solve_modes(cs, grid, wavelength_nm, candidates, options);
    if (modes.empty()) return std::nullopt;
    return std::move(modes[most_te_like(modes)]);
}

double lateral_asymmetry(const ModeSolution& mode) {
    const Field2D& f = mode.ex;
    double diff = 0.0;
    double total = 0.0;
    for (int j = 0; j < f.ny; ++j) {
        for (int i = 0; i < f.nx; ++i) {
            const auto a = f.at(i, j);
            diff += std::norm(a - f.at(f.nx - 1 - i, j));
            total += std::norm(a);
        }
    }
    return total > 0.0 ? std::sqrt(diff / total) / 2.0 : 0.0;
}

}  // namespace noems
