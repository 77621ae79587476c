#include "noems/taper.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "noems/parallel.hpp"

namespace noems {

double TaperProfile::max_width_nm() const {
    double w = 0.0;
    for (const auto& n : nodes) w = std::max(w, n.width_nm);
    return w;
}

void TaperProfile::validate() const {
    if (nodes.size() < 2) throw GeometryError("taper: at least two nodes required");
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        if (!(nodes[k].width_nm > 0.0) || !std::isfinite(nodes[k].width_nm)) {
            std::ostringstream msg;
            msg << "taper: width at node " << k << " must be > 0";
            throw GeometryError(msg.str());
        }
        if (k > 0 && !(nodes[k].x_nm > nodes[k - 1].x_nm)) {
            std::ostringstream msg;
            msg << "taper: positions must increase strictly (node " << k << ")";
            throw GeometryError(msg.str());
        }
    }
}

TaperProfile TaperProfile::linear(double entry_width_nm, double exit_width_nm, int segments, double pitch_nm) {
    if (segments < 1) throw GeometryError("taper: segments must be >= 1");
    if (!(pitch_nm > 0.0)) throw GeometryError("taper: pitch must be > 0");
    TaperProfile p;
    for (int k = 0; k <= segments; ++k) {
        const double t = static_cast<double>(k) / segments;
        const double w = k == segments ? exit_width_nm : entry_width_nm + (exit_width_nm - entry_width_nm) * t;
        p.nodes.push_back({k * pitch_nm, w});
    }
    p.validate();
    return p;
}

TaperProfile TaperProfile::refined(int factor) const {
    validate();
    if (factor < 1) throw GeometryError("taper: refinement factor must be >= 1");
    TaperProfile p;
    for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
        const auto& a = nodes[k];
        const auto& b = nodes[k + 1];
        for (int j = 0; j < factor; ++j) {
            const double t = static_cast<double>(j) / factor;
            p.nodes.push_back({a.x_nm + (b.x_nm - a.x_nm) * t, a.width_nm + (b.width_nm - a.width_nm) * t});
        }
    }
    p.nodes.push_back(nodes.back());
    return p;
}

TaperProfile TaperProfile::reversed() const {
    TaperProfile p;
    const double end = nodes.back().x_nm;
    for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) p.nodes.push_back({end - it->x_nm, it->width_nm});
    return p;
}

std::complex<double> overlap(const ModeSolution& a, const ModeSolution& b) {
    if (!(a.grid == b.grid) || a.ex.nx != b.ex.nx || a.ex.ny != b.ex.ny || a.ey.nx != b.ey.nx || a.ey.ny != b.ey.ny)
        throw GeometryError("overlap: modes live on different grids");
    if (a.wavelength_nm != b.wavelength_nm) throw GeometryError("overlap: modes at different wavelengths");
    std::complex<double> sum = 0.0;
    for (std::size_t k = 0; k < a.ex.values.size(); ++k) sum += std::conj(a.ex.values[k]) * b.ex.values[k];
    for (std::size_t k = 0; k < a.ey.values.size(); ++k) sum += std::conj(a.ey.values[k]) * b.ey.values[k];
    return sum * (a.ex.dx_nm * a.ex.dy_nm);
}

TaperSolver::TaperSolver(const CrossSection& companion, double wavelength_nm, double max_width_nm,
                         const TaperOptions& options)
    : companion_(companion), wavelength_nm_(wavelength_nm), max_width_nm_(max_width_nm), options_(options) {
    const CrossSection widest = section(max_width_nm);
    widest.validate();
    grid_ = SolverGrid::around(widest, options.dx_nm, options.dy_nm, options.margin_nm);
    grid_.lateral = Mirror::ex_even;
}

CrossSection TaperSolver::section(double width_nm) const {
    CrossSection cs = companion_;
    cs.rail_width_left_nm = width_nm;
    cs.rail_width_right_nm = width_nm;
    return cs;
}

void TaperSolver::solve_missing(const std::vector<double>& widths) {
    std::vector<double> todo;
    for (double w : widths)
        if (!cache_.contains(w) && std::find(todo.begin(), todo.end(), w) == todo.end()) todo.push_back(w);
    std::sort(todo.begin(), todo.end());
    for (double w : todo)
        if (w > max_width_nm_) throw GeometryError("taper: width exceeds the solver's grid sizing");

    std::vector<std::optional<ModeSolution>> solved(todo.size());
    parallel_for(todo.size(), options_.jobs, [&](std::size_t k) {
        solved[k] = fundamental_te_mode(section(todo[k]), grid_, wavelength_nm_, options_.candidates, options_.solver);
    });
    for (std::size_t k = 0; k < todo.size(); ++k)
        if (solved[k]) cache_.emplace(todo[k], std::move(*solved[k]));
}

const ModeSolution& TaperSolver::mode(double width_nm) {
    solve_missing({width_nm});
    const auto it = cache_.find(width_nm);
    if (it == cache_.end()) {
        std::ostringstream msg;
        msg << "taper: no guided mode at width " << width_nm << " nm";
        throw CutoffError(msg.str());
    }
    return it->second;
}

TaperLoss TaperSolver::loss(const TaperProfile& profile) {
    profile.validate();
    std::vector<double> widths;
    for (const auto& n : profile.nodes) widths.push_back(n.width_nm);
    solve_missing(widths);
    for (std::size_t k = 0; k < widths.size(); ++k) {
        if (!cache_.contains(widths[k])) {
            std::ostringstream msg;
            msg << "taper: mode cutoff at segment " << k << " (width " << widths[k] << " nm)";
            throw CutoffError(msg.str());
        }
    }

    TaperLoss result;
    for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
        const double o = std::min(std::abs(overlap(cache_.at(widths[k]), cache_.at(widths[k + 1]))), 1.0);
        const double db = o >= 1.0 ? 0.0 : -10.0 * std::log10(o * o);
        result.segment_db.push_back(db);
        result.total_db += db;
    }
    return result;
}

TaperLoss taper_loss(const TaperProfile& profile, const CrossSection& companion, double wavelength_nm,
                     const TaperOptions& options) {
    profile.validate();
    TaperSolver solver(companion, wavelength_nm, profile.max_width_nm(), options);
    return solver.loss(profile);
}

}  // namespace noems
