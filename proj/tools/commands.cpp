#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>

#include "noems/analysis.hpp"
#include "noems/circuit.hpp"
#include "noems/csv.hpp"
#include "noems/neff_curve.hpp"
#include "noems/parallel.hpp"
#include "noems/photonsim.hpp"
#include "noems/taper.hpp"

namespace noems::cli {

namespace fs = std::filesystem;
using config::Json;
using config::Object;

std::filesystem::path Context::resolve(const std::string& path) const {
    fs::path p = path;
    if (p.is_relative()) p = config_path.parent_path() / p;
    return p;
}

namespace {

void write_file(const Context& ctx, const std::string& name, const auto& body) {
    const fs::path path = ctx.out_dir / name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write output file: " + path.string());
    body(out);
    if (!out) throw ConfigError("write failed: " + path.string());
}

std::string fixed(double x, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

/// Array of numbers or {"from", "to", "step"}.
std::vector<double> number_list(Object& o, const std::string& key) {
    const Json& v = o.raw(key);
    if (v.is_array()) return o.numbers(key);  // re-read for type checks
    Object r(v, o.context() + "." + key);
    const double from = r.number("from");
    const double to = r.number("to");
    const double step = r.number("step");
    r.finish();
    if (!(step > 0.0) || to < from) throw ConfigError(r.context() + ": need step > 0 and to >= from");
    std::vector<double> out;
    for (long long k = 0;; ++k) {
        const double x = from + static_cast<double>(k) * step;
        if (x > to + 1e-9 * step) break;
        out.push_back(x);
    }
    return out;
}

CrossSection read_cross_section(Object o) {
    CrossSection cs;
    cs.rail_width_left_nm = o.number("rail_left_nm", cs.rail_width_left_nm);
    cs.rail_width_right_nm = o.number("rail_right_nm", cs.rail_width_right_nm);
    cs.slot_width_nm = o.number("slot_nm", cs.slot_width_nm);
    cs.thickness_nm = o.number("thickness_nm", cs.thickness_nm);
    cs.n_core = o.number("n_core", cs.n_core);
    cs.n_clad = o.number("n_clad", cs.n_clad);
    o.finish();
    try {
        cs.validate();
    } catch (const GeometryError& e) {
        throw ConfigError(o.context() + ": " + e.what());
    }
    return cs;
}

struct GridKeys {
    double dx_nm = SolverGrid::default_step_nm;
    double dy_nm = SolverGrid::default_step_nm;
    double margin_nm = SolverGrid::default_margin_nm;
    bool fold_lateral = true;
};

GridKeys read_grid(Object& parent, double default_step) {
    GridKeys g;
    g.dx_nm = g.dy_nm = default_step;
    if (!parent.has("grid")) return g;
    Object o = parent.child("grid");
    g.dx_nm = o.number("dx_nm", g.dx_nm);
    g.dy_nm = o.number("dy_nm", g.dy_nm);
    g.margin_nm = o.number("margin_nm", g.margin_nm);
    g.fold_lateral = o.boolean("fold_lateral", g.fold_lateral);
    o.finish();
    if (!(g.dx_nm > 0.0 && g.dy_nm > 0.0 && g.margin_nm >= 0.0))
        throw ConfigError(o.context() + ": grid steps must be > 0 and margin >= 0");
    return g;
}

int positive_int(Object& o, const std::string& key, long long fallback) {
    const long long v = o.integer(key, fallback);
    if (v <= 0 || v > 1'000'000'000) throw ConfigError(o.context() + ": key '" + key + "' must be a positive integer");
    return static_cast<int>(v);
}

void write_field_csv(std::ostream& out, const Field2D& f) {
    out << "x_nm,y_nm,re,im\n";
    for (int j = 0; j < f.ny; ++j)
        for (int i = 0; i < f.nx; ++i) {
            const auto v = f.at(i, j);
            out << csv::number(f.x_nm(i)) << ',' << csv::number(f.y_nm(j)) << ',' << csv::number(v.real()) << ','
                << csv::number(v.imag()) << '\n';
        }
}

std::uint64_t derived_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

Summary cmd_solve(const Context& ctx) {
    Object o(ctx.config, ctx.config_path.string());
    const CrossSection cs = read_cross_section(o.child("cross_section"));
    const double lambda = o.number("wavelength_nm");
    const GridKeys g = read_grid(o, SolverGrid::default_step_nm);
    const int modes = positive_int(o, "modes", 3);
    const bool write_fields = o.boolean("write_fields", true);
    o.finish();

    SolverGrid grid = SolverGrid::around(cs, g.dx_nm, g.dy_nm, g.margin_nm);
    if (g.fold_lateral && cs.laterally_symmetric()) grid.lateral = Mirror::ex_even;
    try {
        grid.validate(cs, lambda);
    } catch (const GeometryError& e) {
        throw ConfigError(ctx.config_path.string() + ": " + e.what());
    }
    if (ctx.dry_run) return {};

    const auto found = solve_modes(cs, grid, lambda, modes);
    if (found.empty()) throw CutoffError("no guided mode at " + csv::number(lambda) + " nm");
    const std::size_t te = most_te_like(found);

    write_file(ctx, "modes.txt", [&](std::ostream& out) {
        out << "wavelength_nm = " << csv::number(lambda) << '\n';
        out << "grid_nm = " << csv::number(grid.dx_nm) << " x " << csv::number(grid.dy_nm) << '\n';
        out << "cells = " << grid.nx() << " x " << grid.ny() << '\n';
        for (std::size_t k = 0; k < found.size(); ++k)
            out << "mode " << k << ": n_eff = " << fixed(found[k].n_eff, 6)
                << ", te_fraction = " << fixed(found[k].te_fraction, 4) << '\n';
        out << "fundamental_te = mode " << te << '\n';
        out << "n_eff = " << fixed(found[te].n_eff, 6) << '\n';
    });
    if (write_fields) {
        write_file(ctx, "mode_ex.csv", [&](std::ostream& out) { write_field_csv(out, found[te].ex); });
        write_file(ctx, "mode_ey.csv", [&](std::ostream& out) { write_field_csv(out, found[te].ey); });
    }
    Summary s;
    s["n_eff"] = found[te].n_eff;
    s["te_fraction"] = found[te].te_fraction;
    s["modes_found"] = found.size();
    return s;
}

Summary cmd_curve(const Context& ctx) {
    Object o(ctx.config, ctx.config_path.string());
    const CrossSection cs = read_cross_section(o.child("cross_section"));
    const double lambda = o.number("wavelength_nm");
    const std::vector<double> d = number_list(o, "d_nm");
    const GridKeys g = read_grid(o, SolverGrid::default_step_nm);
    const int candidates = positive_int(o, "candidates", 3);
    o.finish();
    if (d.size() < 4) throw ConfigError(ctx.config_path.string() + ": d_nm needs at least 4 values");
    if (ctx.dry_run) return {};

    CurveOptions opts;
    opts.dx_nm = g.dx_nm;
    opts.dy_nm = g.dy_nm;
    opts.margin_nm = g.margin_nm;
    opts.fold_lateral = g.fold_lateral;
    opts.candidates = candidates;
    opts.jobs = ctx.jobs;
    const NeffCurve curve = build_neff_curve(cs, lambda, d, opts);
    write_file(ctx, "neff_curve.csv", [&](std::ostream& out) { curve.write_csv(out); });
    Summary s;
    s["points"] = d.size();
    s["n_eff_min"] = curve.samples().back().n_eff;
    s["n_eff_max"] = curve.samples().front().n_eff;
    return s;
}

Summary cmd_taper(const Context& ctx) {
    Object o(ctx.config, ctx.config_path.string());
    const CrossSection companion = read_cross_section(o.child("companion"));
    const std::vector<double> lambdas = number_list(o, "wavelengths_nm");
    Object p = o.child("profile");
    const double entry = p.number("entry_width_nm");
    const double exit = p.number("exit_width_nm");
    const int segments = positive_int(p, "segments", 5);
    const double pitch = p.number("pitch_nm");
    p.finish();
    std::vector<int> refinements{1};
    if (o.has("refinements")) {
        refinements.clear();
        for (double r : o.numbers("refinements")) {
            if (r < 1.0 || r != std::floor(r)) throw ConfigError(o.context() + ": refinements must be integers >= 1");
            refinements.push_back(static_cast<int>(r));
        }
    }
    const GridKeys g = read_grid(o, 10.0);
    o.finish();
    TaperProfile profile;
    try {
        profile = TaperProfile::linear(entry, exit, segments, pitch);
        profile.validate();
    } catch (const GeometryError& e) {
        throw ConfigError(ctx.config_path.string() + ": " + e.what());
    }
    if (ctx.dry_run) return {};

    TaperOptions opts;
    opts.dx_nm = g.dx_nm;
    opts.dy_nm = g.dy_nm;
    opts.margin_nm = g.margin_nm;
    opts.jobs = ctx.jobs;
    struct Result {
        double lambda;
        int refinement;
        TaperProfile profile;
        TaperLoss loss;
    };
    std::vector<Result> results;
    for (double lambda : lambdas) {
        TaperSolver solver(companion, lambda, profile.max_width_nm(), opts);
        for (int r : refinements) {
            const TaperProfile refined = profile.refined(r);
            results.push_back({lambda, r, refined, solver.loss(refined)});
        }
    }
    write_file(ctx, "taper_loss.csv", [&](std::ostream& out) {
        out << "lambda_nm,refinement,segments,total_db\n";
        for (const auto& r : results)
            out << csv::number(r.lambda) << ',' << r.refinement << ',' << r.profile.segments() << ','
                << csv::number(r.loss.total_db) << '\n';
    });
    write_file(ctx, "taper_segments.csv", [&](std::ostream& out) {
        out << "lambda_nm,refinement,segment,width_in_nm,width_out_nm,loss_db\n";
        for (const auto& r : results)
            for (std::size_t k = 0; k < r.loss.segment_db.size(); ++k)
                out << csv::number(r.lambda) << ',' << r.refinement << ',' << k << ','
                    << csv::number(r.profile.nodes[k].width_nm) << ',' << csv::number(r.profile.nodes[k + 1].width_nm)
                    << ',' << csv::number(r.loss.segment_db[k]) << '\n';
    });
    Summary s = Json::array();
    for (const auto& r : results) s.push_back({{"lambda_nm", r.lambda}, {"refinement", r.refinement}, {"total_db", r.loss.total_db}});
    return {{"losses", s}};
}

Summary cmd_sweep(const Context& ctx) {
    Object o(ctx.config, ctx.config_path.string());
    const fs::path netlist_path = ctx.resolve(o.string("netlist"));
    const std::vector<double> lambdas = number_list(o, "lambda_nm");
    const std::vector<double> volts = number_list(o, "V");
    std::vector<int> inputs{1, 2};
    if (o.has("input_ports")) {
        inputs.clear();
        for (double p : o.numbers("input_ports")) {
            if (p != 1.0 && p != 2.0) throw ConfigError(o.context() + ": input_ports entries must be 1 or 2");
            inputs.push_back(static_cast<int>(p));
        }
    }
    const double floor_rel = o.number("noise_floor", 0.0);
    o.finish();
    if (floor_rel < 0.0 || floor_rel >= 1.0) throw ConfigError(o.context() + ": noise_floor must lie in [0, 1)");
    const Netlist nl = load_netlist(netlist_path);
    if (ctx.dry_run) return {};

    std::map<int, std::vector<SweepRow>> by_input;
    for (int in : inputs) by_input[in] = sweep(nl, lambdas, volts, in, ctx.jobs);
    write_file(ctx, "sweep.csv", [&](std::ostream& out) {
        std::vector<SweepRow> all;
        for (int in : inputs) all.insert(all.end(), by_input[in].begin(), by_input[in].end());
        write_sweep_csv(out, all);
    });

    Summary s;
    s["points"] = lambdas.size() * volts.size() * inputs.size();
    if (by_input.contains(1) && by_input.contains(2)) {
        const auto& a = by_input[1];
        const auto& b = by_input[2];
        double peak = 0.0;
        for (const auto* rows : {&a, &b})
            for (const auto& r : *rows) peak = std::max({peak, r.i3, r.i4});
        const double floor = floor_rel * peak;
        double sr_min = INFINITY;
        double sr_max = -INFINITY;
        write_file(ctx, "sr_map.csv", [&](std::ostream& out) {
            out << "lambda_nm,V,SR,SR_dB\n";
            for (std::size_t k = 0; k < a.size(); ++k) {
                auto f = [&](double x) { return std::max(x, floor); };
                std::string lin = "nan";
                std::string db = "nan";
                try {
                    const SplitRatio sr = split_ratio(f(a[k].i3), f(b[k].i4), f(a[k].i4), f(b[k].i3));
                    lin = csv::number(sr.linear);
                    db = csv::number(sr.db);
                    sr_min = std::min(sr_min, sr.db);
                    sr_max = std::max(sr_max, sr.db);
                } catch (const std::domain_error&) {
                }
                out << csv::number(a[k].lambda_nm) << ',' << csv::number(a[k].v) << ',' << lin << ',' << db << '\n';
            }
        });
        if (std::isfinite(sr_min)) {
            s["sr_db_min"] = sr_min;
            s["sr_db_max"] = sr_max;
        }
    }
    return s;
}

Summary cmd_fit(const Context& ctx) {
    Object o(ctx.config, ctx.config_path.string());
    const fs::path data_path = ctx.resolve(o.string("data"));
    const std::string model_name = o.string("model", "quadratic");
    std::optional<config::PhaseShifterFile> device;
    if (model_name == "spec")
        device = config::load_phase_shifter(ctx.resolve(o.string("phase_shifter")));
    else if (model_name != "quadratic")
        throw ConfigError(o.context() + ": model must be 'quadratic' or 'spec'");
    const int input_port = static_cast<int>(o.integer("input_port", 1));
    FitOptions fopts;
    const std::string weighting = o.string("weighting", "automatic");
    if (weighting == "uniform")
        fopts.weighting = Weighting::uniform;
    else if (weighting == "poisson")
        fopts.weighting = Weighting::poisson;
    else if (weighting != "automatic")
        throw ConfigError(o.context() + ": weighting must be automatic, uniform or poisson");
    fopts.max_evaluations = positive_int(o, "max_evaluations", fopts.max_evaluations);
    std::optional<std::vector<double>> only;
    if (o.has("wavelengths_nm")) only = number_list(o, "wavelengths_nm");
    o.finish();

    std::ifstream in(data_path, std::ios::binary);
    if (!in) throw ConfigError("cannot open fringe data: " + data_path.string());
    FringeDataset data;
    try {
        data = FringeDataset::read_csv(in);
    } catch (const ParseError& e) {
        throw ParseError(data_path.string() + ":" + e.what());
    }
    if (ctx.dry_run) return {};

    PhaseModel model = QuadraticPhase{};
    if (device) model = SpecPhase{&device->spec};
    const std::vector<double> lambdas = only ? *only : data.wavelengths();

    struct Slot {
        std::optional<FringeFit> fit;
        std::string error;
    };
    std::vector<Slot> slots(lambdas.size());
    parallel_for(lambdas.size(), ctx.jobs, [&](std::size_t i) {
        try {
            slots[i].fit = fit_fringes(data.select(lambdas[i], input_port), model, fopts);
        } catch (const std::exception& e) {
            slots[i].error = e.what();
        }
    });

    FringeDataset selected{{}, data.counts, data.integration_time_s, data.detector};
    for (double l : lambdas) {
        const auto part = data.select(l, input_port);
        selected.records.insert(selected.records.end(), part.records.begin(), part.records.end());
    }
    const PhaseMap map = phase_map(selected, model, input_port, fopts);

    Json fits = Json::array();
    Json failures = Json::array();
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        if (!slots[i].fit) {
            failures.push_back({{"lambda_nm", lambdas[i]}, {"reason", slots[i].error}});
            continue;
        }
        const FringeFit& f = *slots[i].fit;
        Json ports = Json::array();
        for (const auto& p : f.ports)
            ports.push_back({{"output_port", p.output_port},
                             {"I0", p.i0},
                             {"I0_error", p.i0_error},
                             {"nu", p.nu},
                             {"nu_error", p.nu_error}});
        Json j{{"lambda_nm", f.lambda_nm}, {"phi0_rad", f.phi0}, {"phi0_error_rad", f.phi0_error}};
        if (f.is_spec) {
            j["eta_eff_nm_per_V2"] = f.rate;
            j["eta_eff_error_nm_per_V2"] = f.rate_error;
        } else {
            j["phase_rate_rad_per_V2"] = f.rate;
            j["phase_rate_error_rad_per_V2"] = f.rate_error;
        }
        j["ports"] = ports;
        j["residual_rms"] = f.residual_rms;
        j["evaluations"] = f.evaluations;
        fits.push_back(j);
    }
    write_file(ctx, "fit.json", [&](std::ostream& out) {
        Json report{{"model", model_name}, {"input_port", input_port}, {"fits", fits}, {"failures", failures}};
        out << report.dump(2) << '\n';
    });
    write_file(ctx, "phase_map.csv", [&](std::ostream& out) { write_phase_map_csv(out, map); });
    Summary s{{"fitted", fits.size()}, {"failed", failures.size()}};
    if (fits.empty()) throw SolverError("no wavelength could be fitted: " + slots.front().error);
    return s;
}

Summary cmd_g2(const Context& ctx) {
    Object o(ctx.config, ctx.config_path.string());
    EmitterModel em;
    {
        Object e = o.child("emitter");
        em.pulse_rate_hz = e.number("pulse_rate_hz", em.pulse_rate_hz);
        em.emission_prob = e.number("emission_prob", em.emission_prob);
        em.lifetime_ns = e.number("lifetime_ns", em.lifetime_ns);
        em.poissonian = e.boolean("poissonian", false);
        if (e.has("multiphoton_prob") && e.has("target_g2_zero"))
            throw ConfigError(e.context() + ": give multiphoton_prob or target_g2_zero, not both");
        if (e.has("target_g2_zero")) {
            try {
                em.multiphoton_prob = multiphoton_prob_for_g2(em.emission_prob, e.number("target_g2_zero"));
            } catch (const std::invalid_argument& ex) {
                throw ConfigError(e.context() + ": " + ex.what());
            }
        } else {
            em.multiphoton_prob = e.number("multiphoton_prob", 0.0);
        }
        e.finish();
        em.rng_seed = ctx.seed;
        try {
            em.validate();
        } catch (const std::invalid_argument& ex) {
            throw ConfigError(e.context() + ": " + ex.what());
        }
    }
    const long long pulses = o.integer("pulses", 1'000'000);
    if (pulses < 0) throw ConfigError(o.context() + ": pulses must be >= 0");

    double i3_fraction = 0.5;
    {
        Object r = o.child("router");
        if (r.has("i3_fraction")) {
            i3_fraction = r.number("i3_fraction");
            if (i3_fraction < 0.0 || i3_fraction > 1.0) throw ConfigError(r.context() + ": i3_fraction outside [0, 1]");
        } else {
            const Netlist nl = load_netlist(ctx.resolve(r.string("netlist")));
            const double lambda = r.number("wavelength_nm");
            const double v = r.number("V");
            const int in = static_cast<int>(r.integer("input_port", 1));
            if (!ctx.dry_run) {
                const PortIntensities pi = evaluate(nl, lambda, v, in);
                i3_fraction = pi.i3 + pi.i4 > 0.0 ? pi.i3 / (pi.i3 + pi.i4) : 0.5;
            }
        }
        r.finish();
    }
    G2Options hopts;
    if (o.has("histogram")) {
        Object h = o.child("histogram");
        hopts.bin_ps = h.number("bin_ps", hopts.bin_ps);
        hopts.window_ps = h.number("window_ps", hopts.window_ps);
        hopts.normalization_delay_ps = h.number("normalization_delay_ps", hopts.normalization_delay_ps);
        hopts.normalization_peaks = static_cast<int>(h.integer("normalization_peaks", hopts.normalization_peaks));
        h.finish();
    }
    const std::string tags = o.string("tags", "none");
    if (tags != "none" && tags != "csv" && tags != "binary")
        throw ConfigError(o.context() + ": tags must be none, csv or binary");
    o.finish();
    if (ctx.dry_run) return {};

    if (static_cast<std::uint64_t>(pulses) < min_recommended_pulses)
        std::cerr << "warning: " << pulses << " pulses give poor statistics (recommended >= " << min_recommended_pulses
                  << ")\n";
    const double duration_s = static_cast<double>(pulses) / em.pulse_rate_hz;
    const TimeTagStream stream = generate_stream(em, duration_s);
    const auto [port3, port4] = route_stream(stream, i3_fraction, derived_seed(ctx.seed, 1));
    const TimeTagStream merged = merge_streams(port3, port4);
    const G2Histogram h = g2_histogram(merged, hopts);

    write_file(ctx, "g2_histogram.csv", [&](std::ostream& out) { write_histogram_csv(out, h); });
    Summary s{{"pulses", pulses},
              {"multiphoton_prob", em.multiphoton_prob},
              {"expected_g2_zero", em.poissonian ? 1.0 : em.expected_g2_zero()},
              {"g2_zero", h.g2_zero},
              {"g2_zero_error", h.g2_zero_error},
              {"i3_fraction", i3_fraction},
              {"counts_port3", port3.tags.size()},
              {"counts_port4", port4.tags.size()}};
    write_file(ctx, "g2.json", [&](std::ostream& out) { out << s.dump(2) << '\n'; });
    if (tags == "csv") {
        write_file(ctx, "tags.csv", [&](std::ostream& out) { write_tags_csv(out, merged); });
    } else if (tags == "binary") {
        write_file(ctx, "tags.ttag", [&](std::ostream& out) { write_tags_binary(out, merged); });
    }
    return s;
}

}  // namespace noems::cli
