#include "noems/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <Eigen/Dense>
#include <unsupported/Eigen/LevenbergMarquardt>
#include <unsupported/Eigen/NumericalDiff>

#include "noems/csv.hpp"
#include "noems/errors.hpp"

namespace noems {

namespace {

constexpr double pi = std::numbers::pi;
constexpr char counts_header[] = "lambda_nm,V,counts,input_port,output_port";
constexpr char sweep_header[] = "lambda_nm,V,I3,I4,input_port";

double wrap_phase(double phi) {
    double w = std::remainder(phi, 2.0 * pi);
    if (w <= -pi) w += 2.0 * pi;
    return w;
}

// Eq. 2 sign: '+' at port 4, '-' at port 3.
double port_sign(int output_port) { return output_port == 3 ? -1.0 : 1.0; }

struct Sample {
    double v;
    double intensity;
    double weight;
    std::size_t port;  // index into the port list
};

struct Problem {
    PhaseModel model;
    double lambda_nm;
    std::vector<Sample> samples;
    std::vector<int> ports;
    double rate_max;

    double phase(double rate, double v) const {
        return model_phase(model, std::clamp(rate, 0.0, rate_max), v, lambda_nm);
    }
};

// x = [phi0, rate, A_0, B_0, A_1, B_1, ...]; I = A_p + B_p cos(phi0 + dphi).
struct Residuals : Eigen::DenseFunctor<double> {
    const Problem* p;
    Residuals(const Problem& problem, int params)
        : Eigen::DenseFunctor<double>(params, static_cast<int>(problem.samples.size())), p(&problem) {}

    int operator()(const InputType& x, ValueType& f) const {
        for (std::size_t i = 0; i < p->samples.size(); ++i) {
            const Sample& s = p->samples[i];
            const double model = x(2 + 2 * s.port) + x(3 + 2 * s.port) * std::cos(x(0) + p->phase(x(1), s.v));
            f(static_cast<Eigen::Index>(i)) = s.weight * (model - s.intensity);
        }
        return 0;
    }
};

struct LinearScan {
    double ssr;
    std::vector<Eigen::Vector3d> coeffs;  // per port: a, b cos, d sin
};

LinearScan linear_fit(const Problem& p, double rate) {
    const std::size_t np = p.ports.size();
    std::vector<Eigen::Matrix3d> ata(np, Eigen::Matrix3d::Zero());
    std::vector<Eigen::Vector3d> atb(np, Eigen::Vector3d::Zero());
    for (const Sample& s : p.samples) {
        const double ph = p.phase(rate, s.v);
        const Eigen::Vector3d row = s.weight * Eigen::Vector3d(1.0, std::cos(ph), std::sin(ph));
        ata[s.port] += row * row.transpose();
        atb[s.port] += row * (s.weight * s.intensity);
    }
    LinearScan out{0.0, std::vector<Eigen::Vector3d>(np)};
    for (std::size_t k = 0; k < np; ++k) out.coeffs[k] = ata[k].completeOrthogonalDecomposition().solve(atb[k]);
    for (const Sample& s : p.samples) {
        const double ph = p.phase(rate, s.v);
        const Eigen::Vector3d& c = out.coeffs[s.port];
        const double r = s.weight * (c(0) + c(1) * std::cos(ph) + c(2) * std::sin(ph) - s.intensity);
        out.ssr += r * r;
    }
    return out;
}

double max_gap(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    x.erase(std::unique(x.begin(), x.end()), x.end());
    double gap = 0.0;
    for (std::size_t i = 1; i < x.size(); ++i) gap = std::max(gap, x[i] - x[i - 1]);
    return gap;
}

Problem make_problem(const FringeDataset& data, const PhaseModel& model, const FitOptions& options) {
    data.validate();
    const auto lambdas = data.wavelengths();
    if (lambdas.size() != 1) throw std::invalid_argument("fringe fit needs exactly one wavelength");
    std::set<int> inputs;
    for (const auto& r : data.records) inputs.insert(r.input_port);
    if (inputs.size() != 1) throw std::invalid_argument("fringe fit needs exactly one input port");
    if (data.records.size() < 8) throw std::invalid_argument("fringe fit needs at least 8 data points");

    Problem p{model, lambdas.front(), {}, data.output_ports(), 0.0};
    Weighting w = options.weighting;
    if (w == Weighting::automatic) w = data.counts ? Weighting::poisson : Weighting::uniform;
    double v2_max = 0.0;
    std::vector<double> v2;
    for (const auto& r : data.records) {
        const auto port =
            static_cast<std::size_t>(std::find(p.ports.begin(), p.ports.end(), r.output_port) - p.ports.begin());
        const double weight = w == Weighting::poisson ? 1.0 / std::sqrt(std::max(r.intensity, 1.0)) : 1.0;
        p.samples.push_back({r.v, r.intensity, weight, port});
        v2.push_back(r.v * r.v);
        v2_max = std::max(v2_max, r.v * r.v);
    }
    if (!(v2_max > 0.0)) throw SolverError("insufficient fringe coverage: no bias beyond 0 V");

    if (const auto* spec = std::get_if<SpecPhase>(&model)) {
        if (spec->spec == nullptr) throw std::invalid_argument("spec phase model without a phase-shifter spec");
        const auto& a = spec->spec->actuator;
        const double reach = a.d0_nm - spec->spec->neff_curve.d_min();
        if (!(reach > 0.0)) throw GeometryError("n_eff curve does not extend below the rest gap");
        p.rate_max = reach / v2_max;
    } else {
        // Sampling limit: under pi of phase between neighbouring V^2 samples.
        const double gap = max_gap(v2);
        p.rate_max = pi / gap;
    }
    return p;
}

double phase_span(const Problem& p, double rate) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const Sample& s : p.samples) {
        const double ph = p.phase(rate, s.v);
        lo = std::min(lo, ph);
        hi = std::max(hi, ph);
    }
    return hi - lo;
}

}  // namespace

void FringeDataset::validate() const {
    std::set<std::tuple<double, double, int, int>> seen;
    for (const auto& r : records) {
        if (!std::isfinite(r.intensity) || r.intensity < 0.0)
            throw GeometryError("negative or non-finite intensity at V = " + csv::number(r.v));
        if (!seen.emplace(r.lambda_nm, r.v, r.input_port, r.output_port).second) {
            std::ostringstream msg;
            msg << "duplicate record (lambda " << r.lambda_nm << " nm, V " << r.v << ", input " << r.input_port
                << ", output " << r.output_port << ")";
            throw GeometryError(msg.str());
        }
    }
}

std::vector<double> FringeDataset::wavelengths() const {
    std::set<double> s;
    for (const auto& r : records) s.insert(r.lambda_nm);
    return {s.begin(), s.end()};
}

std::vector<int> FringeDataset::output_ports() const {
    std::set<int> s;
    for (const auto& r : records) s.insert(r.output_port);
    return {s.begin(), s.end()};
}

FringeDataset FringeDataset::select(double lambda_nm, int input_port) const {
    FringeDataset out{{}, counts, integration_time_s, detector};
    for (const auto& r : records)
        if (r.lambda_nm == lambda_nm && r.input_port == input_port) out.records.push_back(r);
    return out;
}

FringeDataset FringeDataset::select_port(int output_port) const {
    FringeDataset out{{}, counts, integration_time_s, detector};
    for (const auto& r : records)
        if (r.output_port == output_port) out.records.push_back(r);
    return out;
}

FringeDataset FringeDataset::read_csv(std::istream& in) {
    const std::string header = csv::peek_header(in);
    FringeDataset out;
    if (header == sweep_header) {
        out.counts = false;
        for (const auto& row : csv::read(in, sweep_header)) {
            const double lambda = csv::to_double(row, 0);
            const double v = csv::to_double(row, 1);
            const int input = static_cast<int>(csv::to_int(row, 4));
            out.records.push_back({lambda, v, csv::to_double(row, 2), input, 3});
            out.records.push_back({lambda, v, csv::to_double(row, 3), input, 4});
        }
    } else {
        for (const auto& row : csv::read(in, counts_header)) {
            const double intensity = csv::to_double(row, 2);
            if (intensity < 0.0) throw ParseError("negative intensity", row.line, 1);
            out.records.push_back({csv::to_double(row, 0), csv::to_double(row, 1), intensity,
                                   static_cast<int>(csv::to_int(row, 3)), static_cast<int>(csv::to_int(row, 4))});
        }
    }
    out.validate();
    return out;
}

void FringeDataset::write_csv(std::ostream& out) const {
    out << counts_header << '\n';
    for (const auto& r : records)
        out << csv::number(r.lambda_nm) << ',' << csv::number(r.v) << ',' << csv::number(r.intensity) << ','
            << r.input_port << ',' << r.output_port << '\n';
}

FringeDataset FringeDataset::from_sweep(const std::vector<SweepRow>& rows) {
    FringeDataset out;
    out.counts = false;
    for (const auto& r : rows) {
        out.records.push_back({r.lambda_nm, r.v, r.i3, r.input_port, 3});
        out.records.push_back({r.lambda_nm, r.v, r.i4, r.input_port, 4});
    }
    return out;
}

SplitRatio split_ratio(double i13, double i24, double i14, double i23) {
    if (!(i13 > 0.0 && i24 > 0.0 && i14 > 0.0 && i23 > 0.0))
        throw std::domain_error("split ratio undefined: every port intensity must be > 0");
    const double sr = std::sqrt((i13 * i24) / (i14 * i23));
    return {sr, 20.0 * std::log10(sr)};
}

std::vector<double> extrema_visibility(const FringeDataset& data, int output_port) {
    auto records = data.select_port(output_port).records;
    if (data.wavelengths().size() > 1) throw std::invalid_argument("extrema visibility needs one wavelength");
    std::stable_sort(records.begin(), records.end(),
                     [](const FringeRecord& a, const FringeRecord& b) { return a.v * a.v < b.v * b.v; });

    // Plateau compression: runs of equal values collapse to one.
    std::vector<double> series;
    for (const auto& r : records) {
        const double tol = 1e-12 * std::max(1.0, std::abs(r.intensity));
        if (series.empty() || std::abs(series.back() - r.intensity) > tol) series.push_back(r.intensity);
    }
    std::vector<double> extrema;
    for (std::size_t i = 1; i + 1 < series.size(); ++i) {
        const bool peak = series[i] > series[i - 1] && series[i] > series[i + 1];
        const bool dip = series[i] < series[i - 1] && series[i] < series[i + 1];
        if (peak || dip) extrema.push_back(series[i]);
    }
    if (extrema.size() < 2)
        throw std::runtime_error("too few interior extrema at port " + std::to_string(output_port) + " (found " +
                                 std::to_string(extrema.size()) + ")");
    std::vector<double> out;
    for (std::size_t i = 0; i + 1 < extrema.size(); i += 2) {
        const double hi = std::max(extrema[i], extrema[i + 1]);
        const double lo = std::min(extrema[i], extrema[i + 1]);
        out.push_back((hi - lo) / (hi + lo));
    }
    return out;
}

double model_phase(const PhaseModel& model, double rate, double v, double lambda_nm) {
    if (std::holds_alternative<QuadraticPhase>(model)) return rate * v * v;
    const PhaseShifterSpec& spec = *std::get<SpecPhase>(model).spec;
    const NeffCurve& curve = spec.neff_curve;
    const double d0 = spec.actuator.d0_nm;
    const double d = d0 - rate * v * v;
    if (!curve.covers(d)) throw CoverageError("gap " + csv::number(d) + " nm outside the n_eff curve");
    return 2.0 * pi / lambda_nm * spec.length_nm * (curve(d) - curve(d0));
}

const PortFit& FringeFit::port(int output_port) const {
    for (const auto& p : ports)
        if (p.output_port == output_port) return p;
    throw std::out_of_range("no fit for output port " + std::to_string(output_port));
}

FringeFit fit_fringes(const FringeDataset& data, const PhaseModel& model, const FitOptions& options) {
    const Problem p = make_problem(data, model, options);
    const std::size_t np = p.ports.size();
    const int nparams = 2 + 2 * static_cast<int>(np);

    // Coarse scan over the phase rate with the fringe linear in (a, b cos, d sin).
    double best_rate = 0.0;
    LinearScan best{std::numeric_limits<double>::infinity(), {}};
    const int scan = std::max(options.scan_points, 8);
    for (int k = 1; k <= scan; ++k) {
        const double rate = p.rate_max * k / scan;
        LinearScan s = linear_fit(p, rate);
        if (s.ssr < best.ssr) {
            best = std::move(s);
            best_rate = rate;
        }
    }

    // Phase estimate from the strongest port; amplitude magnitudes per port.
    std::size_t lead = 0;
    for (std::size_t k = 0; k < np; ++k)
        if (best.coeffs[k].tail<2>().norm() > best.coeffs[lead].tail<2>().norm()) lead = k;
    const double s_lead = port_sign(p.ports[lead]);
    const double phi_scan = std::atan2(-s_lead * best.coeffs[lead](2), s_lead * best.coeffs[lead](1));

    std::vector<double> starts{phi_scan, 0.0, pi / 2, pi, 3 * pi / 2};
    Eigen::VectorXd best_x;
    double best_ssr = std::numeric_limits<double>::infinity();
    int evaluations = 0;
    for (double phi_start : starts) {
        Eigen::VectorXd x(nparams);
        x(0) = phi_start;
        x(1) = best_rate;
        for (std::size_t k = 0; k < np; ++k) {
            x(2 + 2 * k) = best.coeffs[k](0);
            x(3 + 2 * k) = port_sign(p.ports[k]) * best.coeffs[k].tail<2>().norm();
        }
        Residuals f(p, nparams);
        Eigen::NumericalDiff<Residuals> diff(f);
        Eigen::LevenbergMarquardt<Eigen::NumericalDiff<Residuals>> lm(diff);
        lm.setMaxfev(options.max_evaluations);
        const auto status = lm.minimize(x);
        evaluations += static_cast<int>(lm.nfev());
        if (status == Eigen::LevenbergMarquardtSpace::ImproperInputParameters) continue;
        Eigen::VectorXd r(p.samples.size());
        f(x, r);
        const double ssr = r.squaredNorm();
        if (std::isfinite(ssr) && ssr < best_ssr) {
            best_ssr = ssr;
            best_x = x;
        }
    }
    if (best_x.size() == 0) throw SolverError("fringe fit did not converge from any start");

    Eigen::VectorXd x = best_x;
    x(1) = std::clamp(x(1), 0.0, p.rate_max);
    if (phase_span(p, x(1)) < 2.0 * pi * (1.0 - 1e-9))
        throw SolverError("insufficient fringe coverage: fitted phase spans " +
                          csv::number(phase_span(p, x(1)) / pi) + " pi, need 2 pi");

    // Orient phi0 so the port visibilities come out non-negative.
    double orientation = 0.0;
    for (std::size_t k = 0; k < np; ++k) orientation += port_sign(p.ports[k]) * x(3 + 2 * k) * std::abs(x(2 + 2 * k));
    if (orientation < 0.0) {
        x(0) += pi;
        for (std::size_t k = 0; k < np; ++k) x(3 + 2 * k) = -x(3 + 2 * k);
    }

    // Covariance from the weighted Jacobian.
    Residuals f(p, nparams);
    Eigen::NumericalDiff<Residuals> diff(f);
    Eigen::MatrixXd jac(p.samples.size(), nparams);
    diff.df(x, jac);
    const double dof = std::max<double>(1.0, static_cast<double>(p.samples.size()) - nparams);
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    Eigen::MatrixXd cov = jtj.completeOrthogonalDecomposition().pseudoInverse() * (best_ssr / dof);

    FringeFit fit;
    fit.lambda_nm = p.lambda_nm;
    fit.phi0 = wrap_phase(x(0));
    fit.rate = x(1);
    fit.phi0_error = std::sqrt(std::max(0.0, cov(0, 0)));
    fit.rate_error = std::sqrt(std::max(0.0, cov(1, 1)));
    fit.is_spec = std::holds_alternative<SpecPhase>(model);
    fit.evaluations = evaluations;
    for (std::size_t k = 0; k < np; ++k) {
        const double a = x(2 + 2 * k);
        const double b = port_sign(p.ports[k]) * x(3 + 2 * k);
        const double sa = std::sqrt(std::max(0.0, cov(2 + 2 * k, 2 + 2 * k)));
        const double sb = std::sqrt(std::max(0.0, cov(3 + 2 * k, 3 + 2 * k)));
        PortFit pf{p.ports[k], 2.0 * a, a > 0.0 ? std::clamp(b / a, 0.0, 1.0) : 0.0, 2.0 * sa, 0.0};
        if (a > 0.0) pf.nu_error = std::hypot(sb / a, b * sa / (a * a));
        fit.ports.push_back(pf);
    }
    double sq = 0.0;
    for (const Sample& s : p.samples) {
        const double m = x(2 + 2 * s.port) + x(3 + 2 * s.port) * std::cos(x(0) + p.phase(x(1), s.v));
        sq += (m - s.intensity) * (m - s.intensity);
    }
    fit.residual_rms = std::sqrt(sq / static_cast<double>(p.samples.size()));
    return fit;
}

PhaseMap phase_map(const FringeDataset& data, const PhaseModel& model, int input_port, const FitOptions& options) {
    data.validate();
    PhaseMap map;
    for (double lambda : data.wavelengths()) {
        const FringeDataset slice = data.select(lambda, input_port);
        if (slice.records.empty()) continue;
        FringeFit fit;
        try {
            fit = fit_fringes(slice, model, options);
        } catch (const std::exception& e) {
            map.failures.emplace_back(lambda, e.what());
            continue;
        }

        // Least-squares cos(theta) per bias from A_p + B_p cos(theta).
        std::map<double, std::pair<double, double>> acc;  // V -> (sum B (I - A), sum B^2)
        for (const auto& r : slice.records) {
            const PortFit& pf = fit.port(r.output_port);
            const double a = pf.i0 / 2.0;
            const double b = port_sign(r.output_port) * a * pf.nu;
            acc[r.v].first += b * (r.intensity - a);
            acc[r.v].second += b * b;
        }
        std::vector<std::pair<double, double>> theta;  // (V, theta)
        for (const auto& [v, s] : acc) {
            const double c = s.second > 0.0 ? std::clamp(s.first / s.second, -1.0, 1.0) : 1.0;
            const double target = fit.phi0 + model_phase(model, fit.rate, v, lambda);
            const double base = std::acos(c);
            double best = 0.0;
            double dist = std::numeric_limits<double>::infinity();
            for (double branch : {base, -base}) {
                const double k = std::round((target - branch) / (2.0 * pi));
                const double cand = branch + 2.0 * pi * k;
                if (std::abs(cand - target) < dist) {
                    dist = std::abs(cand - target);
                    best = cand;
                }
            }
            theta.emplace_back(v, best);
        }
        std::stable_sort(theta.begin(), theta.end(),
                         [](const auto& a, const auto& b) { return a.first * a.first < b.first * b.first; });
        for (std::size_t i = 1; i < theta.size(); ++i) {
            double step = theta[i].second - theta[i - 1].second;
            while (step > pi) {
                theta[i].second -= 2.0 * pi;
                step -= 2.0 * pi;
            }
            while (step <= -pi) {
                theta[i].second += 2.0 * pi;
                step += 2.0 * pi;
            }
        }
        double reference = fit.phi0;
        for (const auto& [v, t] : theta)
            if (v == 0.0) {
                reference = t;
                break;
            }
        std::sort(theta.begin(), theta.end());
        for (const auto& [v, t] : theta) map.points.push_back({lambda, v, v == 0.0 ? 0.0 : t - reference});
    }
    return map;
}

void write_phase_map_csv(std::ostream& out, const PhaseMap& map) {
    out << "lambda_nm,V,delta_phi_rad\n";
    for (const auto& p : map.points)
        out << csv::number(p.lambda_nm) << ',' << csv::number(p.v) << ',' << csv::number(p.delta_phi) << '\n';
}

double extinction_ratio(std::span<const double> intensities) {
    if (intensities.empty()) throw std::domain_error("extinction ratio of an empty series");
    const auto [lo, hi] = std::minmax_element(intensities.begin(), intensities.end());
    if (!(*lo > 0.0)) throw std::domain_error("extinction ratio undefined: minimum intensity <= 0");
    return 10.0 * std::log10(*hi / *lo);
}

}  // namespace noems
