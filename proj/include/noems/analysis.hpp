#pragma once

#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "noems/actuator.hpp"
#include "noems/circuit.hpp"

namespace noems {

struct FringeRecord {
    double lambda_nm;
    double v;
    double intensity;
    int input_port;
    int output_port;
};

struct FringeDataset {
    std::vector<FringeRecord> records;
    bool counts = true;  // photon counts (Poisson weighting) vs. arbitrary intensity
    double integration_time_s = 0.0;
    std::string detector;

    /// Throws GeometryError on negative intensities or duplicate
    /// (lambda, V, input, output) records.
    void validate() const;

    std::vector<double> wavelengths() const;
    std::vector<int> output_ports() const;
    FringeDataset select(double lambda_nm, int input_port) const;
    FringeDataset select_port(int output_port) const;

    /// Reads `lambda_nm,V,counts,input_port,output_port`, or a circuit sweep
    /// file `lambda_nm,V,I3,I4,input_port`.
    static FringeDataset read_csv(std::istream& in);
    void write_csv(std::ostream& out) const;
    static FringeDataset from_sweep(const std::vector<SweepRow>& rows);
};

struct SplitRatio {
    double linear;
    double db;  // 20 log10(linear)
};

/// sqrt((I13 I24) / (I14 I23)); std::domain_error unless all four are > 0.
SplitRatio split_ratio(double i13, double i24, double i14, double i23);

/// (Imax - Imin) / (Imax + Imin) for consecutive, non-overlapping extremum
/// pairs of one output port, ordered by V^2. Flat runs count as a single
/// extremum. std::runtime_error on fewer than two interior extrema.
std::vector<double> extrema_visibility(const FringeDataset& data, int output_port);

/// Delta phi = c V^2 with c fitted.
struct QuadraticPhase {};
/// Delta phi from a phase-shifter spec with its transduction efficiency
/// fitted (temperature scale folded in).
struct SpecPhase {
    const PhaseShifterSpec* spec = nullptr;
};
using PhaseModel = std::variant<QuadraticPhase, SpecPhase>;

enum class Weighting { automatic, uniform, poisson };

struct FitOptions {
    Weighting weighting = Weighting::automatic;
    int max_evaluations = 4000;
    int scan_points = 400;
};

struct PortFit {
    int output_port;
    double i0;
    double nu;
    double i0_error;
    double nu_error;
};

struct FringeFit {
    double lambda_nm = 0.0;
    double phi0 = 0.0;       // wrapped to (-pi, pi]
    double rate = 0.0;       // rad/V^2 (quadratic) or nm/V^2 (spec)
    double phi0_error = 0.0;
    double rate_error = 0.0;
    std::vector<PortFit> ports;
    double residual_rms = 0.0;
    int evaluations = 0;

    const PortFit& port(int output_port) const;
    /// Effective eta in nm/V^2 (spec model only, NaN otherwise).
    double eta_eff() const { return is_spec ? rate : std::numeric_limits<double>::quiet_NaN(); }
    bool is_spec = false;
};

/// Phase at bias v under a fitted model, without phi0.
double model_phase(const PhaseModel& model, double rate, double v, double lambda_nm);

/// Least squares on I = I0/2 (1 +/- nu cos(phi0 + dphi(V))), '+' at port 4
/// and '-' at port 3, shared phi0 and phase rate across output ports.
/// Requires one wavelength, one input port and at least 8 points. Starts
/// from a phase-rate scan and phi0 in {0, pi/2, pi, 3pi/2}.
FringeFit fit_fringes(const FringeDataset& data, const PhaseModel& model, const FitOptions& options = {});

struct PhasePoint {
    double lambda_nm;
    double v;
    double delta_phi;
};

struct PhaseMap {
    std::vector<PhasePoint> points;
    std::vector<std::pair<double, std::string>> failures;  // wavelength, reason
};

/// Per-wavelength fit, then pointwise inversion of the fringe on the branch
/// nearest the fitted model, unwrapped in V^2 and referenced to V = 0.
PhaseMap phase_map(const FringeDataset& data, const PhaseModel& model, int input_port = 1,
                   const FitOptions& options = {});
/// CSV `lambda_nm,V,delta_phi_rad`.
void write_phase_map_csv(std::ostream& out, const PhaseMap& map);

/// 10 log10(max / min); std::domain_error if min <= 0.
double extinction_ratio(std::span<const double> intensities);

}  // namespace noems
