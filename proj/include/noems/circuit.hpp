#pragma once

#include <array>
#include <complex>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "noems/config.hpp"

namespace noems {

using TransferMatrix = Eigen::Matrix2cd;

/// Rails: index 0 is the top rail (input port 1, output port 3), 1 the bottom.
enum class Arm { top, bottom, both };

struct DirectionalCoupler {
    double kappa_ref = 0.5;  // power coupling at the reference wavelength
    double ref_wavelength_nm = 950.0;
    double slope_per_nm = 0.0;

    /// CoverageError if the linear model leaves [0, 1].
    double kappa(double wavelength_nm) const;
};

struct PhaseShifterElement {
    Arm arm = Arm::top;
    std::shared_ptr<const config::PhaseShifterFile> device;
};

struct Waveguide {
    Arm arm = Arm::top;
    double length_nm = 0.0;
    double n_eff = 1.0;
    double loss_db = 0.0;
};

struct GratingCoupler {
    Arm arm = Arm::both;
    double transmission_flat = 1.0;
    std::vector<std::pair<double, double>> table;  // (lambda_nm, T), used when non-empty

    double transmission(double wavelength_nm) const;
};

using ElementKind = std::variant<DirectionalCoupler, PhaseShifterElement, Waveguide, GratingCoupler>;

struct Element {
    std::string label;
    ElementKind kind;
    std::size_t line = 0;

    /// Rails the element acts on.
    Arm arm() const;
};

struct Stage {
    std::vector<std::size_t> elements;  // indices into Netlist::elements
    std::size_t line = 0;
};

struct Netlist {
    std::vector<Element> elements;
    std::vector<Stage> stages;
    std::array<std::string, 2> input_ports{"1", "2"};
    std::array<std::string, 2> output_ports{"3", "4"};

    const Element& element(std::string_view label) const;
    /// Rail fed by an input port label ("1" or "2" by default).
    int input_rail(int port) const;
};

/// Resolves the `spec=` path of a phase shifter. When empty, the parser
/// loads the JSON file relative to `base_dir`.
using SpecResolver = std::function<std::shared_ptr<const config::PhaseShifterFile>(const std::string& path)>;

/// Line-oriented netlist DSL. Never throws anything but ParseError, which
/// carries the 1-based line and column of the offending token. Relative
/// `file=` and `spec=` paths resolve against `base_dir`.
Netlist parse_netlist(std::string_view text, const std::filesystem::path& base_dir = {},
                      const SpecResolver& resolver = {});
Netlist load_netlist(const std::filesystem::path& path);

TransferMatrix element_matrix(const Element& e, double wavelength_nm, double v);
TransferMatrix stage_matrix(const Netlist& nl, const Stage& stage, double wavelength_nm, double v);
/// Product of stage matrices, first stage rightmost.
TransferMatrix transfer_matrix(const Netlist& nl, double wavelength_nm, double v);

struct PortIntensities {
    double i3 = 0.0;
    double i4 = 0.0;
};

/// Unit power into `input_port`; intensities at the two output ports.
PortIntensities evaluate(const Netlist& nl, double wavelength_nm, double v, int input_port);

struct SweepRow {
    double lambda_nm;
    double v;
    double i3;
    double i4;
    int input_port;
};

/// Row-major over (lambda, V). Points run on `jobs` threads; the result
/// order never depends on the job count.
std::vector<SweepRow> sweep(const Netlist& nl, const std::vector<double>& lambda_nm, const std::vector<double>& v,
                            int input_port, int jobs = 1);
/// CSV `lambda_nm,V,I3,I4,input_port`.
void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows);

}  // namespace noems
