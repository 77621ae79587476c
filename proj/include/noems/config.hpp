#pragma once

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "noems/actuator.hpp"
#include "noems/errors.hpp"

namespace noems::config {

using Json = nlohmann::ordered_json;

/// Parses a JSON file; ConfigError names the path on any failure.
Json load_json(const std::filesystem::path& path);

/// Strict reader over one JSON object. Every key must be consumed before
/// finish(), which rejects leftovers as unknown keys.
class Object {
public:
    Object(const Json& value, std::string context);

    bool has(const std::string& key) const;
    double number(const std::string& key);
    double number(const std::string& key, double fallback);
    long long integer(const std::string& key);
    long long integer(const std::string& key, long long fallback);
    bool boolean(const std::string& key, bool fallback);
    std::string string(const std::string& key);
    std::string string(const std::string& key, const std::string& fallback);
    std::vector<double> numbers(const std::string& key);
    const Json& raw(const std::string& key);
    Object child(const std::string& key);

    void finish() const;
    const std::string& context() const { return context_; }

private:
    const Json& field(const std::string& key);
    [[noreturn]] void fail(const std::string& key, const std::string& what) const;

    const Json& value_;
    std::string context_;
    std::set<std::string> used_;
};

/// Insertion loss of a phase shifter versus bias: a flat value or a table
/// of (V, loss dB) interpolated linearly.
struct InsertionLoss {
    double flat_db = 2.5;
    std::vector<std::pair<double, double>> table;

    /// Power transmission 10^(-loss/10); CoverageError outside the table.
    double transmission(double v) const;
};

struct PhaseShifterFile {
    PhaseShifterSpec spec;
    InsertionLoss loss;
};

/// Keys: d0_nm, eta_nm_per_V2, temperature_scale, v_max_V, length_um,
/// wavelength_nm, neff_curve_csv (relative to the file), and optionally
/// insertion_loss_db or insertion_loss_table.
PhaseShifterFile load_phase_shifter(const std::filesystem::path& path);
PhaseShifterFile phase_shifter_from_json(const Json& value, const std::filesystem::path& base_dir,
                                         const std::string& context);

/// Loads a `d_nm,n_eff` curve file; ParseError carries the path.
NeffCurve load_neff_curve(const std::filesystem::path& path, double wavelength_nm);

}  // namespace noems::config
