#include "noems/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace noems::config {

Json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    try {
        return Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("invalid JSON in " + path.string() + ": " + e.what());
    }
}

Object::Object(const Json& value, std::string context) : value_(value), context_(std::move(context)) {
    if (!value_.is_object()) throw ConfigError(context_ + ": expected a JSON object");
}

bool Object::has(const std::string& key) const { return value_.contains(key); }

void Object::fail(const std::string& key, const std::string& what) const {
    throw ConfigError(context_ + ": key '" + key + "' " + what);
}

const Json& Object::field(const std::string& key) {
    const auto it = value_.find(key);
    if (it == value_.end()) fail(key, "is required");
    used_.insert(key);
    return *it;
}

double Object::number(const std::string& key) {
    const Json& v = field(key);
    if (!v.is_number()) fail(key, "must be a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) fail(key, "must be finite");
    return x;
}

double Object::number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }

long long Object::integer(const std::string& key) {
    const Json& v = field(key);
    if (!v.is_number_integer()) fail(key, "must be an integer");
    return v.get<long long>();
}

long long Object::integer(const std::string& key, long long fallback) { return has(key) ? integer(key) : fallback; }

bool Object::boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const Json& v = field(key);
    if (!v.is_boolean()) fail(key, "must be true or false");
    return v.get<bool>();
}

std::string Object::string(const std::string& key) {
    const Json& v = field(key);
    if (!v.is_string()) fail(key, "must be a string");
    return v.get<std::string>();
}

std::string Object::string(const std::string& key, const std::string& fallback) {
    return has(key) ? string(key) : fallback;
}

std::vector<double> Object::numbers(const std::string& key) {
    const Json& v = field(key);
    if (!v.is_array()) fail(key, "must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) fail(key, "must be an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

const Json& Object::raw(const std::string& key) { return field(key); }

Object Object::child(const std::string& key) { return Object(field(key), context_ + "." + key); }

void Object::finish() const {
    for (auto it = value_.begin(); it != value_.end(); ++it)
        if (!used_.contains(it.key())) throw ConfigError(context_ + ": unknown key '" + it.key() + "'");
}

double InsertionLoss::transmission(double v) const {
    double db = flat_db;
    if (!table.empty()) {
        if (v < table.front().first || v > table.back().first) {
            std::ostringstream msg;
            msg << "bias " << v << " V outside insertion-loss table [" << table.front().first << ", "
                << table.back().first << "] V";
            throw CoverageError(msg.str());
        }
        std::size_t k = 1;
        while (k + 1 < table.size() && table[k].first < v) ++k;
        const auto [v0, l0] = table[k - 1];
        const auto [v1, l1] = table[k];
        db = v1 == v0 ? l0 : l0 + (l1 - l0) * (v - v0) / (v1 - v0);
    }
    return std::pow(10.0, -db / 10.0);
}

NeffCurve load_neff_curve(const std::filesystem::path& path, double wavelength_nm) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open n_eff curve: " + path.string());
    try {
        return NeffCurve::read_csv(in, wavelength_nm);
    } catch (const ParseError& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

PhaseShifterFile phase_shifter_from_json(const Json& value, const std::filesystem::path& base_dir,
                                         const std::string& context) {
    Object o(value, context);
    ActuatorParams a;
    a.d0_nm = o.number("d0_nm");
    a.eta_nm_per_V2 = o.number("eta_nm_per_V2");
    a.temperature_scale = o.number("temperature_scale", 1.0);
    a.v_max_V = o.number("v_max_V");
    const double length_nm = o.number("length_um") * 1000.0;
    const double wavelength_nm = o.number("wavelength_nm");
    std::filesystem::path curve_path = o.string("neff_curve_csv");
    if (curve_path.is_relative()) curve_path = base_dir / curve_path;

    InsertionLoss loss;
    if (o.has("insertion_loss_db") && o.has("insertion_loss_table"))
        throw ConfigError(context + ": give insertion_loss_db or insertion_loss_table, not both");
    loss.flat_db = o.number("insertion_loss_db", 2.5);
    if (loss.flat_db < 0.0) throw ConfigError(context + ": insertion_loss_db must be >= 0");
    if (o.has("insertion_loss_table")) {
        const Json& t = o.raw("insertion_loss_table");
        if (!t.is_array() || t.size() < 2) throw ConfigError(context + ": insertion_loss_table needs >= 2 rows");
        for (const auto& row : t) {
            if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number())
                throw ConfigError(context + ": insertion_loss_table rows must be [V, loss_dB]");
            const double v = row[0].get<double>();
            const double db = row[1].get<double>();
            if (db < 0.0) throw ConfigError(context + ": insertion loss must be >= 0 dB");
            if (!loss.table.empty() && !(v > loss.table.back().first))
                throw ConfigError(context + ": insertion_loss_table voltages must increase");
            loss.table.emplace_back(v, db);
        }
    }
    o.finish();

    PhaseShifterFile f{PhaseShifterSpec{length_nm, wavelength_nm, load_neff_curve(curve_path, wavelength_nm), a},
                       loss};
    try {
        f.spec.validate();
    } catch (const GeometryError& e) {
        throw ConfigError(context + ": " + e.what());
    }
    return f;
}

PhaseShifterFile load_phase_shifter(const std::filesystem::path& path) {
    return phase_shifter_from_json(load_json(path), path.parent_path(), path.string());
}

}  // namespace noems::config
