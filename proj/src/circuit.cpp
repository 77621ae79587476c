#include "noems/circuit.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>

#include "noems/csv.hpp"
#include "noems/parallel.hpp"

namespace noems {

namespace {

constexpr std::complex<double> j_unit{0.0, 1.0};

const char* arm_name(Arm a) {
    switch (a) {
        case Arm::top: return "top";
        case Arm::bottom: return "bottom";
        case Arm::both: return "both";
    }
    return "?";
}

TransferMatrix on_arm(Arm arm, std::complex<double> a) {
    TransferMatrix m = TransferMatrix::Identity();
    if (arm != Arm::bottom) m(0, 0) = a;
    if (arm != Arm::top) m(1, 1) = a;
    return m;
}

struct Token {
    std::string text;
    std::size_t column;
};

std::vector<Token> tokenize(std::string_view line) {
    std::vector<Token> out;
    std::size_t k = 0;
    while (k < line.size()) {
        const char c = line[k];
        if (c == '#') break;
        if (c == ' ' || c == '\t' || c == '\r') {
            ++k;
            continue;
        }
        const std::size_t start = k;
        while (k < line.size() && line[k] != ' ' && line[k] != '\t' && line[k] != '\r' && line[k] != '#') ++k;
        out.push_back({std::string(line.substr(start, k - start)), start + 1});
    }
    return out;
}

bool valid_label(const std::string& s) {
    if (s.empty()) return false;
    const auto first = static_cast<unsigned char>(s[0]);
    if (!(std::isalpha(first) || first == '_')) return false;
    for (unsigned char c : s)
        if (!(std::isalnum(c) || c == '_' || c == '-' || c == '.')) return false;
    return true;
}

class LineParser {
public:
    LineParser(std::size_t line, std::vector<Token> tokens) : line_(line), tokens_(std::move(tokens)) {}

    [[noreturn]] void fail(const Token& at, const std::string& what) const {
        throw ParseError(what, line_, at.column);
    }

    const Token& keyword() const { return tokens_[0]; }

    const Token& label_token() const {
        if (tokens_.size() < 2) fail(tokens_[0], "'" + tokens_[0].text + "' needs a label");
        return tokens_[1];
    }

    /// key=value options from token `first` on; duplicates rejected.
    void read_options(std::size_t first) {
        for (std::size_t k = first; k < tokens_.size(); ++k) {
            const Token& t = tokens_[k];
            const auto eq = t.text.find('=');
            if (eq == std::string::npos || eq == 0 || eq + 1 == t.text.size())
                fail(t, "expected key=value, found '" + t.text + "'");
            const std::string key = t.text.substr(0, eq);
            if (options_.contains(key)) fail(t, "duplicate option '" + key + "'");
            options_.emplace(key, Option{t.text.substr(eq + 1), t.column, t.column + eq + 1});
        }
    }

    std::optional<std::string> take(const std::string& key) {
        const auto it = options_.find(key);
        if (it == options_.end()) return std::nullopt;
        last_ = it->second;
        std::string v = it->second.value;
        options_.erase(it);
        return v;
    }

    std::string require(const std::string& key, const std::string& element) {
        auto v = take(key);
        if (!v) fail(keyword(), "element '" + element + "' requires " + key + "=");
        return *v;
    }

    double number(const std::string& text) const {
        double x = 0.0;
        const char* last = text.data() + text.size();
        auto [ptr, ec] = std::from_chars(text.data(), last, x);
        if (ec != std::errc() || ptr != last || !std::isfinite(x))
            throw ParseError("not a number: '" + text + "'", line_, last_.value_column);
        return x;
    }

    Arm arm(const std::string& text, bool allow_both) const {
        if (text == "top") return Arm::top;
        if (text == "bottom") return Arm::bottom;
        if (allow_both && text == "both") return Arm::both;
        throw ParseError("arm must be top" + std::string(allow_both ? ", bottom or both" : " or bottom") +
                             ", found '" + text + "'",
                         line_, last_.value_column);
    }

    /// Takes the remaining option whose key matches `kappa@<num>nm`.
    std::optional<std::pair<double, std::string>> take_kappa() {
        for (auto it = options_.begin(); it != options_.end(); ++it) {
            const std::string& key = it->first;
            if (key.rfind("kappa@", 0) != 0) continue;
            last_ = it->second;
            if (key.size() < 9 || key.substr(key.size() - 2) != "nm")
                throw ParseError("coupler key must look like kappa@950nm", line_, it->second.key_column);
            const std::string lam = key.substr(6, key.size() - 8);
            double wl = 0.0;
            const char* last = lam.data() + lam.size();
            auto [ptr, ec] = std::from_chars(lam.data(), last, wl);
            if (ec != std::errc() || ptr != last || !(wl > 0.0))
                throw ParseError("bad reference wavelength in '" + key + "'", line_, it->second.key_column);
            std::string value = it->second.value;
            options_.erase(it);
            return std::make_pair(wl, value);
        }
        return std::nullopt;
    }

    void no_leftovers(const std::string& element) const {
        if (options_.empty()) return;
        const auto& [key, opt] = *options_.begin();
        throw ParseError("unknown option '" + key + "' for element '" + element + "'", line_, opt.key_column);
    }

    std::size_t value_column() const { return last_.value_column; }
    std::size_t line() const { return line_; }
    const std::vector<Token>& tokens() const { return tokens_; }

private:
    struct Option {
        std::string value;
        std::size_t key_column = 0;
        std::size_t value_column = 0;
    };

    std::size_t line_;
    std::vector<Token> tokens_;
    std::map<std::string, Option> options_;
    Option last_;
};

std::vector<std::pair<double, double>> read_gc_table(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    std::vector<std::pair<double, double>> table;
    for (const auto& row : csv::read(in, "lambda_nm,transmission")) {
        const double lam = csv::to_double(row, 0);
        const double t = csv::to_double(row, 1);
        if (t < 0.0 || t > 1.0) throw ParseError("transmission outside [0,1]", row.line, 1);
        if (!table.empty() && !(lam > table.back().first))
            throw ParseError("wavelengths must increase", row.line, 1);
        table.emplace_back(lam, t);
    }
    if (table.empty()) throw ParseError(path.string() + ": no rows");
    return table;
}

struct StageRef {
    std::size_t line;
    std::vector<Token> labels;
};

}  // namespace

double DirectionalCoupler::kappa(double wavelength_nm) const {
    const double k = kappa_ref + slope_per_nm * (wavelength_nm - ref_wavelength_nm);
    if (!(k >= 0.0 && k <= 1.0)) {
        std::ostringstream msg;
        msg << "coupler kappa " << k << " at " << wavelength_nm << " nm outside [0, 1]";
        throw CoverageError(msg.str());
    }
    return k;
}

double GratingCoupler::transmission(double wavelength_nm) const {
    if (table.empty()) return transmission_flat;
    if (wavelength_nm < table.front().first || wavelength_nm > table.back().first) {
        std::ostringstream msg;
        msg << "wavelength " << wavelength_nm << " nm outside grating table [" << table.front().first << ", "
            << table.back().first << "] nm";
        throw CoverageError(msg.str());
    }
    std::size_t k = 1;
    while (k + 1 < table.size() && table[k].first < wavelength_nm) ++k;
    const auto [l0, t0] = table[k - 1];
    const auto [l1, t1] = table[k];
    return t0 + (t1 - t0) * (wavelength_nm - l0) / (l1 - l0);
}

Arm Element::arm() const {
    return std::visit(
        [](const auto& e) -> Arm {
            using T = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<T, DirectionalCoupler>)
                return Arm::both;
            else
                return e.arm;
        },
        kind);
}

const Element& Netlist::element(std::string_view label) const {
    for (const auto& e : elements)
        if (e.label == label) return e;
    throw std::invalid_argument("no element labelled '" + std::string(label) + "'");
}

int Netlist::input_rail(int port) const {
    const std::string p = std::to_string(port);
    for (int r = 0; r < 2; ++r)
        if (input_ports[r] == p) return r;
    throw std::invalid_argument("input port " + p + " is not declared");
}

Netlist parse_netlist(std::string_view text, const std::filesystem::path& base_dir, const SpecResolver& resolver) {
    Netlist nl;
    std::vector<StageRef> stage_refs;
    std::map<std::string, std::size_t> index;
    bool have_in = false;
    bool have_out = false;
    std::map<std::string, std::shared_ptr<const config::PhaseShifterFile>> spec_cache;

    auto resolve_spec = [&](const std::string& path) {
        if (resolver) return resolver(path);
        const auto it = spec_cache.find(path);
        if (it != spec_cache.end()) return it->second;
        std::filesystem::path p = path;
        if (p.is_relative()) p = base_dir / p;
        auto loaded = std::make_shared<const config::PhaseShifterFile>(config::load_phase_shifter(p));
        spec_cache.emplace(path, loaded);
        return loaded;
    };

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto end = text.find('\n', pos);
        const std::string_view line = text.substr(pos, end == std::string_view::npos ? text.size() - pos : end - pos);
        pos = end == std::string_view::npos ? text.size() + 1 : end + 1;
        ++line_no;

        LineParser p(line_no, tokenize(line));
        if (p.tokens().empty()) continue;
        const std::string& kw = p.keyword().text;

        if (kw == "port") {
            const auto& t = p.tokens();
            if (t.size() != 4 || (t[1].text != "in" && t[1].text != "out"))
                p.fail(t[0], "expected 'port in <a> <b>' or 'port out <c> <d>'");
            const bool in = t[1].text == "in";
            if ((in && have_in) || (!in && have_out)) p.fail(t[1], "ports '" + t[1].text + "' declared twice");
            (in ? have_in : have_out) = true;
            auto& ports = in ? nl.input_ports : nl.output_ports;
            ports = {t[2].text, t[3].text};
            continue;
        }
        if (kw == "stage") {
            if (p.tokens().size() < 2) p.fail(p.keyword(), "stage needs at least one element label");
            stage_refs.push_back({line_no, {p.tokens().begin() + 1, p.tokens().end()}});
            continue;
        }
        if (kw != "gc" && kw != "dc" && kw != "wg" && kw != "ps")
            p.fail(p.keyword(), "unknown element kind '" + kw + "'");

        const Token& label = p.label_token();
        if (!valid_label(label.text)) p.fail(label, "invalid label '" + label.text + "'");
        if (index.contains(label.text)) p.fail(label, "duplicate label '" + label.text + "'");
        p.read_options(2);

        Element e;
        e.label = label.text;
        e.line = line_no;
        if (kw == "dc") {
            DirectionalCoupler dc;
            const auto kappa = p.take_kappa();
            if (!kappa) p.fail(p.keyword(), "element '" + e.label + "' requires kappa@<lambda>nm=");
            dc.ref_wavelength_nm = kappa->first;
            dc.kappa_ref = p.number(kappa->second);
            if (!(dc.kappa_ref >= 0.0 && dc.kappa_ref <= 1.0))
                throw ParseError("element '" + e.label + "': kappa " + kappa->second + " outside [0, 1]", line_no,
                                 p.value_column());
            if (auto s = p.take("slope_per_nm")) dc.slope_per_nm = p.number(*s);
            e.kind = dc;
        } else if (kw == "wg") {
            Waveguide wg;
            wg.arm = p.arm(p.require("arm", e.label), false);
            wg.length_nm = p.number(p.require("length_nm", e.label));
            if (wg.length_nm < 0.0)
                throw ParseError("element '" + e.label + "': length_nm must be >= 0", line_no, p.value_column());
            wg.n_eff = p.number(p.require("neff", e.label));
            if (!(wg.n_eff > 0.0))
                throw ParseError("element '" + e.label + "': neff must be > 0", line_no, p.value_column());
            if (auto l = p.take("loss_db")) {
                wg.loss_db = p.number(*l);
                if (wg.loss_db < 0.0)
                    throw ParseError("element '" + e.label + "': loss_db must be >= 0", line_no, p.value_column());
            }
            e.kind = wg;
        } else if (kw == "gc") {
            GratingCoupler gc;
            if (auto a = p.take("arm")) gc.arm = p.arm(*a, true);
            auto file = p.take("file");
            const std::size_t file_col = p.value_column();
            auto flat = p.take("transmission");
            if (file && flat) p.fail(p.keyword(), "element '" + e.label + "': give file= or transmission=, not both");
            if (!file && !flat) p.fail(p.keyword(), "element '" + e.label + "' requires file= or transmission=");
            if (flat) {
                gc.transmission_flat = p.number(*flat);
                if (!(gc.transmission_flat >= 0.0 && gc.transmission_flat <= 1.0))
                    throw ParseError("element '" + e.label + "': transmission " + *flat + " outside [0, 1]", line_no,
                                     p.value_column());
            } else {
                std::filesystem::path path = *file;
                if (path.is_relative()) path = base_dir / path;
                try {
                    gc.table = read_gc_table(path);
                } catch (const std::exception& ex) {
                    throw ParseError("element '" + e.label + "': " + path.string() + ": " + ex.what(), line_no,
                                     file_col);
                }
            }
            e.kind = gc;
        } else {
            PhaseShifterElement ps;
            ps.arm = p.arm(p.require("arm", e.label), false);
            const std::string spec = p.require("spec", e.label);
            const std::size_t spec_col = p.value_column();
            try {
                ps.device = resolve_spec(spec);
            } catch (const std::exception& ex) {
                throw ParseError("element '" + e.label + "': " + ex.what(), line_no, spec_col);
            }
            if (!ps.device) throw ParseError("element '" + e.label + "': unresolved spec", line_no, spec_col);
            e.kind = std::move(ps);
        }
        p.no_leftovers(e.label);
        index.emplace(e.label, nl.elements.size());
        nl.elements.push_back(std::move(e));
    }

    if (stage_refs.empty()) throw ParseError("no stages");

    std::set<std::string> labels;
    for (const auto& port : nl.input_ports) labels.insert(port);
    for (const auto& port : nl.output_ports) labels.insert(port);
    if (labels.size() != 4) throw ParseError("port labels must be unique");

    std::vector<bool> placed(nl.elements.size(), false);
    for (const auto& ref : stage_refs) {
        Stage stage;
        stage.line = ref.line;
        bool top = false;
        bool bottom = false;
        for (const auto& t : ref.labels) {
            const auto it = index.find(t.text);
            if (it == index.end()) throw ParseError("unknown element '" + t.text + "'", ref.line, t.column);
            if (placed[it->second])
                throw ParseError("element '" + t.text + "' placed in more than one stage", ref.line, t.column);
            const Arm a = nl.elements[it->second].arm();
            const bool wants_top = a != Arm::bottom;
            const bool wants_bottom = a != Arm::top;
            if ((wants_top && top) || (wants_bottom && bottom))
                throw ParseError("topology mismatch: '" + t.text + "' (" + arm_name(a) +
                                     ") overlaps another element of this stage",
                                 ref.line, t.column);
            top = top || wants_top;
            bottom = bottom || wants_bottom;
            placed[it->second] = true;
            stage.elements.push_back(it->second);
        }
        nl.stages.push_back(std::move(stage));
    }
    for (std::size_t k = 0; k < nl.elements.size(); ++k)
        if (!placed[k])
            throw ParseError("element '" + nl.elements[k].label + "' is never placed in a stage", nl.elements[k].line,
                             1);
    return nl;
}

Netlist load_netlist(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open netlist: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    try {
        return parse_netlist(buf.str(), path.parent_path());
    } catch (const ParseError& e) {
        throw ParseError(path.string() + (e.line() ? ":" : ": ") + e.what());
    }
}

TransferMatrix element_matrix(const Element& e, double wavelength_nm, double v) {
    return std::visit(
        [&](const auto& el) -> TransferMatrix {
            using T = std::decay_t<decltype(el)>;
            if constexpr (std::is_same_v<T, DirectionalCoupler>) {
                const double k = el.kappa(wavelength_nm);
                const std::complex<double> t = std::sqrt(1.0 - k);
                const std::complex<double> c = j_unit * std::sqrt(k);
                TransferMatrix m;
                m << t, c, c, t;
                return m;
            } else if constexpr (std::is_same_v<T, PhaseShifterElement>) {
                double phi = 0.0;
                try {
                    phi = phase_shift(el.device->spec, v, wavelength_nm);
                } catch (const std::out_of_range& ex) {
                    throw CoverageError("element '" + e.label + "': " + ex.what());
                }
                const double t = el.device->loss.transmission(v);
                return on_arm(el.arm, std::sqrt(t) * std::exp(j_unit * phi));
            } else if constexpr (std::is_same_v<T, Waveguide>) {
                const double phase = 2.0 * std::numbers::pi / wavelength_nm * el.n_eff * el.length_nm;
                const double amp = std::pow(10.0, -el.loss_db / 20.0);
                return on_arm(el.arm, amp * std::exp(j_unit * phase));
            } else {
                return on_arm(el.arm, std::sqrt(el.transmission(wavelength_nm)));
            }
        },
        e.kind);
}

TransferMatrix stage_matrix(const Netlist& nl, const Stage& stage, double wavelength_nm, double v) {
    TransferMatrix m = TransferMatrix::Identity();
    for (std::size_t idx : stage.elements) m = element_matrix(nl.elements[idx], wavelength_nm, v) * m;
    return m;
}

TransferMatrix transfer_matrix(const Netlist& nl, double wavelength_nm, double v) {
    TransferMatrix m = TransferMatrix::Identity();
    for (const auto& s : nl.stages) m = stage_matrix(nl, s, wavelength_nm, v) * m;
    return m;
}

PortIntensities evaluate(const Netlist& nl, double wavelength_nm, double v, int input_port) {
    const int rail = nl.input_rail(input_port);
    const TransferMatrix m = transfer_matrix(nl, wavelength_nm, v);
    return {std::norm(m(0, rail)), std::norm(m(1, rail))};
}

std::vector<SweepRow> sweep(const Netlist& nl, const std::vector<double>& lambda_nm, const std::vector<double>& v,
                            int input_port, int jobs) {
    (void)nl.input_rail(input_port);
    std::vector<SweepRow> rows(lambda_nm.size() * v.size());
    parallel_for(lambda_nm.size(), jobs, [&](std::size_t i) {
        for (std::size_t k = 0; k < v.size(); ++k) {
            const auto out = evaluate(nl, lambda_nm[i], v[k], input_port);
            rows[i * v.size() + k] = {lambda_nm[i], v[k], out.i3, out.i4, input_port};
        }
    });
    return rows;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
    out << "lambda_nm,V,I3,I4,input_port\n";
    for (const auto& r : rows)
        out << csv::number(r.lambda_nm) << ',' << csv::number(r.v) << ',' << csv::number(r.i3) << ','
            << csv::number(r.i4) << ',' << r.input_port << '\n';
}

}  // namespace noems
