#include <chrono>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Core>

#include "commands.hpp"
#include "noems/errors.hpp"

namespace {

namespace fs = std::filesystem;
using noems::config::Json;

constexpr char version[] = "1.0.0";

enum Exit : int { ok = 0, config_error = 2, numerical_error = 3, data_error = 4 };

std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::string hex(std::uint64_t x) {
    std::ostringstream s;
    s << std::hex;
    s.width(16);
    s.fill('0');
    s << x;
    return s.str();
}

int classify(const std::exception_ptr& e) {
    try {
        std::rethrow_exception(e);
    } catch (const noems::ParseError&) {
        return data_error;
    } catch (const noems::ConfigError&) {
        return config_error;
    } catch (const noems::GeometryError&) {
        return config_error;
    } catch (const noems::CoverageError&) {
        return numerical_error;
    } catch (const std::invalid_argument&) {
        return config_error;
    } catch (...) {
        return numerical_error;
    }
}

Json versions() {
    std::ostringstream eigen;
    eigen << EIGEN_WORLD_VERSION << '.' << EIGEN_MAJOR_VERSION << '.' << EIGEN_MINOR_VERSION;
    return {{"noems", version},
            {"compiler", __VERSION__},
            {"eigen", eigen.str()},
            {"cli11", CLI11_VERSION},
            {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                  std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
}

struct Flags {
    std::string config;
    std::string out = "out";
    std::uint64_t seed = 1;
    int jobs = 1;
    bool dry_run = false;
};

int run(const std::string& command, const Flags& flags,
        const std::function<noems::cli::Summary(const noems::cli::Context&)>& body) {
    const auto start = std::chrono::steady_clock::now();
    noems::cli::Context ctx;
    ctx.config_path = flags.config;
    ctx.out_dir = flags.out;
    ctx.seed = flags.seed;
    ctx.jobs = flags.jobs;
    ctx.dry_run = flags.dry_run;

    Json record{{"command", command},
                {"config", flags.config},
                {"config_fnv1a64", nullptr},
                {"seed", flags.seed},
                {"jobs", flags.jobs},
                {"versions", versions()}};
    int code = ok;
    try {
        std::ifstream in(ctx.config_path, std::ios::binary);
        if (!in) throw noems::ConfigError("cannot open config file: " + ctx.config_path.string());
        std::ostringstream bytes;
        bytes << in.rdbuf();
        record["config_fnv1a64"] = hex(fnv1a(bytes.str()));
        try {
            ctx.config = Json::parse(bytes.str());
        } catch (const Json::parse_error& e) {
            throw noems::ConfigError("invalid JSON in " + ctx.config_path.string() + ": " + e.what());
        }
        if (!ctx.dry_run) fs::create_directories(ctx.out_dir);
        record["summary"] = body(ctx);
        if (ctx.dry_run) std::cout << "config ok: " << ctx.config_path.string() << '\n';
    } catch (const std::exception& e) {
        code = classify(std::current_exception());
        record["error"] = e.what();
        std::cerr << "noems " << command << ": " << e.what() << '\n';
    }
    if (ctx.dry_run) return code;

    record["status"] = code == ok ? "ok" : "error";
    record["exit_code"] = code;
    record["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    try {
        fs::create_directories(ctx.out_dir);
        std::ofstream out(ctx.out_dir / "run.json", std::ios::binary);
        out << record.dump(2) << '\n';
    } catch (const std::exception& e) {
        std::cerr << "noems " << command << ": cannot write run.json: " << e.what() << '\n';
    }
    return code;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Slot-waveguide phase shifter and MZI router toolkit"};
    app.set_version_flag("--version", version);
    app.require_subcommand(1);

    Flags flags;
    const std::vector<std::pair<std::string, std::string>> commands{
        {"solve", "Solve the guided modes of a cross-section"},
        {"curve", "Build an n_eff(slot width) curve"},
        {"taper", "Staircase mode-matching taper loss"},
        {"sweep", "Transfer-matrix sweep of a netlist over wavelength and bias"},
        {"fit", "Fit interference fringes and extract the phase map"},
        {"g2", "Simulate routed single photons and their g2 histogram"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--config", flags.config, "JSON config file")->required();
        sub->add_option("--out", flags.out, "Output directory")->capture_default_str();
        sub->add_option("--seed", flags.seed, "Random seed")->capture_default_str();
        sub->add_option("--jobs", flags.jobs, "Worker threads")->check(CLI::PositiveNumber)->capture_default_str();
        sub->add_flag("--dry-run", flags.dry_run, "Validate the config and write nothing");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : config_error;
    }

    using namespace noems::cli;
    const std::map<std::string, Summary (*)(const Context&)> table{
        {"solve", cmd_solve}, {"curve", cmd_curve}, {"taper", cmd_taper},
        {"sweep", cmd_sweep}, {"fit", cmd_fit},     {"g2", cmd_g2},
    };
    for (const auto* sub : app.get_subcommands()) return run(sub->get_name(), flags, table.at(sub->get_name()));
    return config_error;
}
