#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

struct Scratch {
    fs::path dir;
    Scratch() {
        dir = fs::temp_directory_path() / ("noems_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Scratch() { fs::remove_all(dir); }
    static int& counter() {
        static int n = 0;
        return n;
    }
    fs::path write(const std::string& name, const Json& j) const {
        const fs::path p = dir / name;
        std::ofstream(p) << j.dump(2);
        return p;
    }
};

int noems(const std::string& args) {
    const std::string cmd = std::string(NOEMS_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Json sweep_config() {
    return {{"netlist", NOEMS_DATA_DIR "/mzi.pic"},
            {"lambda_nm", {940, 950}},
            {"V", {{"from", 0}, {"to", 12}, {"step", 0.2}}},
            {"input_ports", {1, 2}},
            {"noise_floor", 0.001}};
}

Json g2_config(double multiphoton) {
    return {{"emitter", {{"emission_prob", 0.5}, {"multiphoton_prob", multiphoton}}},
            {"pulses", 200000},
            {"router", {{"i3_fraction", 0.5}}},
            {"histogram", {{"normalization_delay_ps", 1e8}, {"window_ps", 20000}}},
            {"tags", "binary"}};
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("dry run validates without writing") {
    Scratch s;
    const auto cfg = s.write("sweep.json", sweep_config());
    const fs::path out = s.dir / "out";
    CHECK(noems("sweep --dry-run --config " + cfg.string() + " --out " + out.string()) == 0);
    CHECK(!fs::exists(out));
}

TEST_CASE("configuration errors exit with code 2 and name the file") {
    Scratch s;
    const fs::path missing = s.dir / "absent.json";
    const fs::path out = s.dir / "out";
    const std::string cmd = std::string(NOEMS_CLI_PATH) + " sweep --config " + missing.string() + " --out " +
                            out.string() + " 2>" + (s.dir / "err.txt").string();
    const int status = std::system(cmd.c_str());
    CHECK(WEXITSTATUS(status) == 2);
    CHECK(slurp(s.dir / "err.txt").find(missing.string()) != std::string::npos);
    const auto run = Json::parse(slurp(out / "run.json"));
    CHECK(run["status"] == "error");
    CHECK(run["exit_code"] == 2);

    Json bad = sweep_config();
    bad["volts"] = 3;
    CHECK(noems("sweep --config " + s.write("bad.json", bad).string() + " --out " + out.string()) == 2);
    CHECK(noems("sweep") == 2);
}

TEST_CASE("malformed netlists exit with code 4") {
    Scratch s;
    std::ofstream(s.dir / "broken.pic") << "dc a kappa@950nm=2\nstage a\n";
    Json cfg = sweep_config();
    cfg["netlist"] = (s.dir / "broken.pic").string();
    CHECK(noems("sweep --config " + s.write("c.json", cfg).string() + " --out " + (s.dir / "o").string()) == 4);
}

TEST_CASE("g2 of single photons is zero within its error") {
    Scratch s;
    const auto cfg = s.write("g2.json", g2_config(0.0));
    CHECK(noems("g2 --config " + cfg.string() + " --out " + (s.dir / "o").string()) == 0);
    const auto g = Json::parse(slurp(s.dir / "o" / "g2.json"));
    CHECK(g["g2_zero"].get<double>() == 0.0);
    CHECK(g["g2_zero"].get<double>() <= 2.0 * g["g2_zero_error"].get<double>());
    CHECK(fs::file_size(s.dir / "o" / "tags.ttag") > 0);
    CHECK(slurp(s.dir / "o" / "g2_histogram.csv").rfind("tau_ps,counts,g2\n", 0) == 0);
}

TEST_CASE("sweep then fit recovers the device efficiency") {
    Scratch s;
    const fs::path sweep_out = s.dir / "sweep";
    REQUIRE(noems("sweep --config " + s.write("sweep.json", sweep_config()).string() + " --out " +
                  sweep_out.string()) == 0);
    CHECK(fs::exists(sweep_out / "sr_map.csv"));
    const Json fit{{"data", (sweep_out / "sweep.csv").string()},
                   {"model", "spec"},
                   {"phase_shifter", NOEMS_DATA_DIR "/phase_shifter.json"}};
    const fs::path fit_out = s.dir / "fit";
    REQUIRE(noems("fit --jobs 2 --config " + s.write("fit.json", fit).string() + " --out " + fit_out.string()) == 0);
    const auto report = Json::parse(slurp(fit_out / "fit.json"));
    REQUIRE(report["fits"].size() == 2);
    for (const auto& f : report["fits"]) CHECK(std::abs(f["eta_eff_nm_per_V2"].get<double>() / 0.6 - 1.0) < 0.05);
    const auto run = Json::parse(slurp(fit_out / "run.json"));
    CHECK(run["status"] == "ok");
    CHECK(run["config_fnv1a64"].get<std::string>().size() == 16);
}

TEST_CASE("reruns are byte-identical across job counts") {
    Scratch s;
    const auto sweep_cfg = s.write("sweep.json", sweep_config());
    const auto g2_cfg = s.write("g2.json", g2_config(0.02));
    const Json solve{{"cross_section", Json::object()},
                     {"wavelength_nm", 950},
                     {"grid", {{"dx_nm", 20}, {"dy_nm", 20}, {"fold_lateral", true}}},
                     {"modes", 2}};
    const auto solve_cfg = s.write("solve.json", solve);
    for (const auto& [cmd, cfg, files] :
         std::vector<std::tuple<std::string, fs::path, std::vector<std::string>>>{
             {"sweep", sweep_cfg, {"sweep.csv", "sr_map.csv"}},
             {"g2", g2_cfg, {"g2_histogram.csv", "g2.json", "tags.ttag"}},
             {"solve", solve_cfg, {"modes.txt", "mode_ex.csv"}}}) {
        const fs::path a = s.dir / (cmd + "_a");
        const fs::path b = s.dir / (cmd + "_b");
        REQUIRE(noems(cmd + " --seed 5 --jobs 1 --config " + cfg.string() + " --out " + a.string()) == 0);
        REQUIRE(noems(cmd + " --seed 5 --jobs 3 --config " + cfg.string() + " --out " + b.string()) == 0);
        for (const auto& f : files) CHECK_MESSAGE(slurp(a / f) == slurp(b / f), cmd << "/" << f);
    }
    const fs::path c = s.dir / "g2_c";
    REQUIRE(noems("g2 --seed 6 --config " + g2_cfg.string() + " --out " + c.string()) == 0);
    CHECK(slurp(c / "tags.ttag") != slurp(s.dir / "g2_a" / "tags.ttag"));
}

}  // TEST_SUITE
