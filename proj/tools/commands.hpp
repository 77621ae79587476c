#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "noems/config.hpp"

namespace noems::cli {

struct Context {
    std::filesystem::path config_path;
    std::filesystem::path out_dir;
    std::uint64_t seed = 1;
    int jobs = 1;
    bool dry_run = false;
    config::Json config;

    /// Path from the config, resolved against the config file's directory.
    std::filesystem::path resolve(const std::string& path) const;
};

/// Summary fields merged into run.json.
using Summary = config::Json;

Summary cmd_solve(const Context& ctx);
Summary cmd_curve(const Context& ctx);
Summary cmd_taper(const Context& ctx);
Summary cmd_sweep(const Context& ctx);
Summary cmd_fit(const Context& ctx);
Summary cmd_g2(const Context& ctx);

}  // namespace noems::cli
