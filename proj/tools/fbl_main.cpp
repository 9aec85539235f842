#include <CLI11.hpp>

#include <cstdint>
#include <optional>
#include <string>

#include "fbl/parallel.hpp"
#include "fbl/runner.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Free-boundary Lambda pipeline: solve, estimate, verify."};
    app.set_version_flag("--version", std::string(fbl::kVersion));

    std::string subcommand;
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> workers;
    bool quiet = false;

    app.add_option("subcommand", subcommand, "Stage to run")
        ->required()
        ->check(CLI::IsMember(fbl::subcommands()));
    app.add_option("--config", config_path, "Config file")->required();
    app.add_option("--out", out_dir, "Output directory (default: output.dir from the config)");
    app.add_option("--seed", seed, "Root seed, overrides mc.seed");
    app.add_option("--workers", workers, "Worker threads (fallback: FBL_WORKERS, then 1)");
    app.add_flag("--quiet", quiet, "Only errors on stderr");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? fbl::kExitOk : fbl::kExitConfig;
    }

    fbl::RunOptions options;
    options.out_dir = out_dir;
    options.seed = seed;
    options.workers = fbl::resolve_workers(workers);
    options.quiet = quiet;
    return fbl::run_cli(subcommand, config_path, options);
}
