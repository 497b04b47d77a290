#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <unistd.h>

#include <CLI11.hpp>

#include "affect/errors.hpp"
#include "config.hpp"
#include "stages.hpp"

namespace fs = std::filesystem;
using namespace affect;

namespace {

// Exit codes: 0 success, 1 config error, 2 missing prerequisite, 3 runtime
// failure.
constexpr int kExitConfig = 1;
constexpr int kExitMissing = 2;
constexpr int kExitRuntime = 3;

// One command process at a time per output directory. The lock file holds
// the owner's pid for post-mortem only; liveness is not checked, a crashed
// run leaves a stale lock the operator removes by hand.
class DirLock {
  public:
    explicit DirLock(const fs::path& out) : path_(out / ".lock") {
        fs::create_directories(out);
        std::FILE* f = std::fopen(path_.string().c_str(), "wx");
        if (!f)
            throw std::runtime_error("output directory is locked by " +
                                   path_.string() +
                                   "; another run is active (or remove a "
                                   "stale lock)");
        std::fprintf(f, "%ld\n", long(::getpid()));
        std::fclose(f);
    }
    ~DirLock() {
        std::error_code ec;
        fs::remove(path_, ec);
    }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

  private:
    fs::path path_;
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"continuous affect recognition pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir = "run";
    std::uint64_t seed_flag = 0;
    bool seed_set = false;
    int jobs_flag = 0;
    app.add_option("--config", config_path, "key = value config file")
        ->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output directory (default ./run)");
    app.add_option("--seed", seed_flag, "override config seed")
        ->each([&](const std::string&) { seed_set = true; });
    app.add_option("--jobs", jobs_flag, "worker threads for sweep cells")
        ->check(CLI::PositiveNumber);

    bool no_transfer = false;

    using Stage = void (*)(const cli::RunConfig&, const fs::path&);
    std::map<std::string, Stage> stages = {
        {"synth-data", cli::stage_synth_data},
        {"pretrain", cli::stage_pretrain},
        {"train-cae", cli::stage_train_cae},
        {"encode", cli::stage_encode},
        {"train-svr", cli::stage_train_svr},
        {"postprocess", cli::stage_postprocess},
        {"evaluate", cli::stage_evaluate},
        {"sweep", cli::stage_sweep},
    };
    app.add_subcommand("synth-data",
                       "write a synthetic labeled set and frame layout");
    app.add_subcommand("pretrain", "supervised CNN training on labeled images");
    auto* cae = app.add_subcommand(
        "train-cae", "transfer, freeze and train the autoencoder");
    cae->add_flag("--no-transfer", no_transfer,
                  "train from seeded init instead of a pretrain checkpoint");
    app.add_subcommand("encode", "write bottleneck features per subject");
    app.add_subcommand("train-svr", "grid-search and fit per-dimension SVRs");
    app.add_subcommand("postprocess", "fit the prediction post-processing chain");
    app.add_subcommand("evaluate", "score raw and post-processed predictions");
    app.add_subcommand("sweep", "run the pipeline over freeze/size/delay grids");

    // let --config/--out/--seed/--jobs appear after the subcommand too
    for (CLI::App* sub : app.get_subcommands(nullptr)) sub->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitConfig;
    }

    try {
        cli::RunConfig config;
        if (!config_path.empty()) config = cli::load_config(config_path);
        if (seed_set) config.seed = seed_flag;
        if (jobs_flag > 0) config.jobs = jobs_flag;
        if (no_transfer) config.cae_no_transfer = true;

        const fs::path out(out_dir);
        DirLock lock(out);

        std::ofstream echo(out / "config.resolved");
        echo << cli::config_to_text(config);
        echo.close();

        const std::string name = app.get_subcommands().front()->get_name();
        stages.at(name)(config, out);
        return 0;
    } catch (const cli::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const cli::MissingArtifact& e) {
        std::cerr << "missing prerequisite: " << e.what() << "\n";
        return kExitMissing;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
}
