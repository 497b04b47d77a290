#ifndef AFFECT_TOOLS_CONFIG_HPP
#define AFFECT_TOOLS_CONFIG_HPP

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace affect::cli {

struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Fully-resolved run configuration. Every field has a default; unknown keys
// in a config file are rejected. The resolved config is echoed into each
// run's output directory so a run is reconstructible from its directory.
struct RunConfig {
    std::uint64_t seed = 0;
    int jobs = 1;

    std::string data_fer_csv;
    std::string data_recola_root;

    std::size_t model_input_hw = 48;
    std::vector<std::size_t> model_conv_widths = {64, 64, 128};
    std::vector<std::size_t> model_fc = {100, 50, 10, 7};

    std::size_t pretrain_epochs = 500;
    std::size_t pretrain_batch = 64;
    double pretrain_lr = 1e-5;
    double pretrain_dropout = 0.5;

    std::size_t cae_encoder_size = 900;
    int cae_freeze = 1;
    std::size_t cae_epochs = 100;
    std::size_t cae_batch = 64;
    double cae_lr = 1e-5;
    double cae_dropout = 0.25;
    bool cae_literal_pool_upsample = true;
    bool cae_no_transfer = false;
    bool cae_freeze_bn_stats = true;
    std::string cae_pretrain_checkpoint;  // default <out>/pretrain.ckpt

    std::string svr_kernel = "linear";
    double svr_gamma = 0.0;
    std::vector<double> svr_c_grid = {1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0};
    std::vector<double> svr_eps_grid = {0.001, 0.005, 0.01, 0.05, 0.1};
    double svr_tol = 1e-3;

    std::string post_center_mode = "bias";
    std::string post_scale_mode = "std";

    std::size_t eval_delay = 0;

    std::size_t synth_subjects = 4;
    std::size_t synth_frames = 500;
    std::size_t synth_train_subjects = 3;
    std::size_t synth_per_class = 10;

    std::vector<int> sweep_freeze;
    std::vector<std::size_t> sweep_encoder_size;
    std::vector<std::size_t> sweep_delay;
};

// Parses `key = value` lines; '#' starts a comment. Throws ConfigError
// naming the first unknown key or malformed value.
RunConfig load_config(const std::filesystem::path& path);
void apply_line(RunConfig& config, const std::string& key,
                const std::string& value);

std::string config_to_text(const RunConfig& config);

}  // namespace affect::cli

#endif  // AFFECT_TOOLS_CONFIG_HPP
