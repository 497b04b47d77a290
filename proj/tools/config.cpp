#include "config.hpp"

#include <fstream>
#include <sstream>

namespace affect::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

template <typename T>
std::vector<T> parse_list(const std::string& value, const std::string& key) {
    std::vector<T> out;
    std::istringstream is(value);
    std::string cell;
    while (std::getline(is, cell, ',')) {
        cell = trim(cell);
        if (cell.empty()) continue;
        try {
            if constexpr (std::is_same_v<T, double>)
                out.push_back(std::stod(cell));
            else if constexpr (std::is_same_v<T, int>)
                out.push_back(std::stoi(cell));
            else
                out.push_back(static_cast<T>(std::stoull(cell)));
        } catch (const std::exception&) {
            throw ConfigError("bad value '" + cell + "' for key " + key);
        }
    }
    return out;
}

bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("bad boolean '" + value + "' for key " + key);
}

template <typename T>
T parse_num(const std::string& value, const std::string& key) {
    try {
        if constexpr (std::is_same_v<T, double>)
            return std::stod(value);
        else if constexpr (std::is_same_v<T, int>)
            return std::stoi(value);
        else
            return static_cast<T>(std::stoull(value));
    } catch (const std::exception&) {
        throw ConfigError("bad value '" + value + "' for key " + key);
    }
}

template <typename T>
std::string join(const std::vector<T>& values) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i) os << ",";
        os << values[i];
    }
    return os.str();
}

}  // namespace

void apply_line(RunConfig& c, const std::string& key,
                const std::string& value) {
    if (key == "seed")
        c.seed = parse_num<std::uint64_t>(value, key);
    else if (key == "jobs")
        c.jobs = parse_num<int>(value, key);
    else if (key == "data.fer_csv")
        c.data_fer_csv = value;
    else if (key == "data.recola_root")
        c.data_recola_root = value;
    else if (key == "model.input_hw")
        c.model_input_hw = parse_num<std::size_t>(value, key);
    else if (key == "model.conv_widths")
        c.model_conv_widths = parse_list<std::size_t>(value, key);
    else if (key == "model.fc")
        c.model_fc = parse_list<std::size_t>(value, key);
    else if (key == "pretrain.epochs")
        c.pretrain_epochs = parse_num<std::size_t>(value, key);
    else if (key == "pretrain.batch")
        c.pretrain_batch = parse_num<std::size_t>(value, key);
    else if (key == "pretrain.lr")
        c.pretrain_lr = parse_num<double>(value, key);
    else if (key == "pretrain.dropout")
        c.pretrain_dropout = parse_num<double>(value, key);
    else if (key == "cae.encoder_size")
        c.cae_encoder_size = parse_num<std::size_t>(value, key);
    else if (key == "cae.freeze")
        c.cae_freeze = parse_num<int>(value, key);
    else if (key == "cae.epochs")
        c.cae_epochs = parse_num<std::size_t>(value, key);
    else if (key == "cae.batch")
        c.cae_batch = parse_num<std::size_t>(value, key);
    else if (key == "cae.lr")
        c.cae_lr = parse_num<double>(value, key);
    else if (key == "cae.dropout")
        c.cae_dropout = parse_num<double>(value, key);
    else if (key == "cae.literal_pool_upsample")
        c.cae_literal_pool_upsample = parse_bool(value, key);
    else if (key == "cae.no_transfer")
        c.cae_no_transfer = parse_bool(value, key);
    else if (key == "cae.freeze_bn_stats")
        c.cae_freeze_bn_stats = parse_bool(value, key);
    else if (key == "cae.pretrain_checkpoint")
        c.cae_pretrain_checkpoint = value;
    else if (key == "svr.kernel")
        c.svr_kernel = value;
    else if (key == "svr.gamma")
        c.svr_gamma = parse_num<double>(value, key);
    else if (key == "svr.c_grid")
        c.svr_c_grid = parse_list<double>(value, key);
    else if (key == "svr.eps_grid")
        c.svr_eps_grid = parse_list<double>(value, key);
    else if (key == "svr.tol")
        c.svr_tol = parse_num<double>(value, key);
    else if (key == "post.center_mode")
        c.post_center_mode = value;
    else if (key == "post.scale_mode")
        c.post_scale_mode = value;
    else if (key == "eval.delay")
        c.eval_delay = parse_num<std::size_t>(value, key);
    else if (key == "synth.subjects")
        c.synth_subjects = parse_num<std::size_t>(value, key);
    else if (key == "synth.frames")
        c.synth_frames = parse_num<std::size_t>(value, key);
    else if (key == "synth.train_subjects")
        c.synth_train_subjects = parse_num<std::size_t>(value, key);
    else if (key == "synth.per_class")
        c.synth_per_class = parse_num<std::size_t>(value, key);
    else if (key == "sweep.freeze")
        c.sweep_freeze = parse_list<int>(value, key);
    else if (key == "sweep.encoder_size")
        c.sweep_encoder_size = parse_list<std::size_t>(value, key);
    else if (key == "sweep.delay")
        c.sweep_delay = parse_list<std::size_t>(value, key);
    else
        throw ConfigError("unknown config key '" + key + "'");
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path.string());
    RunConfig config;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) +
                              ": expected key = value");
        apply_line(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return config;
}

std::string config_to_text(const RunConfig& c) {
    std::ostringstream os;
    os.precision(17);
    os << "seed = " << c.seed << "\n";
    os << "jobs = " << c.jobs << "\n";
    os << "data.fer_csv = " << c.data_fer_csv << "\n";
    os << "data.recola_root = " << c.data_recola_root << "\n";
    os << "model.input_hw = " << c.model_input_hw << "\n";
    os << "model.conv_widths = " << join(c.model_conv_widths) << "\n";
    os << "model.fc = " << join(c.model_fc) << "\n";
    os << "pretrain.epochs = " << c.pretrain_epochs << "\n";
    os << "pretrain.batch = " << c.pretrain_batch << "\n";
    os << "pretrain.lr = " << c.pretrain_lr << "\n";
    os << "pretrain.dropout = " << c.pretrain_dropout << "\n";
    os << "cae.encoder_size = " << c.cae_encoder_size << "\n";
    os << "cae.freeze = " << c.cae_freeze << "\n";
    os << "cae.epochs = " << c.cae_epochs << "\n";
    os << "cae.batch = " << c.cae_batch << "\n";
    os << "cae.lr = " << c.cae_lr << "\n";
    os << "cae.dropout = " << c.cae_dropout << "\n";
    os << "cae.literal_pool_upsample = "
       << (c.cae_literal_pool_upsample ? "true" : "false") << "\n";
    os << "cae.no_transfer = " << (c.cae_no_transfer ? "true" : "false")
       << "\n";
    os << "cae.freeze_bn_stats = "
       << (c.cae_freeze_bn_stats ? "true" : "false") << "\n";
    os << "cae.pretrain_checkpoint = " << c.cae_pretrain_checkpoint << "\n";
    os << "svr.kernel = " << c.svr_kernel << "\n";
    os << "svr.gamma = " << c.svr_gamma << "\n";
    os << "svr.c_grid = " << join(c.svr_c_grid) << "\n";
    os << "svr.eps_grid = " << join(c.svr_eps_grid) << "\n";
    os << "svr.tol = " << c.svr_tol << "\n";
    os << "post.center_mode = " << c.post_center_mode << "\n";
    os << "post.scale_mode = " << c.post_scale_mode << "\n";
    os << "eval.delay = " << c.eval_delay << "\n";
    os << "synth.subjects = " << c.synth_subjects << "\n";
    os << "synth.frames = " << c.synth_frames << "\n";
    os << "synth.train_subjects = " << c.synth_train_subjects << "\n";
    os << "synth.per_class = " << c.synth_per_class << "\n";
    os << "sweep.freeze = " << join(c.sweep_freeze) << "\n";
    os << "sweep.encoder_size = " << join(c.sweep_encoder_size) << "\n";
    os << "sweep.delay = " << join(c.sweep_delay) << "\n";
    return os.str();
}

}  // namespace affect::cli
