#ifndef AFFECT_TOOLS_STAGES_HPP
#define AFFECT_TOOLS_STAGES_HPP

#include <filesystem>
#include <stdexcept>
#include <string>

#include "config.hpp"

namespace affect::cli {

// Thrown when a stage's upstream artifact is absent; the message names the
// stage to run first. Maps to exit code 2.
struct MissingArtifact : std::runtime_error {
    explicit MissingArtifact(const std::string& msg)
        : std::runtime_error(msg) {}
};

void stage_synth_data(const RunConfig& config,
                      const std::filesystem::path& out);
void stage_pretrain(const RunConfig& config, const std::filesystem::path& out);
void stage_train_cae(const RunConfig& config, const std::filesystem::path& out);
void stage_encode(const RunConfig& config, const std::filesystem::path& out);
void stage_train_svr(const RunConfig& config, const std::filesystem::path& out);
void stage_postprocess(const RunConfig& config,
                       const std::filesystem::path& out);
void stage_evaluate(const RunConfig& config, const std::filesystem::path& out);
void stage_sweep(const RunConfig& config, const std::filesystem::path& out);

}  // namespace affect::cli

#endif  // AFFECT_TOOLS_STAGES_HPP
