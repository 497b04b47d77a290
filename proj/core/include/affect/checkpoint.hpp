#ifndef AFFECT_CHECKPOINT_HPP
#define AFFECT_CHECKPOINT_HPP

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "affect/nn.hpp"

namespace affect::checkpoint {

// Versioned binary container. Header: magic "AFPL", u32 format version,
// 4-char section tag. Section "NNET" carries the NetworkSpec as canonical
// text followed by named parameter blobs (name, shape, little-endian fp64).
// Other sections ("SVRM") reuse the same blob framing with a free-form text
// header.

inline constexpr char kMagic[4] = {'A', 'F', 'P', 'L'};
inline constexpr std::uint32_t kFormatVersion = 1;

struct Blob {
    std::string name;
    Tensor tensor;
};

struct Container {
    std::string section;  // 4 chars
    std::string text;     // canonical text header
    std::vector<Blob> blobs;
};

void write_container(const std::filesystem::path& path, const Container& c);
Container read_container(const std::filesystem::path& path);

void save_model(const std::filesystem::path& path, const nn::NetworkSpec& spec,
                const nn::ModelWeights& weights);

// Loading validates parameter shapes against the stored spec.
std::pair<nn::NetworkSpec, nn::ModelWeights> load_model(
    const std::filesystem::path& path);

}  // namespace affect::checkpoint

#endif  // AFFECT_CHECKPOINT_HPP
