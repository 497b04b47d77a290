#ifndef AFFECT_MODELS_HPP
#define AFFECT_MODELS_HPP

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "affect/nn.hpp"

namespace affect::models {

// Reference widths match the published stack (64/64/128 conv kernels,
// 100/50/10/7 FC). Reduced widths are for desk-scale runs and gradient
// checks; the layer graph is identical.
struct CnnOptions {
    std::size_t input_hw{48};
    std::array<std::size_t, 3> conv_widths{64, 64, 128};
    std::array<std::size_t, 4> fc{100, 50, 10, 7};
    double dropout{0.5};
};

// conv 64@3x3 relu -> BN -> conv 64@3x3 tanh -> maxpool -> BN ->
// conv 128@2x2 relu -> maxpool -> flatten -> FC100 tanh -> dropout 0.5 ->
// FC50 relu -> FC10 tanh -> FC7 softmax
std::pair<nn::NetworkSpec, nn::ModelWeights> build_pretrain_cnn(
    std::uint64_t seed, const CnnOptions& options = {});

struct CaeOptions {
    std::size_t input_hw{48};
    std::array<std::size_t, 3> conv_widths{64, 64, 128};
    double dropout{0.25};
    // The decoder's leading maxpool+upsample pair cancels at constant
    // resolution; kept by default for architecture fidelity.
    bool literal_pool_upsample{true};
};

// Encoder reuses the pretrain conv stack, then flatten -> FC bottleneck of
// size d. A dense bridge maps d back to the 12x12x128 map; the decoder runs
// conv 128@2x2 relu -> (pool+up) -> up -> conv 64@3x3 tanh -> up ->
// conv 64@3x3 relu -> conv 1@3x3 linear reconstruction head.
std::pair<nn::NetworkSpec, nn::ModelWeights> build_cae(
    std::size_t encoder_size, std::uint64_t seed,
    const CaeOptions& options = {});

// Name of the bottleneck layer whose activations are the learned features.
inline constexpr const char* kEncoderLayerName = "fc_enc";

std::size_t encoder_layer_index(const nn::NetworkSpec& spec);

// Copies conv1/conv2/conv3 kernels+biases and bn1/bn2 params (incl. running
// stats) from a pretrained CNN into a CAE encoder. Throws TransferError
// naming the first mismatching layer.
void transfer_weights(const nn::NetworkSpec& source_spec,
                      const nn::ModelWeights& source,
                      const nn::NetworkSpec& target_spec,
                      nn::ModelWeights& target);

struct FreezeOptions {
    // Freeze BN params and running-stat updates along with their conv.
    bool freeze_bn_stats{true};
};

// Flags the first n encoder conv layers (counted from the input side)
// frozen; n in 0..3.
void set_frozen(const nn::NetworkSpec& spec, nn::ModelWeights& weights,
                int n_frozen_convs, const FreezeOptions& options = {});

struct EncodedFeatures {
    Tensor features;  // [num_frames, d]
    std::vector<double> timestamps;
};

// Eval-mode forward through the encoder prefix only; deterministic.
EncodedFeatures encode(const nn::NetworkSpec& cae_spec,
                       nn::ModelWeights& cae_weights, const Tensor& frames,
                       std::vector<double> timestamps);

// CSV with header `timestamp,f0..f{d-1}`, 9 significant digits.
void write_features_csv(const std::filesystem::path& path,
                        const EncodedFeatures& features);
EncodedFeatures read_features_csv(const std::filesystem::path& path);

}  // namespace affect::models

#endif  // AFFECT_MODELS_HPP
