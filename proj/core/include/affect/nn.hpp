#ifndef AFFECT_NN_HPP
#define AFFECT_NN_HPP

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "affect/tensor.hpp"

namespace affect::nn {

enum class LayerKind {
    Conv2d,
    BatchNorm,
    MaxPool2d,
    Upsample2d,
    Dense,
    Dropout,
    Flatten,
    Reshape
};

struct LayerSpec {
    LayerKind kind{};
    std::string name;
    Activation act{Activation::Linear};
    // Conv2d
    std::size_t kernel_h{0}, kernel_w{0}, out_channels{0};
    Padding padding{Padding::Same};
    // Dense
    std::size_t units{0};
    // Dropout
    double rate{0.0};
    // BatchNorm
    double bn_momentum{0.99};
    double bn_epsilon{1e-5};
    // Reshape (per-sample target shape)
    std::vector<std::size_t> target_shape;
};

// Ordered layer stack. input_shape is the per-sample shape ([H,W,C] or [D]).
struct NetworkSpec {
    std::vector<std::size_t> input_shape;
    std::vector<LayerSpec> layers;
};

// Per-layer output shapes (per sample); throws ShapeError if layers do not
// compose.
std::vector<std::vector<std::size_t>> infer_shapes(const NetworkSpec& spec);

std::string spec_to_text(const NetworkSpec& spec);
NetworkSpec spec_from_text(const std::string& text);

struct LayerWeights {
    Tensor weight;  // conv kernels / dense weights / bn gamma
    Tensor bias;    // conv & dense bias / bn beta
    Tensor running_mean, running_var;  // bn only
    bool has_params() const { return weight.size() > 0; }
};

struct ModelWeights {
    std::vector<LayerWeights> layers;   // parallel to spec.layers
    std::vector<std::uint8_t> frozen;   // parallel; frozen layers never update
    std::uint64_t revision{0};          // bumped by optimizer steps
};

// Glorot-uniform init for conv/dense, gamma=1 beta=0 for BN; seeded.
ModelWeights init_weights(const NetworkSpec& spec, std::uint64_t seed);

std::size_t parameter_count(const ModelWeights& weights);

struct LayerTape {
    Tensor input;
    Tensor pre_act;
    Tensor output;
    std::vector<std::size_t> pool_argmax;
    Tensor dropout_mask;
    BatchNormResult bn_cache;
};

struct Tape {
    Mode mode{Mode::Eval};
    std::uint64_t weights_revision{0};
    std::vector<LayerTape> layers;
    Tensor output;
};

// Runs the stack on a batch [N, ...input_shape]. In train mode BatchNorm
// running stats are updated (except for frozen BN layers) and dropout is
// active, driven by `rng`. The tape records everything backward needs.
Tensor forward(const NetworkSpec& spec, ModelWeights& weights,
               const Tensor& batch, Mode mode, std::mt19937_64& rng,
               Tape* tape = nullptr);

struct LayerGrads {
    Tensor weight;
    Tensor bias;
};

// One entry per layer; frozen and parameter-less layers have no entry.
struct Gradients {
    std::vector<std::optional<LayerGrads>> layers;
};

Gradients backward(const NetworkSpec& spec, const ModelWeights& weights,
                   const Tape& tape, const Tensor& grad_output);

enum class LossKind { CategoricalCrossentropy, Mse };

LossKind loss_from_string(const std::string& s);
std::string loss_to_string(LossKind k);

// Mean over the batch (crossentropy) / over all elements (mse).
double loss_value(LossKind kind, const Tensor& predicted, const Tensor& target);
Tensor loss_grad(LossKind kind, const Tensor& predicted, const Tensor& target);

struct TrainConfig {
    double learning_rate{1e-5};
    std::size_t batch_size{64};
    std::size_t max_epochs{500};
    LossKind loss{LossKind::Mse};
    double beta1{0.9};
    double beta2{0.999};
    double adam_epsilon{1e-8};
    std::uint64_t seed{0};
    // patience-based early stop on validation loss; 0 disables
    std::size_t early_stop_patience{0};
};

struct AdamState {
    std::vector<std::optional<LayerGrads>> m;
    std::vector<std::optional<LayerGrads>> v;
    std::uint64_t timestep{0};
};

AdamState init_adam_state(const ModelWeights& weights);

// Standard Adam with bias correction; frozen parameters untouched.
void adam_step(ModelWeights& weights, const Gradients& grads, AdamState& state,
               const TrainConfig& config);

struct Dataset {
    Tensor inputs;   // [N, ...]
    Tensor targets;  // [N, ...]
};

// Mini-batch training; seeded shuffling, one loss entry per epoch.
// Optional validation set drives early stopping when patience > 0.
std::vector<double> train(const NetworkSpec& spec, ModelWeights& weights,
                          const Dataset& dataset, const TrainConfig& config,
                          const Dataset* validation = nullptr);

}  // namespace affect::nn

#endif  // AFFECT_NN_HPP
