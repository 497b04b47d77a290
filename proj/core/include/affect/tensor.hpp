#ifndef AFFECT_TENSOR_HPP
#define AFFECT_TENSOR_HPP

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "affect/errors.hpp"

namespace affect {

// Dense row-major N-d array of doubles. Immutable by convention once handed
// to an op; ops return fresh tensors.
struct Tensor {
    std::vector<std::size_t> shape;
    std::vector<double> data;

    Tensor() = default;
    Tensor(std::vector<std::size_t> shape_, std::vector<double> data_);

    static Tensor zeros(std::vector<std::size_t> shape);
    static Tensor full(std::vector<std::size_t> shape, double value);
    // Validating constructor for values coming from external input:
    // rejects NaN/Inf.
    static Tensor from_external(std::vector<std::size_t> shape,
                                std::vector<double> data);

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t dim(std::size_t i) const { return shape.at(i); }

    double& operator[](std::size_t i) { return data[i]; }
    double operator[](std::size_t i) const { return data[i]; }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    // Reshape without copying data; product of dims must match.
    Tensor reshaped(std::vector<std::size_t> new_shape) const;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);
std::string shape_to_string(const std::vector<std::size_t>& shape);

bool all_finite(const Tensor& t);

enum class Padding { Same, Valid };

// ---------------------------------------------------------------------------
// Forward kernels. Layout is NHWC for images, [N, D] for feature matrices.
// ---------------------------------------------------------------------------

// input [N,H,W,Cin], kernels [kh,kw,Cin,Cout], bias [Cout]; stride fixed 1.
// `same` pads symmetrically, extra pad on bottom/right when odd.
Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              Padding padding);

struct Conv2dGrads {
    Tensor input;
    Tensor kernels;
    Tensor bias;
};
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels,
                            const Tensor& grad_out, Padding padding);

// 2x2 window, stride 2; H and W must be even. Ties broken by first
// (row-major) maximum. argmax holds flat indices into the input.
struct MaxPoolResult {
    Tensor output;
    std::vector<std::size_t> argmax;
};
MaxPoolResult maxpool2d(const Tensor& input);
Tensor maxpool2d_backward(const std::vector<std::size_t>& argmax,
                          const std::vector<std::size_t>& input_shape,
                          const Tensor& grad_out);

// Nearest-neighbour x2: each pixel replicated into a 2x2 block.
Tensor upsample2d(const Tensor& input);
Tensor upsample2d_backward(const Tensor& grad_out);

// input [N,Din], weights [Din,Dout], bias [Dout].
Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct DenseGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};
DenseGrads dense_backward(const Tensor& input, const Tensor& weights,
                          const Tensor& grad_out);

enum class Mode { Train, Eval };

// Normalizes over all axes but the channel (innermost) axis.
struct BatchNormResult {
    Tensor output;
    Tensor xhat;     // cached for backward
    Tensor mean;     // per channel, stats actually used
    Tensor inv_std;  // per channel
};
BatchNormResult batchnorm(const Tensor& input, const Tensor& gamma,
                          const Tensor& beta, Tensor& running_mean,
                          Tensor& running_var, Mode mode, double momentum,
                          double epsilon, bool update_running = true);

struct BatchNormGrads {
    Tensor input;
    Tensor gamma;
    Tensor beta;
};
BatchNormGrads batchnorm_backward(const Tensor& grad_out,
                                  const BatchNormResult& cache,
                                  const Tensor& gamma, Mode mode);

enum class Activation { Linear, Relu, Tanh, Softmax };

// Softmax is taken over the innermost axis with max-subtraction.
Tensor activation(const Tensor& input, Activation kind);
// grad wrt pre-activation, given pre-activation input and activation output.
Tensor activation_backward(const Tensor& grad_out, const Tensor& pre_act,
                           const Tensor& out, Activation kind);

// Inverted dropout: train mode zeroes with probability p and scales
// survivors by 1/(1-p); eval mode is identity (empty mask).
struct DropoutResult {
    Tensor output;
    Tensor mask;
};
DropoutResult dropout(const Tensor& input, double rate, Mode mode,
                      std::mt19937_64& rng);
Tensor dropout_backward(const Tensor& grad_out, const Tensor& mask);

Activation activation_from_string(const std::string& s);
std::string activation_to_string(Activation a);

}  // namespace affect

#endif  // AFFECT_TENSOR_HPP
