#include "affect/tensor.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace affect {

using MatrixRM =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatrixRM>;
using ConstMapRM = Eigen::Map<const MatrixRM>;

std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t p = 1;
    for (std::size_t d : shape) p *= d;
    return p;
}

std::string shape_to_string(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

Tensor::Tensor(std::vector<std::size_t> shape_, std::vector<double> data_)
    : shape(std::move(shape_)), data(std::move(data_)) {
    for (std::size_t d : shape) {
        if (d == 0) throw ShapeError("tensor extents must be positive");
    }
    if (shape_product(shape) != data.size()) {
        throw ShapeError("tensor data length " + std::to_string(data.size()) +
                         " does not match shape " + shape_to_string(shape));
    }
}

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
    std::size_t n = shape_product(shape);
    return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

Tensor Tensor::full(std::vector<std::size_t> shape, double value) {
    std::size_t n = shape_product(shape);
    return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::from_external(std::vector<std::size_t> shape,
                             std::vector<double> data) {
    Tensor t(std::move(shape), std::move(data));
    if (!all_finite(t)) {
        throw ParamError("external tensor contains non-finite values");
    }
    return t;
}

Tensor Tensor::reshaped(std::vector<std::size_t> new_shape) const {
    if (shape_product(new_shape) != data.size()) {
        throw ShapeError("reshape " + shape_to_string(shape) + " -> " +
                         shape_to_string(new_shape) + " changes element count");
    }
    return Tensor(std::move(new_shape), data);
}

bool all_finite(const Tensor& t) {
    return std::all_of(t.data.begin(), t.data.end(),
                       [](double v) { return std::isfinite(v); });
}

namespace {

struct Pad {
    std::size_t top = 0, bottom = 0, left = 0, right = 0;
};

// `same` splits k-1 symmetrically; the extra row/column goes bottom/right.
Pad pad_for(Padding padding, std::size_t kh, std::size_t kw) {
    Pad p;
    if (padding == Padding::Same) {
        p.top = (kh - 1) / 2;
        p.bottom = kh - 1 - p.top;
        p.left = (kw - 1) / 2;
        p.right = kw - 1 - p.left;
    }
    return p;
}

void check_conv_shapes(const Tensor& input, const Tensor& kernels,
                       const Tensor& bias, Padding padding) {
    if (input.rank() != 4)
        throw ShapeError("conv2d input must be rank 4 NHWC, got " +
                         shape_to_string(input.shape));
    if (kernels.rank() != 4)
        throw ShapeError("conv2d kernels must be rank 4 [kh,kw,Cin,Cout]");
    if (input.dim(3) != kernels.dim(2))
        throw ShapeError("conv2d channel mismatch: input Cin " +
                         std::to_string(input.dim(3)) + " vs kernel Cin " +
                         std::to_string(kernels.dim(2)));
    if (bias.rank() != 1 || bias.dim(0) != kernels.dim(3))
        throw ShapeError("conv2d bias must be [Cout]");
    if (padding == Padding::Valid &&
        (kernels.dim(0) > input.dim(1) || kernels.dim(1) > input.dim(2)))
        throw ShapeError("conv2d kernel larger than input");
}

// Lowers conv input into a [N*OH*OW, kh*kw*Cin] patch matrix.
MatrixRM im2col(const Tensor& input, std::size_t kh, std::size_t kw,
                const Pad& pad, std::size_t oh, std::size_t ow) {
    const std::size_t n = input.dim(0), h = input.dim(1), w = input.dim(2),
                      c = input.dim(3);
    MatrixRM col = MatrixRM::Zero(
        static_cast<Eigen::Index>(n * oh * ow),
        static_cast<Eigen::Index>(kh * kw * c));
    const double* src = input.data.data();
    for (std::size_t ni = 0; ni < n; ++ni) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                const std::size_t row = (ni * oh + oy) * ow + ox;
                double* dst = col.data() + row * kh * kw * c;
                for (std::size_t ky = 0; ky < kh; ++ky) {
                    const std::ptrdiff_t iy =
                        static_cast<std::ptrdiff_t>(oy + ky) -
                        static_cast<std::ptrdiff_t>(pad.top);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t kx = 0; kx < kw; ++kx) {
                        const std::ptrdiff_t ix =
                            static_cast<std::ptrdiff_t>(ox + kx) -
                            static_cast<std::ptrdiff_t>(pad.left);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w))
                            continue;
                        const double* in_px =
                            src + ((ni * h + iy) * w + ix) * c;
                        std::copy(in_px, in_px + c,
                                  dst + (ky * kw + kx) * c);
                    }
                }
            }
        }
    }
    return col;
}

// Scatter-add of a patch matrix back onto the (unpadded) input layout.
void col2im(const MatrixRM& col, Tensor& grad_input, std::size_t kh,
            std::size_t kw, const Pad& pad, std::size_t oh, std::size_t ow) {
    const std::size_t n = grad_input.dim(0), h = grad_input.dim(1),
                      w = grad_input.dim(2), c = grad_input.dim(3);
    double* dst_base = grad_input.data.data();
    for (std::size_t ni = 0; ni < n; ++ni) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                const std::size_t row = (ni * oh + oy) * ow + ox;
                const double* src = col.data() + row * kh * kw * c;
                for (std::size_t ky = 0; ky < kh; ++ky) {
                    const std::ptrdiff_t iy =
                        static_cast<std::ptrdiff_t>(oy + ky) -
                        static_cast<std::ptrdiff_t>(pad.top);
                    if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(h)) continue;
                    for (std::size_t kx = 0; kx < kw; ++kx) {
                        const std::ptrdiff_t ix =
                            static_cast<std::ptrdiff_t>(ox + kx) -
                            static_cast<std::ptrdiff_t>(pad.left);
                        if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(w))
                            continue;
                        double* out_px = dst_base + ((ni * h + iy) * w + ix) * c;
                        const double* in_px = src + (ky * kw + kx) * c;
                        for (std::size_t ci = 0; ci < c; ++ci)
                            out_px[ci] += in_px[ci];
                    }
                }
            }
        }
    }
}

void out_spatial(const Tensor& input, const Tensor& kernels, Padding padding,
                 std::size_t& oh, std::size_t& ow) {
    if (padding == Padding::Same) {
        oh = input.dim(1);
        ow = input.dim(2);
    } else {
        oh = input.dim(1) - kernels.dim(0) + 1;
        ow = input.dim(2) - kernels.dim(1) + 1;
    }
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernels, const Tensor& bias,
              Padding padding) {
    check_conv_shapes(input, kernels, bias, padding);
    const std::size_t kh = kernels.dim(0), kw = kernels.dim(1),
                      cin = kernels.dim(2), cout = kernels.dim(3);
    std::size_t oh, ow;
    out_spatial(input, kernels, padding, oh, ow);
    const Pad pad = pad_for(padding, kh, kw);

    MatrixRM col = im2col(input, kh, kw, pad, oh, ow);
    // kernels are stored [kh,kw,Cin,Cout] row-major, which is exactly the
    // [kh*kw*Cin, Cout] weight matrix.
    ConstMapRM wmat(kernels.data.data(),
                    static_cast<Eigen::Index>(kh * kw * cin),
                    static_cast<Eigen::Index>(cout));
    MatrixRM out = col * wmat;
    out.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(
        bias.data.data(), static_cast<Eigen::Index>(cout));

    Tensor result({input.dim(0), oh, ow, cout},
                  std::vector<double>(out.data(), out.data() + out.size()));
    return result;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels,
                            const Tensor& grad_out, Padding padding) {
    check_conv_shapes(input, kernels, Tensor::zeros({kernels.dim(3)}),
                      padding);
    const std::size_t kh = kernels.dim(0), kw = kernels.dim(1),
                      cin = kernels.dim(2), cout = kernels.dim(3);
    std::size_t oh, ow;
    out_spatial(input, kernels, padding, oh, ow);
    if (grad_out.shape !=
        std::vector<std::size_t>{input.dim(0), oh, ow, cout})
        throw ShapeError("conv2d_backward grad_out shape mismatch");
    const Pad pad = pad_for(padding, kh, kw);

    MatrixRM col = im2col(input, kh, kw, pad, oh, ow);
    ConstMapRM gout(grad_out.data.data(),
                    static_cast<Eigen::Index>(input.dim(0) * oh * ow),
                    static_cast<Eigen::Index>(cout));
    ConstMapRM wmat(kernels.data.data(),
                    static_cast<Eigen::Index>(kh * kw * cin),
                    static_cast<Eigen::Index>(cout));

    Conv2dGrads grads;
    MatrixRM gw = col.transpose() * gout;
    grads.kernels = Tensor(kernels.shape,
                           std::vector<double>(gw.data(), gw.data() + gw.size()));
    Eigen::VectorXd gb = gout.colwise().sum();
    grads.bias = Tensor({cout},
                        std::vector<double>(gb.data(), gb.data() + gb.size()));
    MatrixRM gcol = gout * wmat.transpose();
    grads.input = Tensor::zeros(input.shape);
    col2im(gcol, grads.input, kh, kw, pad, oh, ow);
    return grads;
}

MaxPoolResult maxpool2d(const Tensor& input) {
    if (input.rank() != 4)
        throw ShapeError("maxpool2d input must be rank 4 NHWC");
    const std::size_t n = input.dim(0), h = input.dim(1), w = input.dim(2),
                      c = input.dim(3);
    if (h % 2 != 0 || w % 2 != 0)
        throw ShapeError("maxpool2d requires even H and W, got " +
                         shape_to_string(input.shape));
    const std::size_t oh = h / 2, ow = w / 2;
    MaxPoolResult res;
    res.output = Tensor::zeros({n, oh, ow, c});
    res.argmax.resize(n * oh * ow * c);
    for (std::size_t ni = 0; ni < n; ++ni) {
        for (std::size_t oy = 0; oy < oh; ++oy) {
            for (std::size_t ox = 0; ox < ow; ++ox) {
                for (std::size_t ci = 0; ci < c; ++ci) {
                    double best = -1.0;
                    std::size_t best_idx = 0;
                    bool first = true;
                    for (std::size_t dy = 0; dy < 2; ++dy) {
                        for (std::size_t dx = 0; dx < 2; ++dx) {
                            const std::size_t idx =
                                ((ni * h + 2 * oy + dy) * w + 2 * ox + dx) * c +
                                ci;
                            const double v = input.data[idx];
                            if (first || v > best) {
                                best = v;
                                best_idx = idx;
                                first = false;
                            }
                        }
                    }
                    const std::size_t out_idx =
                        ((ni * oh + oy) * ow + ox) * c + ci;
                    res.output.data[out_idx] = best;
                    res.argmax[out_idx] = best_idx;
                }
            }
        }
    }
    return res;
}

Tensor maxpool2d_backward(const std::vector<std::size_t>& argmax,
                          const std::vector<std::size_t>& input_shape,
                          const Tensor& grad_out) {
    if (argmax.size() != grad_out.size())
        throw ShapeError("maxpool2d_backward argmax/grad size mismatch");
    Tensor grad_input = Tensor::zeros(input_shape);
    for (std::size_t i = 0; i < argmax.size(); ++i)
        grad_input.data[argmax[i]] += grad_out.data[i];
    return grad_input;
}

Tensor upsample2d(const Tensor& input) {
    if (input.rank() != 4)
        throw ShapeError("upsample2d input must be rank 4 NHWC");
    const std::size_t n = input.dim(0), h = input.dim(1), w = input.dim(2),
                      c = input.dim(3);
    Tensor out = Tensor::zeros({n, 2 * h, 2 * w, c});
    for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x)
                for (std::size_t ci = 0; ci < c; ++ci) {
                    const double v = input.data[((ni * h + y) * w + x) * c + ci];
                    for (std::size_t dy = 0; dy < 2; ++dy)
                        for (std::size_t dx = 0; dx < 2; ++dx)
                            out.data[((ni * 2 * h + 2 * y + dy) * 2 * w +
                                      2 * x + dx) *
                                         c +
                                     ci] = v;
                }
    return out;
}

Tensor upsample2d_backward(const Tensor& grad_out) {
    if (grad_out.rank() != 4 || grad_out.dim(1) % 2 != 0 ||
        grad_out.dim(2) % 2 != 0)
        throw ShapeError("upsample2d_backward grad must be rank 4 with even H,W");
    const std::size_t n = grad_out.dim(0), oh = grad_out.dim(1),
                      ow = grad_out.dim(2), c = grad_out.dim(3);
    const std::size_t h = oh / 2, w = ow / 2;
    Tensor grad_in = Tensor::zeros({n, h, w, c});
    for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t y = 0; y < oh; ++y)
            for (std::size_t x = 0; x < ow; ++x)
                for (std::size_t ci = 0; ci < c; ++ci)
                    grad_in.data[((ni * h + y / 2) * w + x / 2) * c + ci] +=
                        grad_out.data[((ni * oh + y) * ow + x) * c + ci];
    return grad_in;
}

Tensor dense(const Tensor& input, const Tensor& weights, const Tensor& bias) {
    if (input.rank() != 2 || weights.rank() != 2)
        throw ShapeError("dense expects [N,Din] input and [Din,Dout] weights");
    if (input.dim(1) != weights.dim(0))
        throw ShapeError("dense dimension mismatch: input Din " +
                         std::to_string(input.dim(1)) + " vs weights Din " +
                         std::to_string(weights.dim(0)));
    if (bias.rank() != 1 || bias.dim(0) != weights.dim(1))
        throw ShapeError("dense bias must be [Dout]");
    ConstMapRM x(input.data.data(), static_cast<Eigen::Index>(input.dim(0)),
                 static_cast<Eigen::Index>(input.dim(1)));
    ConstMapRM w(weights.data.data(), static_cast<Eigen::Index>(weights.dim(0)),
                 static_cast<Eigen::Index>(weights.dim(1)));
    MatrixRM out = x * w;
    out.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(
        bias.data.data(), static_cast<Eigen::Index>(bias.dim(0)));
    return Tensor({input.dim(0), weights.dim(1)},
                  std::vector<double>(out.data(), out.data() + out.size()));
}

DenseGrads dense_backward(const Tensor& input, const Tensor& weights,
                          const Tensor& grad_out) {
    ConstMapRM x(input.data.data(), static_cast<Eigen::Index>(input.dim(0)),
                 static_cast<Eigen::Index>(input.dim(1)));
    ConstMapRM w(weights.data.data(), static_cast<Eigen::Index>(weights.dim(0)),
                 static_cast<Eigen::Index>(weights.dim(1)));
    ConstMapRM g(grad_out.data.data(),
                 static_cast<Eigen::Index>(grad_out.dim(0)),
                 static_cast<Eigen::Index>(grad_out.dim(1)));
    DenseGrads grads;
    MatrixRM gw = x.transpose() * g;
    grads.weights = Tensor(
        weights.shape, std::vector<double>(gw.data(), gw.data() + gw.size()));
    Eigen::VectorXd gb = g.colwise().sum();
    grads.bias = Tensor({weights.dim(1)},
                        std::vector<double>(gb.data(), gb.data() + gb.size()));
    MatrixRM gx = g * w.transpose();
    grads.input = Tensor(
        input.shape, std::vector<double>(gx.data(), gx.data() + gx.size()));
    return grads;
}

BatchNormResult batchnorm(const Tensor& input, const Tensor& gamma,
                          const Tensor& beta, Tensor& running_mean,
                          Tensor& running_var, Mode mode, double momentum,
                          double epsilon, bool update_running) {
    if (input.rank() != 2 && input.rank() != 4)
        throw ShapeError("batchnorm input must be rank 2 or 4");
    const std::size_t c = input.shape.back();
    if (gamma.size() != c || beta.size() != c || running_mean.size() != c ||
        running_var.size() != c)
        throw ShapeError("batchnorm parameter size must equal channel count");
    if (mode == Mode::Train && input.dim(0) < 2)
        throw ShapeError("batchnorm train mode requires batch size >= 2");
    const std::size_t m = input.size() / c;

    BatchNormResult res;
    res.mean = Tensor::zeros({c});
    res.inv_std = Tensor::zeros({c});
    if (mode == Mode::Train) {
        Tensor var = Tensor::zeros({c});
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t ci = 0; ci < c; ++ci)
                res.mean.data[ci] += input.data[i * c + ci];
        for (std::size_t ci = 0; ci < c; ++ci) res.mean.data[ci] /= double(m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t ci = 0; ci < c; ++ci) {
                const double d = input.data[i * c + ci] - res.mean.data[ci];
                var.data[ci] += d * d;
            }
        for (std::size_t ci = 0; ci < c; ++ci) var.data[ci] /= double(m);
        for (std::size_t ci = 0; ci < c; ++ci)
            res.inv_std.data[ci] = 1.0 / std::sqrt(var.data[ci] + epsilon);
        if (update_running) {
            for (std::size_t ci = 0; ci < c; ++ci) {
                running_mean.data[ci] = momentum * running_mean.data[ci] +
                                        (1.0 - momentum) * res.mean.data[ci];
                running_var.data[ci] = momentum * running_var.data[ci] +
                                       (1.0 - momentum) * var.data[ci];
            }
        }
    } else {
        for (std::size_t ci = 0; ci < c; ++ci) {
            res.mean.data[ci] = running_mean.data[ci];
            res.inv_std.data[ci] =
                1.0 / std::sqrt(running_var.data[ci] + epsilon);
        }
    }
    res.xhat = Tensor::zeros(input.shape);
    res.output = Tensor::zeros(input.shape);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t ci = 0; ci < c; ++ci) {
            const double xh = (input.data[i * c + ci] - res.mean.data[ci]) *
                              res.inv_std.data[ci];
            res.xhat.data[i * c + ci] = xh;
            res.output.data[i * c + ci] =
                gamma.data[ci] * xh + beta.data[ci];
        }
    return res;
}

BatchNormGrads batchnorm_backward(const Tensor& grad_out,
                                  const BatchNormResult& cache,
                                  const Tensor& gamma, Mode mode) {
    const std::size_t c = grad_out.shape.back();
    const std::size_t m = grad_out.size() / c;
    BatchNormGrads grads;
    grads.gamma = Tensor::zeros({c});
    grads.beta = Tensor::zeros({c});
    grads.input = Tensor::zeros(grad_out.shape);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t ci = 0; ci < c; ++ci) {
            grads.gamma.data[ci] +=
                grad_out.data[i * c + ci] * cache.xhat.data[i * c + ci];
            grads.beta.data[ci] += grad_out.data[i * c + ci];
        }
    if (mode == Mode::Eval) {
        // running stats are constants in eval mode
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t ci = 0; ci < c; ++ci)
                grads.input.data[i * c + ci] = grad_out.data[i * c + ci] *
                                               gamma.data[ci] *
                                               cache.inv_std.data[ci];
        return grads;
    }
    // train mode: mean/var depend on the batch
    std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t ci = 0; ci < c; ++ci) {
            const double gh = grad_out.data[i * c + ci] * gamma.data[ci];
            sum_g[ci] += gh;
            sum_gx[ci] += gh * cache.xhat.data[i * c + ci];
        }
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t ci = 0; ci < c; ++ci) {
            const double gh = grad_out.data[i * c + ci] * gamma.data[ci];
            grads.input.data[i * c + ci] =
                cache.inv_std.data[ci] *
                (gh - sum_g[ci] / double(m) -
                 cache.xhat.data[i * c + ci] * sum_gx[ci] / double(m));
        }
    return grads;
}

Tensor activation(const Tensor& input, Activation kind) {
    Tensor out = input;
    switch (kind) {
        case Activation::Linear:
            break;
        case Activation::Relu:
            for (double& v : out.data) v = v > 0.0 ? v : 0.0;
            break;
        case Activation::Tanh:
            for (double& v : out.data) v = std::tanh(v);
            break;
        case Activation::Softmax: {
            const std::size_t c = input.shape.back();
            const std::size_t m = input.size() / c;
            for (std::size_t i = 0; i < m; ++i) {
                double mx = out.data[i * c];
                for (std::size_t ci = 1; ci < c; ++ci)
                    mx = std::max(mx, out.data[i * c + ci]);
                double sum = 0.0;
                for (std::size_t ci = 0; ci < c; ++ci) {
                    out.data[i * c + ci] = std::exp(out.data[i * c + ci] - mx);
                    sum += out.data[i * c + ci];
                }
                for (std::size_t ci = 0; ci < c; ++ci)
                    out.data[i * c + ci] /= sum;
            }
            break;
        }
    }
    return out;
}

Tensor activation_backward(const Tensor& grad_out, const Tensor& pre_act,
                           const Tensor& out, Activation kind) {
    Tensor grad = grad_out;
    switch (kind) {
        case Activation::Linear:
            break;
        case Activation::Relu:
            for (std::size_t i = 0; i < grad.size(); ++i)
                if (pre_act.data[i] <= 0.0) grad.data[i] = 0.0;
            break;
        case Activation::Tanh:
            for (std::size_t i = 0; i < grad.size(); ++i)
                grad.data[i] *= 1.0 - out.data[i] * out.data[i];
            break;
        case Activation::Softmax: {
            const std::size_t c = out.shape.back();
            const std::size_t m = out.size() / c;
            for (std::size_t i = 0; i < m; ++i) {
                double dot = 0.0;
                for (std::size_t ci = 0; ci < c; ++ci)
                    dot += grad_out.data[i * c + ci] * out.data[i * c + ci];
                for (std::size_t ci = 0; ci < c; ++ci)
                    grad.data[i * c + ci] =
                        out.data[i * c + ci] *
                        (grad_out.data[i * c + ci] - dot);
            }
            break;
        }
    }
    return grad;
}

DropoutResult dropout(const Tensor& input, double rate, Mode mode,
                      std::mt19937_64& rng) {
    if (rate < 0.0 || rate >= 1.0)
        throw ParamError("dropout rate must be in [0,1)");
    DropoutResult res;
    if (mode == Mode::Eval || rate == 0.0) {
        res.output = input;
        return res;
    }
    res.mask = Tensor::zeros(input.shape);
    res.output = Tensor::zeros(input.shape);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (std::size_t i = 0; i < input.size(); ++i) {
        const double keep = uni(rng) >= rate ? keep_scale : 0.0;
        res.mask.data[i] = keep;
        res.output.data[i] = input.data[i] * keep;
    }
    return res;
}

Tensor dropout_backward(const Tensor& grad_out, const Tensor& mask) {
    if (mask.size() == 0) return grad_out;  // eval-mode pass-through
    Tensor grad = grad_out;
    for (std::size_t i = 0; i < grad.size(); ++i)
        grad.data[i] *= mask.data[i];
    return grad;
}

Activation activation_from_string(const std::string& s) {
    if (s == "linear") return Activation::Linear;
    if (s == "relu") return Activation::Relu;
    if (s == "tanh") return Activation::Tanh;
    if (s == "softmax") return Activation::Softmax;
    throw ParseError("unknown activation '" + s + "'");
}

std::string activation_to_string(Activation a) {
    switch (a) {
        case Activation::Linear: return "linear";
        case Activation::Relu: return "relu";
        case Activation::Tanh: return "tanh";
        case Activation::Softmax: return "softmax";
    }
    return "linear";
}

}  // namespace affect
