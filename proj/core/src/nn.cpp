#include "affect/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace affect::nn {

namespace {

std::string padding_to_string(Padding p) {
    return p == Padding::Same ? "same" : "valid";
}

Padding padding_from_string(const std::string& s) {
    if (s == "same") return Padding::Same;
    if (s == "valid") return Padding::Valid;
    throw ParseError("unknown padding '" + s + "'");
}

std::string fmt_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

}  // namespace

std::vector<std::vector<std::size_t>> infer_shapes(const NetworkSpec& spec) {
    std::vector<std::vector<std::size_t>> shapes;
    std::vector<std::size_t> cur = spec.input_shape;
    for (const LayerSpec& layer : spec.layers) {
        switch (layer.kind) {
            case LayerKind::Conv2d: {
                if (cur.size() != 3)
                    throw ShapeError("layer " + layer.name +
                                     ": conv2d needs [H,W,C] input, got " +
                                     shape_to_string(cur));
                std::size_t h = cur[0], w = cur[1];
                if (layer.padding == Padding::Valid) {
                    if (layer.kernel_h > h || layer.kernel_w > w)
                        throw ShapeError("layer " + layer.name +
                                         ": kernel larger than input");
                    h = h - layer.kernel_h + 1;
                    w = w - layer.kernel_w + 1;
                }
                cur = {h, w, layer.out_channels};
                break;
            }
            case LayerKind::BatchNorm:
                break;
            case LayerKind::MaxPool2d:
                if (cur.size() != 3 || cur[0] % 2 != 0 || cur[1] % 2 != 0)
                    throw ShapeError("layer " + layer.name +
                                     ": maxpool needs even [H,W,C], got " +
                                     shape_to_string(cur));
                cur = {cur[0] / 2, cur[1] / 2, cur[2]};
                break;
            case LayerKind::Upsample2d:
                if (cur.size() != 3)
                    throw ShapeError("layer " + layer.name +
                                     ": upsample needs [H,W,C] input");
                cur = {cur[0] * 2, cur[1] * 2, cur[2]};
                break;
            case LayerKind::Dense:
                if (cur.size() != 1)
                    throw ShapeError("layer " + layer.name +
                                     ": dense needs flat input, got " +
                                     shape_to_string(cur));
                cur = {layer.units};
                break;
            case LayerKind::Dropout:
                break;
            case LayerKind::Flatten:
                cur = {shape_product(cur)};
                break;
            case LayerKind::Reshape:
                if (shape_product(layer.target_shape) != shape_product(cur))
                    throw ShapeError("layer " + layer.name +
                                     ": reshape element count mismatch");
                cur = layer.target_shape;
                break;
        }
        shapes.push_back(cur);
    }
    return shapes;
}

std::string spec_to_text(const NetworkSpec& spec) {
    std::ostringstream os;
    os << "input";
    for (std::size_t d : spec.input_shape) os << " " << d;
    os << "\n";
    for (const LayerSpec& l : spec.layers) {
        switch (l.kind) {
            case LayerKind::Conv2d:
                os << "conv2d " << l.name << " " << l.kernel_h << " "
                   << l.kernel_w << " " << l.out_channels << " "
                   << padding_to_string(l.padding) << " "
                   << activation_to_string(l.act);
                break;
            case LayerKind::BatchNorm:
                os << "batchnorm " << l.name << " " << fmt_double(l.bn_momentum)
                   << " " << fmt_double(l.bn_epsilon);
                break;
            case LayerKind::MaxPool2d:
                os << "maxpool " << l.name;
                break;
            case LayerKind::Upsample2d:
                os << "upsample " << l.name;
                break;
            case LayerKind::Dense:
                os << "dense " << l.name << " " << l.units << " "
                   << activation_to_string(l.act);
                break;
            case LayerKind::Dropout:
                os << "dropout " << l.name << " " << fmt_double(l.rate);
                break;
            case LayerKind::Flatten:
                os << "flatten " << l.name;
                break;
            case LayerKind::Reshape:
                os << "reshape " << l.name;
                for (std::size_t d : l.target_shape) os << " " << d;
                break;
        }
        os << "\n";
    }
    return os.str();
}

NetworkSpec spec_from_text(const std::string& text) {
    NetworkSpec spec;
    std::istringstream is(text);
    std::string line;
    bool saw_input = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string kind;
        ls >> kind;
        if (kind == "input") {
            std::size_t d;
            while (ls >> d) spec.input_shape.push_back(d);
            saw_input = true;
            continue;
        }
        LayerSpec l;
        ls >> l.name;
        if (kind == "conv2d") {
            std::string pad, act;
            l.kind = LayerKind::Conv2d;
            ls >> l.kernel_h >> l.kernel_w >> l.out_channels >> pad >> act;
            l.padding = padding_from_string(pad);
            l.act = activation_from_string(act);
        } else if (kind == "batchnorm") {
            l.kind = LayerKind::BatchNorm;
            ls >> l.bn_momentum >> l.bn_epsilon;
        } else if (kind == "maxpool") {
            l.kind = LayerKind::MaxPool2d;
        } else if (kind == "upsample") {
            l.kind = LayerKind::Upsample2d;
        } else if (kind == "dense") {
            std::string act;
            l.kind = LayerKind::Dense;
            ls >> l.units >> act;
            l.act = activation_from_string(act);
        } else if (kind == "dropout") {
            l.kind = LayerKind::Dropout;
            ls >> l.rate;
        } else if (kind == "flatten") {
            l.kind = LayerKind::Flatten;
        } else if (kind == "reshape") {
            l.kind = LayerKind::Reshape;
            std::size_t d;
            while (ls >> d) l.target_shape.push_back(d);
            if (ls.eof() && !l.target_shape.empty()) ls.clear();
        } else {
            throw ParseError("unknown layer kind '" + kind + "'");
        }
        if (ls.fail())
            throw ParseError("malformed spec line: " + line);
        spec.layers.push_back(std::move(l));
    }
    if (!saw_input) throw ParseError("spec text missing input line");
    infer_shapes(spec);  // validate composition
    return spec;
}

ModelWeights init_weights(const NetworkSpec& spec, std::uint64_t seed) {
    auto shapes = infer_shapes(spec);
    std::mt19937_64 rng(seed);
    ModelWeights w;
    w.layers.resize(spec.layers.size());
    w.frozen.assign(spec.layers.size(), 0);
    std::vector<std::size_t> cur = spec.input_shape;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        LayerWeights& lw = w.layers[i];
        if (l.kind == LayerKind::Conv2d) {
            const std::size_t cin = cur[2];
            const std::size_t fan_in = l.kernel_h * l.kernel_w * cin;
            const std::size_t fan_out =
                l.kernel_h * l.kernel_w * l.out_channels;
            const double limit = std::sqrt(6.0 / double(fan_in + fan_out));
            std::uniform_real_distribution<double> uni(-limit, limit);
            lw.weight = Tensor::zeros(
                {l.kernel_h, l.kernel_w, cin, l.out_channels});
            for (double& v : lw.weight.data) v = uni(rng);
            lw.bias = Tensor::zeros({l.out_channels});
        } else if (l.kind == LayerKind::Dense) {
            const std::size_t din = cur[0];
            const double limit = std::sqrt(6.0 / double(din + l.units));
            std::uniform_real_distribution<double> uni(-limit, limit);
            lw.weight = Tensor::zeros({din, l.units});
            for (double& v : lw.weight.data) v = uni(rng);
            lw.bias = Tensor::zeros({l.units});
        } else if (l.kind == LayerKind::BatchNorm) {
            const std::size_t c = cur.back();
            lw.weight = Tensor::full({c}, 1.0);  // gamma
            lw.bias = Tensor::zeros({c});        // beta
            lw.running_mean = Tensor::zeros({c});
            lw.running_var = Tensor::full({c}, 1.0);
        }
        cur = shapes[i];
    }
    return w;
}

std::size_t parameter_count(const ModelWeights& weights) {
    std::size_t n = 0;
    for (const LayerWeights& lw : weights.layers)
        n += lw.weight.size() + lw.bias.size();
    return n;
}

Tensor forward(const NetworkSpec& spec, ModelWeights& weights,
               const Tensor& batch, Mode mode, std::mt19937_64& rng,
               Tape* tape) {
    if (batch.rank() != spec.input_shape.size() + 1)
        throw ShapeError("forward batch rank mismatch");
    for (std::size_t i = 0; i < spec.input_shape.size(); ++i)
        if (batch.shape[i + 1] != spec.input_shape[i])
            throw ShapeError("forward batch shape " +
                             shape_to_string(batch.shape) +
                             " does not match spec input " +
                             shape_to_string(spec.input_shape));
    if (tape) {
        tape->mode = mode;
        tape->weights_revision = weights.revision;
        tape->layers.clear();
        tape->layers.resize(spec.layers.size());
    }
    Tensor cur = batch;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        LayerWeights& lw = weights.layers[i];
        LayerTape lt;
        if (tape) lt.input = cur;
        Tensor next;
        switch (l.kind) {
            case LayerKind::Conv2d: {
                Tensor pre = conv2d(cur, lw.weight, lw.bias, l.padding);
                next = activation(pre, l.act);
                if (tape) lt.pre_act = std::move(pre);
                break;
            }
            case LayerKind::BatchNorm: {
                const bool update =
                    mode == Mode::Train && !weights.frozen[i];
                BatchNormResult res = batchnorm(
                    cur, lw.weight, lw.bias, lw.running_mean, lw.running_var,
                    mode, l.bn_momentum, l.bn_epsilon, update);
                next = res.output;
                if (tape) lt.bn_cache = std::move(res);
                break;
            }
            case LayerKind::MaxPool2d: {
                MaxPoolResult res = maxpool2d(cur);
                next = std::move(res.output);
                if (tape) lt.pool_argmax = std::move(res.argmax);
                break;
            }
            case LayerKind::Upsample2d:
                next = upsample2d(cur);
                break;
            case LayerKind::Dense: {
                Tensor pre = dense(cur, lw.weight, lw.bias);
                next = activation(pre, l.act);
                if (tape) lt.pre_act = std::move(pre);
                break;
            }
            case LayerKind::Dropout: {
                DropoutResult res = dropout(cur, l.rate, mode, rng);
                next = std::move(res.output);
                if (tape) lt.dropout_mask = std::move(res.mask);
                break;
            }
            case LayerKind::Flatten: {
                std::size_t per_sample = cur.size() / cur.dim(0);
                next = cur.reshaped({cur.dim(0), per_sample});
                break;
            }
            case LayerKind::Reshape: {
                std::vector<std::size_t> s{cur.dim(0)};
                s.insert(s.end(), l.target_shape.begin(),
                         l.target_shape.end());
                next = cur.reshaped(std::move(s));
                break;
            }
        }
        if (tape) {
            lt.output = next;
            tape->layers[i] = std::move(lt);
        }
        cur = std::move(next);
    }
    if (tape) tape->output = cur;
    return cur;
}

Gradients backward(const NetworkSpec& spec, const ModelWeights& weights,
                   const Tape& tape, const Tensor& grad_output) {
    if (tape.layers.size() != spec.layers.size())
        throw ParamError("backward: tape does not match spec");
    if (tape.weights_revision != weights.revision)
        throw ParamError("backward: stale tape (weights changed since forward)");
    Gradients grads;
    grads.layers.resize(spec.layers.size());
    Tensor g = grad_output;
    for (std::size_t ri = spec.layers.size(); ri-- > 0;) {
        const LayerSpec& l = spec.layers[ri];
        const LayerTape& lt = tape.layers[ri];
        const LayerWeights& lw = weights.layers[ri];
        const bool frozen = weights.frozen[ri] != 0;
        switch (l.kind) {
            case LayerKind::Conv2d: {
                Tensor gpre =
                    activation_backward(g, lt.pre_act, lt.output, l.act);
                Conv2dGrads cg =
                    conv2d_backward(lt.input, lw.weight, gpre, l.padding);
                if (!frozen)
                    grads.layers[ri] = LayerGrads{std::move(cg.kernels),
                                                  std::move(cg.bias)};
                g = std::move(cg.input);
                break;
            }
            case LayerKind::BatchNorm: {
                BatchNormGrads bg =
                    batchnorm_backward(g, lt.bn_cache, lw.weight, tape.mode);
                if (!frozen)
                    grads.layers[ri] =
                        LayerGrads{std::move(bg.gamma), std::move(bg.beta)};
                g = std::move(bg.input);
                break;
            }
            case LayerKind::MaxPool2d:
                g = maxpool2d_backward(lt.pool_argmax, lt.input.shape, g);
                break;
            case LayerKind::Upsample2d:
                g = upsample2d_backward(g);
                break;
            case LayerKind::Dense: {
                Tensor gpre =
                    activation_backward(g, lt.pre_act, lt.output, l.act);
                DenseGrads dg = dense_backward(lt.input, lw.weight, gpre);
                if (!frozen)
                    grads.layers[ri] = LayerGrads{std::move(dg.weights),
                                                  std::move(dg.bias)};
                g = std::move(dg.input);
                break;
            }
            case LayerKind::Dropout:
                g = dropout_backward(g, lt.dropout_mask);
                break;
            case LayerKind::Flatten:
            case LayerKind::Reshape:
                g = g.reshaped(lt.input.shape);
                break;
        }
    }
    return grads;
}

LossKind loss_from_string(const std::string& s) {
    if (s == "categorical-crossentropy") return LossKind::CategoricalCrossentropy;
    if (s == "mse") return LossKind::Mse;
    throw ParseError("unknown loss '" + s + "'");
}

std::string loss_to_string(LossKind k) {
    return k == LossKind::Mse ? "mse" : "categorical-crossentropy";
}

namespace {

void check_one_hot(const Tensor& target) {
    const std::size_t c = target.shape.back();
    const std::size_t m = target.size() / c;
    for (std::size_t i = 0; i < m; ++i) {
        std::size_t ones = 0;
        for (std::size_t ci = 0; ci < c; ++ci) {
            const double v = target.data[i * c + ci];
            if (v == 1.0)
                ++ones;
            else if (v != 0.0)
                throw ParamError("crossentropy target row " +
                                 std::to_string(i) + " is not one-hot");
        }
        if (ones != 1)
            throw ParamError("crossentropy target row " + std::to_string(i) +
                             " is not one-hot");
    }
}

constexpr double kLogFloor = 1e-12;

}  // namespace

double loss_value(LossKind kind, const Tensor& predicted,
                  const Tensor& target) {
    if (!predicted.same_shape(target))
        throw ShapeError("loss: prediction/target shape mismatch");
    if (kind == LossKind::Mse) {
        double acc = 0.0;
        for (std::size_t i = 0; i < predicted.size(); ++i) {
            const double d = predicted.data[i] - target.data[i];
            acc += d * d;
        }
        return acc / double(predicted.size());
    }
    check_one_hot(target);
    const std::size_t c = predicted.shape.back();
    const std::size_t m = predicted.size() / c;
    double acc = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (target.data[i] == 1.0)
            acc -= std::log(std::max(predicted.data[i], kLogFloor));
    }
    return acc / double(m);
}

Tensor loss_grad(LossKind kind, const Tensor& predicted, const Tensor& target) {
    if (!predicted.same_shape(target))
        throw ShapeError("loss: prediction/target shape mismatch");
    Tensor g = Tensor::zeros(predicted.shape);
    if (kind == LossKind::Mse) {
        const double scale = 2.0 / double(predicted.size());
        for (std::size_t i = 0; i < predicted.size(); ++i)
            g.data[i] = scale * (predicted.data[i] - target.data[i]);
        return g;
    }
    check_one_hot(target);
    const std::size_t c = predicted.shape.back();
    const std::size_t m = predicted.size() / c;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        if (target.data[i] == 1.0) {
            const double p = std::max(predicted.data[i], kLogFloor);
            g.data[i] = -1.0 / (p * double(m));
        }
    }
    return g;
}

AdamState init_adam_state(const ModelWeights& weights) {
    AdamState state;
    state.m.resize(weights.layers.size());
    state.v.resize(weights.layers.size());
    for (std::size_t i = 0; i < weights.layers.size(); ++i) {
        const LayerWeights& lw = weights.layers[i];
        if (lw.has_params()) {
            state.m[i] = LayerGrads{Tensor::zeros(lw.weight.shape),
                                    Tensor::zeros(lw.bias.shape)};
            state.v[i] = LayerGrads{Tensor::zeros(lw.weight.shape),
                                    Tensor::zeros(lw.bias.shape)};
        }
    }
    return state;
}

namespace {

void adam_update(Tensor& param, const Tensor& grad, Tensor& m, Tensor& v,
                 double lr, double b1, double b2, double eps, double bc1,
                 double bc2) {
    for (std::size_t i = 0; i < param.size(); ++i) {
        m.data[i] = b1 * m.data[i] + (1.0 - b1) * grad.data[i];
        v.data[i] = b2 * v.data[i] + (1.0 - b2) * grad.data[i] * grad.data[i];
        const double mhat = m.data[i] / bc1;
        const double vhat = v.data[i] / bc2;
        param.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
    }
}

}  // namespace

void adam_step(ModelWeights& weights, const Gradients& grads, AdamState& state,
               const TrainConfig& config) {
    if (grads.layers.size() != weights.layers.size())
        throw ParamError("adam_step: gradient/weights layer count mismatch");
    state.timestep += 1;
    const double bc1 = 1.0 - std::pow(config.beta1, double(state.timestep));
    const double bc2 = 1.0 - std::pow(config.beta2, double(state.timestep));
    for (std::size_t i = 0; i < weights.layers.size(); ++i) {
        if (!grads.layers[i] || weights.frozen[i]) continue;
        LayerWeights& lw = weights.layers[i];
        const LayerGrads& lg = *grads.layers[i];
        LayerGrads& m = *state.m[i];
        LayerGrads& v = *state.v[i];
        adam_update(lw.weight, lg.weight, m.weight, v.weight,
                    config.learning_rate, config.beta1, config.beta2,
                    config.adam_epsilon, bc1, bc2);
        adam_update(lw.bias, lg.bias, m.bias, v.bias, config.learning_rate,
                    config.beta1, config.beta2, config.adam_epsilon, bc1, bc2);
    }
    weights.revision += 1;
}

namespace {

Tensor gather_rows(const Tensor& t, const std::vector<std::size_t>& idx) {
    const std::size_t per = t.size() / t.dim(0);
    std::vector<std::size_t> shape = t.shape;
    shape[0] = idx.size();
    Tensor out = Tensor::zeros(shape);
    for (std::size_t i = 0; i < idx.size(); ++i)
        std::copy(t.data.begin() + idx[i] * per,
                  t.data.begin() + (idx[i] + 1) * per,
                  out.data.begin() + i * per);
    return out;
}

}  // namespace

std::vector<double> train(const NetworkSpec& spec, ModelWeights& weights,
                          const Dataset& dataset, const TrainConfig& config,
                          const Dataset* validation) {
    if (dataset.inputs.size() == 0 || dataset.inputs.dim(0) == 0)
        throw ParamError("train: empty dataset");
    if (dataset.inputs.dim(0) != dataset.targets.dim(0))
        throw ShapeError("train: input/target row count mismatch");
    if (config.learning_rate < 0.0)
        throw ParamError("train: learning rate must be >= 0");
    if (config.max_epochs < 1) throw ParamError("train: max_epochs must be >= 1");

    const std::size_t n = dataset.inputs.dim(0);
    std::mt19937_64 rng(config.seed);
    AdamState state = init_adam_state(weights);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<double> history;
    double best_val = 0.0;
    std::size_t bad_epochs = 0;
    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t end = std::min(n, start + config.batch_size);
            std::vector<std::size_t> idx(order.begin() + start,
                                         order.begin() + end);
            Tensor bx = gather_rows(dataset.inputs, idx);
            Tensor by = gather_rows(dataset.targets, idx);
            Tape tape;
            Tensor out = forward(spec, weights, bx, Mode::Train, rng, &tape);
            epoch_loss += loss_value(config.loss, out, by) * double(idx.size());
            Tensor g = loss_grad(config.loss, out, by);
            Gradients grads = backward(spec, weights, tape, g);
            adam_step(weights, grads, state, config);
        }
        history.push_back(epoch_loss / double(n));
        if (validation && config.early_stop_patience > 0) {
            Tape unused;
            Tensor out = forward(spec, weights, validation->inputs, Mode::Eval,
                                 rng, nullptr);
            const double vl = loss_value(config.loss, out, validation->targets);
            if (history.size() == 1 || vl < best_val) {
                best_val = vl;
                bad_epochs = 0;
            } else if (++bad_epochs >= config.early_stop_patience) {
                break;
            }
        }
    }
    return history;
}

}  // namespace affect::nn
