#include "affect/models.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace affect::models {

namespace {

nn::LayerSpec conv(const std::string& name, std::size_t k, std::size_t out,
                   Activation act) {
    nn::LayerSpec l;
    l.kind = nn::LayerKind::Conv2d;
    l.name = name;
    l.kernel_h = k;
    l.kernel_w = k;
    l.out_channels = out;
    l.padding = Padding::Same;
    l.act = act;
    return l;
}

nn::LayerSpec bn(const std::string& name) {
    nn::LayerSpec l;
    l.kind = nn::LayerKind::BatchNorm;
    l.name = name;
    return l;
}

nn::LayerSpec pool(const std::string& name) {
    nn::LayerSpec l;
    l.kind = nn::LayerKind::MaxPool2d;
    l.name = name;
    return l;
}

nn::LayerSpec upsample(const std::string& name) {
    nn::LayerSpec l;
    l.kind = nn::LayerKind::Upsample2d;
    l.name = name;
    return l;
}

nn::LayerSpec fc(const std::string& name, std::size_t units, Activation act) {
    nn::LayerSpec l;
    l.kind = nn::LayerKind::Dense;
    l.name = name;
    l.units = units;
    l.act = act;
    return l;
}

nn::LayerSpec dropout(const std::string& name, double rate) {
    nn::LayerSpec l;
    l.kind = nn::LayerKind::Dropout;
    l.name = name;
    l.rate = rate;
    return l;
}

nn::LayerSpec flatten(const std::string& name) {
    nn::LayerSpec l;
    l.kind = nn::LayerKind::Flatten;
    l.name = name;
    return l;
}

nn::LayerSpec reshape(const std::string& name,
                      std::vector<std::size_t> target) {
    nn::LayerSpec l;
    l.kind = nn::LayerKind::Reshape;
    l.name = name;
    l.target_shape = std::move(target);
    return l;
}

// Shared encoder conv stack: the two pools take input_hw down by 4x.
// block_dropout > 0 adds dropout after each conv block (CAE regularization).
void append_conv_stack(nn::NetworkSpec& spec,
                       const std::array<std::size_t, 3>& widths,
                       double block_dropout = 0.0) {
    spec.layers.push_back(conv("conv1", 3, widths[0], Activation::Relu));
    spec.layers.push_back(bn("bn1"));
    if (block_dropout > 0.0)
        spec.layers.push_back(dropout("drop_block1", block_dropout));
    spec.layers.push_back(conv("conv2", 3, widths[1], Activation::Tanh));
    spec.layers.push_back(pool("pool1"));
    spec.layers.push_back(bn("bn2"));
    if (block_dropout > 0.0)
        spec.layers.push_back(dropout("drop_block2", block_dropout));
    spec.layers.push_back(conv("conv3", 2, widths[2], Activation::Relu));
    spec.layers.push_back(pool("pool2"));
    if (block_dropout > 0.0)
        spec.layers.push_back(dropout("drop_block3", block_dropout));
}

}  // namespace

std::pair<nn::NetworkSpec, nn::ModelWeights> build_pretrain_cnn(
    std::uint64_t seed, const CnnOptions& options) {
    nn::NetworkSpec spec;
    spec.input_shape = {options.input_hw, options.input_hw, 1};
    append_conv_stack(spec, options.conv_widths);
    spec.layers.push_back(flatten("flatten"));
    spec.layers.push_back(fc("fc1", options.fc[0], Activation::Tanh));
    spec.layers.push_back(dropout("drop1", options.dropout));
    spec.layers.push_back(fc("fc2", options.fc[1], Activation::Relu));
    spec.layers.push_back(fc("fc3", options.fc[2], Activation::Tanh));
    spec.layers.push_back(fc("fc4", options.fc[3], Activation::Softmax));
    nn::ModelWeights weights = nn::init_weights(spec, seed);
    return {std::move(spec), std::move(weights)};
}

std::pair<nn::NetworkSpec, nn::ModelWeights> build_cae(
    std::size_t encoder_size, std::uint64_t seed, const CaeOptions& options) {
    if (encoder_size < 1) throw ParamError("encoder size must be >= 1");
    if (options.input_hw % 4 != 0)
        throw ParamError("CAE input size must be divisible by 4");
    const std::size_t map_hw = options.input_hw / 4;
    const std::size_t map_c = options.conv_widths[2];

    nn::NetworkSpec spec;
    spec.input_shape = {options.input_hw, options.input_hw, 1};
    append_conv_stack(spec, options.conv_widths, options.dropout);
    spec.layers.push_back(flatten("flatten"));
    spec.layers.push_back(fc(kEncoderLayerName, encoder_size,
                             Activation::Linear));
    if (options.dropout > 0.0)
        spec.layers.push_back(dropout("drop_enc_fc", options.dropout));
    spec.layers.push_back(fc("fc_bridge", map_hw * map_hw * map_c,
                             Activation::Relu));
    spec.layers.push_back(reshape("reshape_bridge", {map_hw, map_hw, map_c}));
    spec.layers.push_back(conv("dec_conv1", 2, options.conv_widths[2],
                               Activation::Relu));
    if (options.literal_pool_upsample) {
        spec.layers.push_back(pool("dec_pool"));
        spec.layers.push_back(upsample("dec_up0"));
    }
    spec.layers.push_back(upsample("dec_up1"));
    spec.layers.push_back(conv("dec_conv2", 3, options.conv_widths[1],
                               Activation::Tanh));
    spec.layers.push_back(upsample("dec_up2"));
    spec.layers.push_back(conv("dec_conv3", 3, options.conv_widths[0],
                               Activation::Relu));
    spec.layers.push_back(conv("dec_out", 3, 1, Activation::Linear));
    nn::ModelWeights weights = nn::init_weights(spec, seed);
    return {std::move(spec), std::move(weights)};
}

std::size_t encoder_layer_index(const nn::NetworkSpec& spec) {
    for (std::size_t i = 0; i < spec.layers.size(); ++i)
        if (spec.layers[i].name == kEncoderLayerName) return i;
    throw ParamError("spec has no encoder layer '" +
                     std::string(kEncoderLayerName) + "'");
}

namespace {

std::size_t find_layer(const nn::NetworkSpec& spec, const std::string& name) {
    for (std::size_t i = 0; i < spec.layers.size(); ++i)
        if (spec.layers[i].name == name) return i;
    throw TransferError("layer " + name + " missing");
}

}  // namespace

void transfer_weights(const nn::NetworkSpec& source_spec,
                      const nn::ModelWeights& source,
                      const nn::NetworkSpec& target_spec,
                      nn::ModelWeights& target) {
    for (const char* name : {"conv1", "bn1", "conv2", "bn2", "conv3"}) {
        const std::size_t si = find_layer(source_spec, name);
        const std::size_t ti = find_layer(target_spec, name);
        const nn::LayerWeights& sw = source.layers[si];
        nn::LayerWeights& tw = target.layers[ti];
        if (sw.weight.shape != tw.weight.shape ||
            sw.bias.shape != tw.bias.shape)
            throw TransferError("layer " + std::string(name) +
                                " shape mismatch: source " +
                                shape_to_string(sw.weight.shape) +
                                " vs target " +
                                shape_to_string(tw.weight.shape));
        tw.weight = sw.weight;
        tw.bias = sw.bias;
        if (sw.running_mean.size() > 0) {
            tw.running_mean = sw.running_mean;
            tw.running_var = sw.running_var;
        }
    }
}

void set_frozen(const nn::NetworkSpec& spec, nn::ModelWeights& weights,
                int n_frozen_convs, const FreezeOptions& options) {
    if (n_frozen_convs < 0 || n_frozen_convs > 3)
        throw ParamError("frozen conv count must be in 0..3");
    // reset encoder flags, then freeze the first n from the input side
    static const char* convs[3] = {"conv1", "conv2", "conv3"};
    static const char* bns[3] = {"bn1", "bn2", nullptr};
    for (int i = 0; i < 3; ++i) {
        const bool freeze = i < n_frozen_convs;
        weights.frozen[find_layer(spec, convs[i])] = freeze ? 1 : 0;
        if (bns[i] && options.freeze_bn_stats)
            weights.frozen[find_layer(spec, bns[i])] = freeze ? 1 : 0;
    }
}

EncodedFeatures encode(const nn::NetworkSpec& cae_spec,
                       nn::ModelWeights& cae_weights, const Tensor& frames,
                       std::vector<double> timestamps) {
    if (frames.rank() != 4)
        throw ShapeError("encode expects frames [N,H,W,1]");
    if (frames.dim(0) != timestamps.size())
        throw ParamError("encode: frame/timestamp count mismatch");
    const std::size_t enc_end = encoder_layer_index(cae_spec);
    nn::NetworkSpec encoder;
    encoder.input_shape = cae_spec.input_shape;
    encoder.layers.assign(cae_spec.layers.begin(),
                          cae_spec.layers.begin() + enc_end + 1);
    nn::ModelWeights enc_weights;
    enc_weights.layers.assign(cae_weights.layers.begin(),
                              cae_weights.layers.begin() + enc_end + 1);
    enc_weights.frozen.assign(enc_end + 1, 0);
    std::mt19937_64 rng(0);  // unused in eval mode
    Tensor out =
        nn::forward(encoder, enc_weights, frames, Mode::Eval, rng, nullptr);
    return {std::move(out), std::move(timestamps)};
}

void write_features_csv(const std::filesystem::path& path,
                        const EncodedFeatures& features) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw ParseError("cannot open " + path.string() + " for writing");
    const std::size_t n = features.features.dim(0);
    const std::size_t d = features.features.dim(1);
    os << "timestamp";
    for (std::size_t j = 0; j < d; ++j) os << ",f" << j;
    os << "\n";
    char buf[40];
    for (std::size_t i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof buf, "%.9g", features.timestamps[i]);
        os << buf;
        for (std::size_t j = 0; j < d; ++j) {
            std::snprintf(buf, sizeof buf, "%.9g",
                          features.features.data[i * d + j]);
            os << "," << buf;
        }
        os << "\n";
    }
}

EncodedFeatures read_features_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw ParseError("cannot open " + path.string());
    std::string line;
    if (!std::getline(is, line))
        throw ParseError(path.string() + ": missing header");
    std::size_t d = 0;
    for (char c : line)
        if (c == ',') ++d;
    std::vector<double> ts;
    std::vector<double> values;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(ls, cell, ',')) {
            const double v = std::stod(cell);
            if (col == 0)
                ts.push_back(v);
            else
                values.push_back(v);
            ++col;
        }
        if (col != d + 1)
            throw ParseError(path.string() + ": row with " +
                             std::to_string(col) + " columns, expected " +
                             std::to_string(d + 1));
    }
    Tensor f({ts.size(), d}, std::move(values));
    return {std::move(f), std::move(ts)};
}

}  // namespace affect::models
