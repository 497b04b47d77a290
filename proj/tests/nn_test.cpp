#include <doctest.h>

#include <cmath>
#include <numeric>

#include "affect/errors.hpp"
#include "affect/nn.hpp"
#include "test_util.hpp"

using namespace affect;
using namespace affect::nn;
using testutil::fd_element;
using testutil::grad_close;
using testutil::random_tensor;

namespace {

LayerSpec dense_layer(const std::string& name, std::size_t units,
                      Activation act) {
    LayerSpec l;
    l.kind = LayerKind::Dense;
    l.name = name;
    l.units = units;
    l.act = act;
    return l;
}

NetworkSpec tiny_dense_net() {
    NetworkSpec spec;
    spec.input_shape = {3};
    spec.layers.push_back(dense_layer("fc1", 4, Activation::Tanh));
    spec.layers.push_back(dense_layer("fc2", 2, Activation::Linear));
    return spec;
}

}  // namespace

TEST_CASE("spec text serialization round-trips") {
    NetworkSpec spec;
    spec.input_shape = {8, 8, 1};
    LayerSpec conv;
    conv.kind = LayerKind::Conv2d;
    conv.name = "conv1";
    conv.kernel_h = conv.kernel_w = 3;
    conv.out_channels = 4;
    conv.padding = Padding::Same;
    conv.act = Activation::Relu;
    spec.layers.push_back(conv);
    LayerSpec bn;
    bn.kind = LayerKind::BatchNorm;
    bn.name = "bn1";
    spec.layers.push_back(bn);
    LayerSpec pool;
    pool.kind = LayerKind::MaxPool2d;
    pool.name = "pool1";
    spec.layers.push_back(pool);
    LayerSpec flat;
    flat.kind = LayerKind::Flatten;
    flat.name = "flat";
    spec.layers.push_back(flat);
    spec.layers.push_back(dense_layer("fc1", 5, Activation::Tanh));
    LayerSpec drop;
    drop.kind = LayerKind::Dropout;
    drop.name = "drop1";
    drop.rate = 0.5;
    spec.layers.push_back(drop);
    LayerSpec reshape;
    reshape.kind = LayerKind::Reshape;
    reshape.name = "back";
    reshape.target_shape = {5, 1, 1};
    spec.layers.push_back(reshape);
    LayerSpec up;
    up.kind = LayerKind::Upsample2d;
    up.name = "up1";
    spec.layers.push_back(up);

    const std::string text = spec_to_text(spec);
    NetworkSpec parsed = spec_from_text(text);
    CHECK(spec_to_text(parsed) == text);
    CHECK(parsed.layers.size() == spec.layers.size());
    CHECK(parsed.layers[0].out_channels == 4);
    CHECK(parsed.layers[6].target_shape == std::vector<std::size_t>{5, 1, 1});

    CHECK_THROWS_AS(spec_from_text("input 4 4 1\nwarp w1 3\n"), ParseError);
}

TEST_CASE("infer_shapes rejects non-composing stacks") {
    NetworkSpec spec;
    spec.input_shape = {5, 5, 1};
    spec.layers.push_back(dense_layer("fc", 3, Activation::Linear));
    CHECK_THROWS_AS(infer_shapes(spec), ShapeError);
}

TEST_CASE("eval-mode forward is deterministic and checks batch shape") {
    NetworkSpec spec = tiny_dense_net();
    ModelWeights weights = init_weights(spec, 42);
    std::mt19937_64 rng(0);
    Tensor batch = random_tensor({4, 3}, rng);
    std::mt19937_64 r1(1), r2(99);
    Tensor a = forward(spec, weights, batch, Mode::Eval, r1);
    Tensor b = forward(spec, weights, batch, Mode::Eval, r2);
    CHECK(a.data == b.data);
    CHECK_THROWS_AS(forward(spec, weights, Tensor::zeros({4, 2}), Mode::Eval,
                            r1),
                    ShapeError);
}

TEST_CASE("init_weights is seed-deterministic") {
    NetworkSpec spec = tiny_dense_net();
    ModelWeights a = init_weights(spec, 7);
    ModelWeights b = init_weights(spec, 7);
    ModelWeights c = init_weights(spec, 8);
    CHECK(a.layers[0].weight.data == b.layers[0].weight.data);
    CHECK(a.layers[0].weight.data != c.layers[0].weight.data);
}

TEST_CASE("loss values match closed forms") {
    Tensor onehot({1, 7}, {0, 0, 1, 0, 0, 0, 0});
    CHECK(loss_value(LossKind::CategoricalCrossentropy, onehot, onehot) ==
          doctest::Approx(0.0).epsilon(1e-9));

    Tensor uniform = Tensor::full({1, 7}, 1.0 / 7.0);
    CHECK(loss_value(LossKind::CategoricalCrossentropy, uniform, onehot) ==
          doctest::Approx(std::log(7.0)));

    CHECK(loss_value(LossKind::Mse, Tensor({1, 1}, {0}),
                     Tensor({1, 1}, {2})) == doctest::Approx(4.0));

    Tensor bad({1, 7}, {0, 0, 0.5, 0.5, 0, 0, 0});
    CHECK_THROWS_AS(
        loss_value(LossKind::CategoricalCrossentropy, uniform, bad),
        ParamError);
}

TEST_CASE("backward matches finite differences on a dense net with mse") {
    NetworkSpec spec = tiny_dense_net();
    ModelWeights weights = init_weights(spec, 5);
    std::mt19937_64 rng(6);
    Tensor batch = random_tensor({3, 3}, rng);
    Tensor target = random_tensor({3, 2}, rng);

    auto loss = [&] {
        std::mt19937_64 r(0);
        Tensor out = forward(spec, weights, batch, Mode::Eval, r);
        return loss_value(LossKind::Mse, out, target);
    };

    std::mt19937_64 r(0);
    Tape tape;
    Tensor out = forward(spec, weights, batch, Mode::Train, r, &tape);
    Gradients grads = backward(spec, weights, tape,
                               loss_grad(LossKind::Mse, out, target));
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        REQUIRE(grads.layers[li].has_value());
        Tensor& w = weights.layers[li].weight;
        for (std::size_t i = 0; i < w.size(); ++i)
            CHECK(grad_close(grads.layers[li]->weight.data[i],
                             fd_element(w, i, loss)));
        Tensor& b = weights.layers[li].bias;
        for (std::size_t i = 0; i < b.size(); ++i)
            CHECK(grad_close(grads.layers[li]->bias.data[i],
                             fd_element(b, i, loss)));
    }
}

TEST_CASE("gradients vanish at an exact mse minimum") {
    NetworkSpec spec;
    spec.input_shape = {2};
    spec.layers.push_back(dense_layer("fc", 2, Activation::Linear));
    ModelWeights weights = init_weights(spec, 3);
    std::mt19937_64 rng(4);
    Tensor batch = random_tensor({2, 2}, rng);
    Tape tape;
    Tensor out = forward(spec, weights, batch, Mode::Train, rng, &tape);
    Gradients grads =
        backward(spec, weights, tape, loss_grad(LossKind::Mse, out, out));
    for (double v : grads.layers[0]->weight.data) CHECK(v == 0.0);
    for (double v : grads.layers[0]->bias.data) CHECK(v == 0.0);
}

TEST_CASE("frozen layers produce no gradient entries") {
    NetworkSpec spec = tiny_dense_net();
    ModelWeights weights = init_weights(spec, 5);
    weights.frozen[0] = 1;
    std::mt19937_64 rng(1);
    Tensor batch = random_tensor({2, 3}, rng);
    Tape tape;
    Tensor out = forward(spec, weights, batch, Mode::Train, rng, &tape);
    Gradients grads = backward(
        spec, weights, tape,
        loss_grad(LossKind::Mse, out, Tensor::zeros(out.shape)));
    CHECK(!grads.layers[0].has_value());
    CHECK(grads.layers[1].has_value());
}

TEST_CASE("a tape from before an optimizer step is rejected") {
    NetworkSpec spec = tiny_dense_net();
    ModelWeights weights = init_weights(spec, 5);
    std::mt19937_64 rng(1);
    Tensor batch = random_tensor({2, 3}, rng);
    Tape tape;
    Tensor out = forward(spec, weights, batch, Mode::Train, rng, &tape);
    Tensor g = loss_grad(LossKind::Mse, out, Tensor::zeros(out.shape));
    Gradients grads = backward(spec, weights, tape, g);
    AdamState state = init_adam_state(weights);
    adam_step(weights, grads, state, TrainConfig{});
    CHECK_THROWS_AS(backward(spec, weights, tape, g), ParamError);
}

TEST_CASE("adam first-step magnitude is roughly the learning rate") {
    NetworkSpec spec;
    spec.input_shape = {1};
    spec.layers.push_back(dense_layer("fc", 1, Activation::Linear));
    ModelWeights weights = init_weights(spec, 2);
    const double before = weights.layers[0].weight.data[0];

    Gradients grads;
    grads.layers.resize(1);
    grads.layers[0] = LayerGrads{Tensor({1, 1}, {0.7}), Tensor({1}, {0.0})};
    AdamState state = init_adam_state(weights);
    TrainConfig config;
    config.learning_rate = 0.01;
    adam_step(weights, grads, state, config);
    const double step = before - weights.layers[0].weight.data[0];
    CHECK(step == doctest::Approx(0.01).epsilon(1e-4));
}

TEST_CASE("adam leaves parameters alone on zero gradients") {
    NetworkSpec spec = tiny_dense_net();
    ModelWeights weights = init_weights(spec, 2);
    ModelWeights before = weights;
    Gradients grads;
    grads.layers.resize(spec.layers.size());
    for (std::size_t i = 0; i < spec.layers.size(); ++i)
        grads.layers[i] =
            LayerGrads{Tensor::zeros(weights.layers[i].weight.shape),
                       Tensor::zeros(weights.layers[i].bias.shape)};
    AdamState state = init_adam_state(weights);
    adam_step(weights, grads, state, TrainConfig{});
    CHECK(state.timestep == 1);
    for (std::size_t i = 0; i < spec.layers.size(); ++i)
        CHECK(weights.layers[i].weight.data == before.layers[i].weight.data);
}

TEST_CASE("adam never touches frozen parameters") {
    NetworkSpec spec = tiny_dense_net();
    ModelWeights weights = init_weights(spec, 2);
    weights.frozen[0] = 1;
    ModelWeights before = weights;
    Gradients grads;
    grads.layers.resize(spec.layers.size());
    for (std::size_t i = 0; i < spec.layers.size(); ++i)
        grads.layers[i] =
            LayerGrads{Tensor::full(weights.layers[i].weight.shape, 1.0),
                       Tensor::full(weights.layers[i].bias.shape, 1.0)};
    AdamState state = init_adam_state(weights);
    adam_step(weights, grads, state, TrainConfig{});
    CHECK(weights.layers[0].weight.data == before.layers[0].weight.data);
    CHECK(weights.layers[1].weight.data != before.layers[1].weight.data);
}

TEST_CASE("training a 1-layer net on linear data reduces the loss") {
    NetworkSpec spec;
    spec.input_shape = {1};
    spec.layers.push_back(dense_layer("fc", 1, Activation::Linear));
    ModelWeights weights = init_weights(spec, 11);

    Tensor x = Tensor::zeros({10, 1});
    Tensor y = Tensor::zeros({10, 1});
    for (int i = 0; i < 10; ++i) {
        x.data[i] = i * 0.1;
        y.data[i] = 2.0 * x.data[i] + 0.3;
    }
    TrainConfig config;
    config.learning_rate = 0.05;
    config.batch_size = 5;
    config.max_epochs = 5;
    config.loss = LossKind::Mse;
    config.seed = 1;
    std::vector<double> losses = nn::train(spec, weights, {x, y}, config);
    REQUIRE(losses.size() == 5);
    for (std::size_t i = 1; i < losses.size(); ++i)
        CHECK(losses[i] < losses[i - 1]);
}

TEST_CASE("zero learning rate leaves weights and loss flat") {
    NetworkSpec spec = tiny_dense_net();
    ModelWeights weights = init_weights(spec, 11);
    ModelWeights before = weights;
    std::mt19937_64 rng(0);
    Tensor x = random_tensor({6, 3}, rng);
    Tensor y = random_tensor({6, 2}, rng);
    TrainConfig config;
    config.learning_rate = 0.0;
    config.batch_size = 3;
    config.max_epochs = 4;
    config.seed = 1;
    std::vector<double> losses = nn::train(spec, weights, {x, y}, config);
    for (std::size_t i = 0; i < spec.layers.size(); ++i)
        CHECK(weights.layers[i].weight.data == before.layers[i].weight.data);
    for (std::size_t i = 1; i < losses.size(); ++i)
        CHECK(losses[i] == doctest::Approx(losses[0]));
}

TEST_CASE("training is deterministic under a fixed seed") {
    std::mt19937_64 rng(9);
    Tensor x = random_tensor({8, 3}, rng);
    Tensor y = random_tensor({8, 2}, rng);
    TrainConfig config;
    config.learning_rate = 0.01;
    config.batch_size = 4;
    config.max_epochs = 6;
    config.seed = 21;

    NetworkSpec spec = tiny_dense_net();
    ModelWeights w1 = init_weights(spec, 3);
    ModelWeights w2 = init_weights(spec, 3);
    std::vector<double> l1 = nn::train(spec, w1, {x, y}, config);
    std::vector<double> l2 = nn::train(spec, w2, {x, y}, config);
    CHECK(l1 == l2);
    for (std::size_t i = 0; i < spec.layers.size(); ++i)
        CHECK(w1.layers[i].weight.data == w2.layers[i].weight.data);
}

TEST_CASE("training rejects an empty dataset") {
    NetworkSpec spec = tiny_dense_net();
    ModelWeights weights = init_weights(spec, 3);
    CHECK_THROWS_AS(
        nn::train(spec, weights, {Tensor(), Tensor()}, TrainConfig{}),
        ParamError);
}
