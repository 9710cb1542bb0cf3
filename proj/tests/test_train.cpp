#include <doctest.h>

#include <cmath>

#include "dncnn/error.hpp"
#include "dncnn/train.hpp"
#include "oracle.hpp"

using namespace dncnn;
using oracle::random_tensor;

namespace {

// One conv layer with a single weight: the smallest model the optimizers act on.
Model<float> scalar_model(float w) {
    Model<float> m;
    m.spec = {2, 1, 1, false, true};
    Layer<float> l;
    l.conv.weights = Tensor({1, 1, 1, 1}, w);
    m.layers.push_back(l);
    return m;
}

Gradients<float> scalar_grad(float g) {
    Gradients<float> gr;
    gr.layers.push_back({Tensor({1, 1, 1, 1}, g), std::nullopt, std::nullopt, std::nullopt});
    return gr;
}

TrainConfig plain() {
    TrainConfig c;
    c.momentum = 0.0;
    c.weight_decay = 0.0;
    return c;
}

PatchDataset tiny_dataset(std::size_t count, std::uint64_t seed) {
    DatasetOptions o;
    o.sources = {std::string(DNCNN_TEST_DATA) + "/train"};
    o.count = count;
    o.patch = 16;
    o.seed = seed;
    return build_dataset(o);
}

}  // namespace

TEST_CASE("loss values and gradients") {
    const TensorD y({1, 1, 2, 2}, 0.5);
    const TensorD x({1, 1, 2, 2}, 0.25);
    const TensorD target = sub(y, x);
    const LossResult<double> zero = residual_loss(target, y, x, TargetMode::residual);
    CHECK(zero.loss == 0.0);
    for (double g : zero.grad.data()) CHECK(g == 0.0);
    const LossResult<double> ones = residual_loss(add(target, TensorD({1, 1, 2, 2}, 1.0)), y, x,
                                                  TargetMode::residual);
    CHECK(ones.loss == 2.0);
    for (double g : ones.grad.data()) CHECK(g == 1.0);
    CHECK(residual_loss(x, y, x, TargetMode::direct).loss == 0.0);

    SeededRng rng(3);
    const TensorD p1 = random_tensor<double>({1, 1, 3, 3}, rng);
    const TensorD y1 = random_tensor<double>({1, 1, 3, 3}, rng);
    const TensorD x1 = random_tensor<double>({1, 1, 3, 3}, rng);
    auto twice = [](const TensorD& t) {
        TensorD out({2, 1, 3, 3});
        for (std::size_t i = 0; i < t.size(); ++i) out[i] = out[i + t.size()] = t[i];
        return out;
    };
    CHECK(residual_loss(twice(p1), twice(y1), twice(x1), TargetMode::residual).loss ==
          doctest::Approx(residual_loss(p1, y1, x1, TargetMode::residual).loss).epsilon(1e-15));
}

TEST_CASE("loss gradient matches finite differences") {
    SeededRng rng(4);
    TensorD p = random_tensor<double>({3, 1, 4, 4}, rng);
    const TensorD y = random_tensor<double>(p.shape(), rng);
    const TensorD x = random_tensor<double>(p.shape(), rng);
    for (TargetMode mode : {TargetMode::residual, TargetMode::direct}) {
        const LossResult<double> r = residual_loss(p, y, x, mode);
        for (std::size_t i = 0; i < p.size(); ++i) {
            const double keep = p[i];
            p[i] = keep + 1e-4;
            const double up = residual_loss(p, y, x, mode).loss;
            p[i] = keep - 1e-4;
            const double down = residual_loss(p, y, x, mode).loss;
            p[i] = keep;
            CHECK((up - down) / 2e-4 == doctest::Approx(r.grad[i]).epsilon(1e-6));
        }
    }
}

TEST_CASE("SGD steps by hand") {
    Model<float> m = scalar_model(1.0f);
    OptimizerState st = make_optimizer_state(m);
    sgd_step(m, scalar_grad(0.0f), st, 0.1, plain());
    CHECK(m.layers[0].conv.weights[0] == 1.0f);
    sgd_step(m, scalar_grad(1.0f), st, 0.1, plain());
    CHECK(m.layers[0].conv.weights[0] == doctest::Approx(0.9f));

    Model<float> mm = scalar_model(1.0f);
    OptimizerState sm = make_optimizer_state(mm);
    TrainConfig c = plain();
    c.momentum = 0.9;
    sgd_step(mm, scalar_grad(1.0f), sm, 0.1, c);
    CHECK(sm.first.layers[0].weights[0] == doctest::Approx(1.0f));
    CHECK(mm.layers[0].conv.weights[0] == doctest::Approx(0.9f));
    sgd_step(mm, scalar_grad(1.0f), sm, 0.1, c);
    CHECK(sm.first.layers[0].weights[0] == doctest::Approx(1.9f));
    CHECK(mm.layers[0].conv.weights[0] == doctest::Approx(0.71f));
    CHECK(sm.step == 2);
}

TEST_CASE("weight decay reaches conv weights only") {
    SeededRng rng(5);
    Model<float> m = build_network<float>({3, 2, 1, true, true}, rng);
    for (float& b : *m.layers[0].conv.bias) b = 1.0f;
    m.layers[1].bn->beta = {1.0f, 1.0f};
    const Model<float> before = m;
    Gradients<float> zero;
    for (const Layer<float>& l : m.layers) {
        LayerGrads<float> g{Tensor(l.conv.weights.shape()), std::nullopt, std::nullopt, std::nullopt};
        if (l.conv.bias) g.bias = std::vector<float>(l.conv.bias->size(), 0.0f);
        if (l.bn) {
            g.gamma = std::vector<float>(l.bn->channels(), 0.0f);
            g.beta = g.gamma;
        }
        zero.layers.push_back(g);
    }
    OptimizerState st = make_optimizer_state(m);
    TrainConfig c = plain();
    c.weight_decay = 0.5;
    sgd_step(m, zero, st, 0.1, c);
    CHECK(m.layers[0].conv.weights[0] == doctest::Approx(before.layers[0].conv.weights[0] * 0.95f));
    CHECK(*m.layers[0].conv.bias == *before.layers[0].conv.bias);
    CHECK(m.layers[1].bn->gamma == before.layers[1].bn->gamma);
    CHECK(m.layers[1].bn->beta == before.layers[1].bn->beta);
    CHECK(m.revision == before.revision + 1);
}

TEST_CASE("first Adam step moves by lr against the gradient sign") {
    for (float g : {3.0f, -0.25f}) {
        Model<float> m = scalar_model(1.0f);
        OptimizerState st = make_optimizer_state(m);
        adam_step(m, scalar_grad(g), st, 0.01, plain());
        CHECK(m.layers[0].conv.weights[0] == doctest::Approx(1.0f - 0.01f * (g > 0 ? 1.0f : -1.0f)).epsilon(1e-5));
        CHECK(st.step == 1);
    }
    Model<float> m = scalar_model(1.0f);
    OptimizerState st = make_optimizer_state(m);
    adam_step(m, scalar_grad(0.0f), st, 0.01, plain());
    CHECK(m.layers[0].conv.weights[0] == 1.0f);
}

TEST_CASE("a small SGD step reduces the loss on a frozen batch") {
    SeededRng rng(6);
    Model<float> m = build_network<float>({2, 4, 1, false, true}, rng);
    const Tensor x = random_tensor<float>({4, 1, 8, 8}, rng, 0.0, 1.0);
    Tensor y = x;
    for (float& v : y.data()) v += float(rng.normal() * 0.1);
    auto loss_of = [&](const Model<float>& mod) {
        return residual_loss(forward(mod, y, Mode::train).out, y, x, TargetMode::residual).loss;
    };
    const double before = loss_of(m);
    const ForwardResult<float> f = forward(m, y, Mode::train);
    const Gradients<float> g = backward(m, f.tape, residual_loss(f.out, y, x, TargetMode::residual).grad);
    OptimizerState st = make_optimizer_state(m);
    sgd_step(m, g, st, 1e-3, plain());
    CHECK(loss_of(m) < before);
}

TEST_CASE("geometric learning-rate schedule") {
    TrainConfig c;
    CHECK(lr_at_epoch(0, c) == 0.1);
    CHECK(std::abs(lr_at_epoch(49, c) - 1e-4) <= 1e-12 * 1e-4);
    const double mid = std::sqrt(0.1 * 1e-4);
    CHECK(lr_at_epoch(24, c) > mid);
    CHECK(lr_at_epoch(25, c) < mid);
    for (int e = 1; e < 50; ++e) {
        CHECK(lr_at_epoch(e, c) < lr_at_epoch(e - 1, c));
        CHECK(lr_at_epoch(e, c) >= 1e-4);
    }
    CHECK_THROWS_AS(lr_at_epoch(50, c), RangeError);
    c.epochs = 1;
    CHECK(lr_at_epoch(0, c) == 0.1);
}

TEST_CASE("ablation variants") {
    const NetworkSpec base{9, 32, 1, true, true};
    const Variant a = make_variant(base, true, true);
    CHECK(a.target == TargetMode::residual);
    CHECK(a.spec.use_bn);
    const Variant d = make_variant(base, false, false);
    CHECK(d.target == TargetMode::direct);
    CHECK_FALSE(d.spec.use_bn);
    SeededRng rng(1);
    for (const Layer<float>& l : build_network<float>(d.spec, rng).layers) CHECK(l.conv.bias.has_value());
    for (bool rl : {true, false})
        for (bool bn : {true, false}) {
            CHECK(make_variant(base, rl, bn).spec.depth == 9);
            CHECK(make_variant(base, rl, bn).spec.hidden_channels == 32);
        }
    CHECK(variant_label(true, true) == "RL_BN");
    CHECK(variant_label(false, false) == "noRL_noBN");
}

TEST_CASE("config invariants") {
    TrainConfig c;
    c.epochs = 0;
    CHECK_THROWS_AS(c.validate(true), ConfigError);
    c = TrainConfig{};
    c.batch_size = 1;
    CHECK_THROWS_AS(c.validate(true), ConfigError);
    CHECK_NOTHROW(c.validate(false));
    c = TrainConfig{};
    c.lr_end = 0.0;
    CHECK_THROWS_AS(c.validate(true), ConfigError);
}

TEST_CASE("training loop bookkeeping and determinism") {
    const PatchDataset data = tiny_dataset(24, 3);
    ValidationSet val;
    val.images = {{"v", crop(load_image(std::string(DNCNN_TEST_DATA) + "/heldout/camera_0.pgm"), 0, 0, 24, 24)}};
    TrainConfig c;
    c.epochs = 1;
    c.batch_size = 8;
    c.deterministic = true;
    c.seed = 11;
    SeededRng rng(2);
    const Model<float> init = build_network<float>({3, 4, 1, true, true}, rng);
    const TrainResult one = train(init, data, val, c);
    REQUIRE(one.history.epochs.size() == 1);
    CHECK(one.history.epochs[0].lr == 0.1);
    CHECK(one.history.epochs[0].val_psnr.has_value());

    c.epochs = 3;
    c.optimizer = OptimizerKind::adam;
    c.lr_start = 1e-3;
    c.lr_end = 1e-4;
    c.eval_every = 2;
    const TrainResult a = train(init, data, val, c);
    const TrainResult b = train(init, data, val, c);
    CHECK(a.history.to_csv() == b.history.to_csv());
    CHECK(a.model.layers == b.model.layers);
    CHECK(a.history.epochs[1].val_psnr.has_value());
    CHECK_FALSE(a.history.epochs[0].val_psnr.has_value());
    CHECK(a.history.epochs[2].val_psnr.has_value());
    CHECK(a.history.to_csv().rfind("epoch,lr,train_loss,val_psnr\n0,", 0) == 0);

    c.seed = 12;
    CHECK_FALSE(train(init, data, val, c).history.to_csv() == a.history.to_csv());
}

TEST_CASE("a non-finite loss aborts with the step") {
    const PatchDataset data = tiny_dataset(8, 4);
    SeededRng rng(3);
    Model<float> m = build_network<float>({2, 2, 1, false, true}, rng);
    m.layers[0].conv.weights[0] = std::numeric_limits<float>::infinity();
    TrainConfig c;
    c.epochs = 1;
    c.batch_size = 4;
    try {
        train(m, data, {}, c);
        FAIL("expected divergence");
    } catch (const DivergedError& e) {
        CHECK(e.step() == 0);
    }
}

TEST_CASE("overfitting a frozen batch") {
    // Reduced form of the acceptance experiment: memorize 4 noisy patches.
    const PatchDataset data = tiny_dataset(4, 5);
    Batch batch = make_batch(data, {0, 1, 2, 3}, SeededRng(8), false);
    SeededRng rng(4);
    Model<float> m = build_network<float>({3, 8, 1, true, true}, rng);
    OptimizerState st = make_optimizer_state(m);
    TrainConfig c;
    c.weight_decay = 0.0;
    double first = 0.0, last = 0.0;
    for (int step = 0; step < 300; ++step) {
        ForwardResult<float> f = forward(m, batch.y, Mode::train);
        const LossResult<float> l = residual_loss(f.out, batch.y, batch.x, TargetMode::residual);
        if (step == 0) first = l.loss;
        last = l.loss;
        const Gradients<float> g = backward(f.updated, f.tape, l.grad);
        m = std::move(f.updated);
        adam_step(m, g, st, 1e-2, c);
    }
    CHECK(last < 0.1 * first);
}
