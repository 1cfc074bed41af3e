#include "doctest.h"

#include <cmath>

#include "gemmbench/errors.hpp"
#include "gemmbench/training.hpp"

using namespace gemmbench;

namespace {

Model constant_model(const ModelSpec& spec, float value) {
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        Matrix w(spec.layer_dims[l], spec.layer_dims[l + 1]);
        for (auto& v : w.data()) v = value;
        layers.push_back({std::move(w), std::vector<float>(spec.layer_dims[l + 1], value)});
    }
    return Model(std::move(layers));
}

}  // namespace

TEST_CASE("preset models") {
    const auto presets = preset_models();
    CHECK(presets[0].layer_dims == std::vector<std::size_t>{16, 16});
    CHECK(presets[1].layer_dims == std::vector<std::size_t>{16, 16, 16, 16});
    CHECK(presets[2].layer_dims == std::vector<std::size_t>{256, 256});
    CHECK(presets[3].layer_dims == std::vector<std::size_t>{784, 256, 128, 16});
    CHECK(presets[0].parameter_count() == 272);
    CHECK(preset_model(4) == presets[3]);
    CHECK_THROWS_AS(preset_model(5), ArgumentError);
    CHECK(cap_width(presets[3], 16).layer_dims == std::vector<std::size_t>{16, 16, 16, 16});
    CHECK(presets[0].gemms_per_step() == 3);
    CHECK(presets[1].gemms_per_step() == 9);
}

TEST_CASE("forward: uniform logits give loss ln(classes)") {
    const auto spec = preset_model(2);
    const auto model = constant_model(spec, 0.0f);
    const auto batch = random_batch(spec, 8, Seed{1});
    GemmEngine engine;
    const auto acts = forward(model, batch.inputs, engine);
    for (float v : acts.logits().data()) CHECK(v == 0.0f);
    CHECK(softmax_cross_entropy(acts.logits(), batch.labels) == doctest::Approx(std::log(16.0)));
}

TEST_CASE("forward: identity single layer is the identity map") {
    std::vector<DenseLayer> layers;
    layers.push_back({Matrix::identity(16), std::vector<float>(16, 0.0f)});
    const Model model(std::move(layers));
    const auto x = random_matrix(5, 16, Seed{3});
    GemmEngine engine;
    CHECK(forward(model, x, engine).logits() == x);
}

TEST_CASE("forward: Model4 activation shapes") {
    const auto spec = preset_model(4);
    const auto model = Model::init(spec, Seed{1});
    const auto batch = random_batch(spec, 32, Seed{2});
    GemmEngine engine;
    const auto acts = forward(model, batch.inputs, engine);
    REQUIRE(acts.pre_activations.size() == 3);
    CHECK(acts.pre_activations[0].rows() == 32);
    CHECK(acts.pre_activations[0].cols() == 256);
    CHECK(acts.pre_activations[1].cols() == 128);
    CHECK(acts.pre_activations[2].cols() == 16);
    CHECK_THROWS_AS(forward(model, Matrix(32, 100), engine), ShapeError);
}

TEST_CASE("loss gradient for one sample is softmax minus one-hot") {
    const Matrix logits(1, 3, {1.0f, 2.0f, 0.5f});
    const auto g = softmax_cross_entropy_grad(logits, {1});
    const double z = std::exp(1.0) + std::exp(2.0) + std::exp(0.5);
    CHECK(g(0, 0) == doctest::Approx(std::exp(1.0) / z));
    CHECK(g(0, 1) == doctest::Approx(std::exp(2.0) / z - 1.0));
    CHECK(g(0, 2) == doctest::Approx(std::exp(0.5) / z));
    CHECK(softmax_cross_entropy(logits, {1}) >= 0.0);
    CHECK_THROWS_AS(softmax_cross_entropy(logits, {3}), ShapeError);
}

TEST_CASE("GEMM count per step is 3 * layers") {
    for (int p = 1; p <= 4; ++p) {
        const auto spec = preset_model(p);
        const auto model = Model::init(spec, Seed{5});
        const auto batch = random_batch(spec, 32, Seed{6});
        GemmEngine engine;
        const auto acts = forward(model, batch.inputs, engine);
        backward(model, acts, batch.labels, engine);
        CHECK(engine.calls().size() == spec.gemms_per_step());
    }
}

TEST_CASE("finite-difference gradient check") {
    SUBCASE("Model1 random batch") {
        const auto spec = preset_model(1);
        const auto model = Model::init(spec, Seed{1});
        const auto batch = random_batch(spec, 32, Seed{2});
        GemmEngine engine;
        const auto r = gradient_check(model, batch, engine, 1e-3);
        CHECK(r.max_rel_error < 1e-3);
        CHECK(r.checked + r.skipped_at_kink == spec.parameter_count());
    }
    SUBCASE("all presets at capped width, B=4") {
        for (int p = 1; p <= 4; ++p) {
            const auto spec = cap_width(preset_model(p), 16);
            const auto model = Model::init(spec, Seed{42});
            const auto batch = random_batch(spec, 4, Seed{142});
            GemmEngine engine;
            CAPTURE(p);
            CHECK(gradient_check(model, batch, engine).max_rel_error < 1e-3);
        }
    }
    SUBCASE("simulated backend") {
        const auto spec = cap_width(preset_model(2), 16);
        GemmEngine engine({KernelVariant::tiled(8), ExecutionTarget::Simulated, {}});
        const auto r = gradient_check(Model::init(spec, Seed{9}), random_batch(spec, 4, Seed{10}), engine);
        CHECK(r.max_rel_error < 1e-3);
    }
    SUBCASE("corrupted gradients are caught") {
        const auto spec = preset_model(1);
        GemmEngine engine;
        const auto r = gradient_check(Model::init(spec, Seed{1}), random_batch(spec, 4, Seed{2}),
                                      engine, 1e-3, true);
        CHECK(r.max_rel_error > 0.1);
        CHECK(r.worst_parameter.rfind("W", 0) == 0);
    }
}

TEST_CASE("backend equivalence across variants and targets") {
    const auto spec = ModelSpec{{48, 32, 16}};
    const auto model = Model::init(spec, Seed{77});
    const auto batch = random_batch(spec, 20, Seed{78});
    GemmEngine ref_engine({KernelVariant::naive(), ExecutionTarget::Host, {}});
    const auto ref_acts = forward(model, batch.inputs, ref_engine);
    const auto ref_grads = backward(model, ref_acts, batch.labels, ref_engine);

    for (const auto& v : all_variants()) {
        for (auto target : {ExecutionTarget::Host, ExecutionTarget::Simulated}) {
            CAPTURE(v.name());
            GemmEngine engine({v, target, {}});
            const auto acts = forward(model, batch.inputs, engine);
            const auto grads = backward(model, acts, batch.labels, engine);
            CHECK(max_relative_error(acts.logits(), ref_acts.logits()) <= 1e-4);
            for (std::size_t l = 0; l < grads.weights.size(); ++l)
                CHECK(max_relative_error(grads.weights[l], ref_grads.weights[l]) <= 1e-4);
            CHECK(max_relative_error(grads.input, ref_grads.input) <= 1e-4);
        }
    }
}

TEST_CASE("stale activations are rejected") {
    const auto spec = preset_model(1);
    auto model = Model::init(spec, Seed{1});
    const auto batch = random_batch(spec, 4, Seed{2});
    GemmEngine engine;
    const auto acts = forward(model, batch.inputs, engine);
    const auto grads = backward(model, acts, batch.labels, engine);
    sgd_step(model, grads, 0.1f);
    CHECK_THROWS_AS(backward(model, acts, batch.labels, engine), StateError);

    const Model other = Model::init(spec, Seed{1});
    CHECK_THROWS_AS(backward(other, forward(model, batch.inputs, engine), batch.labels, engine),
                    StateError);
}

TEST_CASE("sgd_step") {
    const auto spec = preset_model(1);
    const auto batch = random_batch(spec, 8, Seed{4});
    GemmEngine engine;

    auto model = Model::init(spec, Seed{3});
    const auto before = model.layers();
    const auto grads = backward(model, forward(model, batch.inputs, engine), batch.labels, engine);
    sgd_step(model, grads, 0.0f);
    CHECK(model.layers()[0].weights == before[0].weights);
    CHECK(model.layers()[0].bias == before[0].bias);

    auto zero = constant_model(spec, 0.0f);
    sgd_step(zero, grads, 0.1f);
    for (std::size_t i = 0; i < grads.weights[0].size(); ++i)
        CHECK(zero.layers()[0].weights.data()[i] == -0.1f * grads.weights[0].data()[i]);

    CHECK_THROWS_AS(sgd_step(zero, grads, -1.0f), ArgumentError);
    Gradients wrong;
    CHECK_THROWS_AS(sgd_step(zero, wrong, 0.1f), ShapeError);
}

TEST_CASE("loss trace on separable data") {
    // Model1, seed 7, separable batch of 32 (seed 8), lr 0.05.
    const auto spec = preset_model(1);
    auto model = Model::init(spec, Seed{7});
    const auto batch = separable_batch(spec, 32, Seed{8});
    GemmEngine engine;
    std::vector<double> trace;
    for (int step = 0; step < 200; ++step) {
        const auto acts = forward(model, batch.inputs, engine);
        trace.push_back(softmax_cross_entropy(acts.logits(), batch.labels));
        sgd_step(model, backward(model, acts, batch.labels, engine), 0.05f);
    }
    for (std::size_t t = 0; t + 50 < trace.size(); ++t) CHECK(trace[t + 50] < trace[t]);

    // Regression fixture recorded from the first run.
    CHECK(trace[0] == doctest::Approx(2.82132516).epsilon(1e-6));
    CHECK(trace[50] == doctest::Approx(2.66483855).epsilon(1e-6));
    CHECK(trace[100] == doctest::Approx(2.51234441).epsilon(1e-6));
    CHECK(trace[150] == doctest::Approx(2.36421306).epsilon(1e-6));
    CHECK(trace[199] == doctest::Approx(2.22364886).epsilon(1e-6));
}
