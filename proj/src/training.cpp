#include "gemmbench/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

#include "gemmbench/errors.hpp"

namespace gemmbench {

namespace {

std::uint64_t next_model_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

ModelSpec spec_of(const std::vector<DenseLayer>& layers) {
    if (layers.empty()) throw ShapeError("a model needs at least one layer");
    ModelSpec spec;
    spec.layer_dims.push_back(layers.front().weights.rows());
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& w = layers[l].weights;
        if (w.rows() != spec.layer_dims.back()) {
            throw ShapeError("layer " + std::to_string(l) + " expects " + std::to_string(w.rows()) +
                             " inputs but the previous layer produces " +
                             std::to_string(spec.layer_dims.back()));
        }
        if (layers[l].bias.size() != w.cols()) {
            throw ShapeError("layer " + std::to_string(l) + " bias has " +
                             std::to_string(layers[l].bias.size()) + " entries, expected " +
                             std::to_string(w.cols()));
        }
        if (!w.all_finite() || !std::all_of(layers[l].bias.begin(), layers[l].bias.end(),
                                            [](float v) { return std::isfinite(v); })) {
            throw ArgumentError("layer " + std::to_string(l) + " has non-finite parameters");
        }
        spec.layer_dims.push_back(w.cols());
    }
    return spec;
}

void add_bias(Matrix& z, const std::vector<float>& bias) {
    for (std::size_t i = 0; i < z.rows(); ++i)
        for (std::size_t j = 0; j < z.cols(); ++j) z(i, j) += bias[j];
}

Matrix relu(const Matrix& z) {
    Matrix out = z;
    for (auto& v : out.data()) v = std::max(v, 0.0f);
    return out;
}

void require_labels(const std::vector<std::size_t>& labels, std::size_t rows, std::size_t classes) {
    if (labels.size() != rows) {
        throw ShapeError("got " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(rows) + " samples");
    }
    for (auto label : labels) {
        if (label >= classes) {
            throw ShapeError("label " + std::to_string(label) + " out of range for " +
                             std::to_string(classes) + " classes");
        }
    }
}

// Independent double-precision forward pass for the finite-difference
// oracle. Parameters are laid out as W0, b0, W1, b1, ... flattened row-major.
struct FlatModel {
    std::vector<std::size_t> dims;
    std::vector<double> params;
    std::vector<std::size_t> w_offset;
    std::vector<std::size_t> b_offset;
};

FlatModel flatten(const Model& model) {
    FlatModel flat;
    flat.dims = model.spec().layer_dims;
    for (const auto& layer : model.layers()) {
        flat.w_offset.push_back(flat.params.size());
        for (float v : layer.weights.data()) flat.params.push_back(v);
        flat.b_offset.push_back(flat.params.size());
        for (float v : layer.bias) flat.params.push_back(v);
    }
    return flat;
}

// Loss plus the sign pattern of every hidden pre-activation; a pattern change
// between the two sides of a central difference means a ReLU kink was crossed.
double flat_loss(const FlatModel& m, const Batch& batch, std::vector<bool>* pattern = nullptr) {
    if (pattern) pattern->clear();
    const std::size_t rows = batch.inputs.rows();
    std::vector<double> x(batch.inputs.data().begin(), batch.inputs.data().end());
    const std::size_t layers = m.dims.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
        const std::size_t in = m.dims[l], out = m.dims[l + 1];
        std::vector<double> z(rows * out);
        for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < out; ++j) {
                double s = m.params[m.b_offset[l] + j];
                for (std::size_t i = 0; i < in; ++i) s += x[r * in + i] * m.params[m.w_offset[l] + i * out + j];
                const bool hidden = l + 1 < layers;
                if (hidden && pattern) pattern->push_back(s > 0.0);
                z[r * out + j] = hidden ? std::max(s, 0.0) : s;
            }
        }
        x = std::move(z);
    }
    const std::size_t classes = m.dims.back();
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        double mx = x[r * classes];
        for (std::size_t j = 1; j < classes; ++j) mx = std::max(mx, x[r * classes + j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < classes; ++j) sum += std::exp(x[r * classes + j] - mx);
        total += mx + std::log(sum) - x[r * classes + batch.labels[r]];
    }
    return total / static_cast<double>(rows);
}

}  // namespace

std::size_t ModelSpec::parameter_count() const noexcept {
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) n += layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1];
    return n;
}

std::string ModelSpec::to_string() const {
    std::string s;
    for (std::size_t i = 0; i < layer_dims.size(); ++i) {
        if (i) s += '-';
        s += std::to_string(layer_dims[i]);
    }
    return s;
}

void validate_spec(const ModelSpec& spec) {
    if (spec.layer_dims.size() < 2) throw ShapeError("a model spec needs at least two dims");
    for (auto d : spec.layer_dims) {
        if (d == 0) throw ShapeError("layer dims must be positive: " + spec.to_string());
    }
}

std::array<ModelSpec, 4> preset_models() {
    return {ModelSpec{{16, 16}}, ModelSpec{{16, 16, 16, 16}}, ModelSpec{{256, 256}},
            ModelSpec{{784, 256, 128, 16}}};
}

ModelSpec preset_model(int index) {
    if (index < 1 || index > 4) {
        throw ArgumentError("model preset must be 1..4, got " + std::to_string(index));
    }
    return preset_models()[static_cast<std::size_t>(index - 1)];
}

ModelSpec cap_width(const ModelSpec& spec, std::size_t cap) {
    ModelSpec out = spec;
    for (auto& d : out.layer_dims) d = std::min(d, cap);
    return out;
}

Model Model::init(const ModelSpec& spec, Seed seed) {
    validate_spec(spec);
    std::vector<DenseLayer> layers;
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        const std::size_t in = spec.layer_dims[l], out = spec.layer_dims[l + 1];
        const float limit = std::sqrt(6.0f / static_cast<float>(in + out));
        Matrix w = random_matrix(in, out, Seed{seed.value + l});
        for (auto& v : w.data()) v *= limit;
        layers.push_back({std::move(w), std::vector<float>(out, 0.0f)});
    }
    return Model(std::move(layers));
}

Model::Model(std::vector<DenseLayer> layers)
    : spec_(spec_of(layers)), layers_(std::move(layers)), id_(next_model_id()) {}

Model::Model(const Model& other)
    : spec_(other.spec_), layers_(other.layers_), id_(next_model_id()), generation_(0) {}

Model& Model::operator=(const Model& other) {
    if (this != &other) {
        spec_ = other.spec_;
        layers_ = other.layers_;
        id_ = next_model_id();
        generation_ = 0;
    }
    return *this;
}

void validate_batch(const ModelSpec& spec, const Batch& batch) {
    validate_spec(spec);
    if (batch.inputs.cols() != spec.layer_dims.front()) {
        throw ShapeError("batch inputs are " + batch.inputs.shape_string() + " but the model expects " +
                         std::to_string(spec.layer_dims.front()) + " features");
    }
    require_labels(batch.labels, batch.inputs.rows(), spec.layer_dims.back());
}

Batch random_batch(const ModelSpec& spec, std::size_t batch_size, Seed seed) {
    validate_spec(spec);
    Batch batch{random_matrix(batch_size, spec.layer_dims.front(), seed), {}};
    Xorshift64Star rng(Seed{seed.value ^ 0xA5A5A5A5A5A5A5A5ull});
    for (std::size_t i = 0; i < batch_size; ++i) {
        batch.labels.push_back(static_cast<std::size_t>(rng.next() % spec.layer_dims.back()));
    }
    return batch;
}

Batch separable_batch(const ModelSpec& spec, std::size_t batch_size, Seed seed) {
    validate_spec(spec);
    Matrix inputs = random_matrix(batch_size, spec.layer_dims.front(), seed);
    std::vector<std::size_t> labels;
    for (std::size_t i = 0; i < batch_size; ++i) {
        const std::size_t label = i % spec.layer_dims.back();
        for (std::size_t j = 0; j < inputs.cols(); ++j) inputs(i, j) *= 0.1f;
        inputs(i, label % inputs.cols()) += 1.0f;
        labels.push_back(label);
    }
    return {std::move(inputs), std::move(labels)};
}

GemmEngine::GemmEngine(Backend backend) : backend_(std::move(backend)) {}

Matrix GemmEngine::multiply(const Matrix& a, const Matrix& b, std::string op) {
    GemmCall call{std::move(op), {a.rows(), a.cols(), b.cols()}, 0.0, {}};
    if (backend_.target == ExecutionTarget::Simulated) {
        auto res = simulate_gemm(backend_.variant, a, b, backend_.device);
        call.counters = res.counters;
        calls_.push_back(std::move(call));
        return std::move(res.c);
    }
    auto res = host_gemm(backend_.variant, a, b);
    call.seconds = res.seconds;
    calls_.push_back(std::move(call));
    return std::move(res.c);
}

Activations forward(const Model& model, const Matrix& inputs, GemmEngine& engine) {
    if (inputs.cols() != model.spec().layer_dims.front()) {
        throw ShapeError("inputs are " + inputs.shape_string() + " but the model expects " +
                         std::to_string(model.spec().layer_dims.front()) + " features");
    }
    Activations acts;
    acts.model_id = model.id();
    acts.generation = model.generation();
    Matrix x = inputs;
    const auto& layers = model.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
        Matrix z = engine.multiply(x, layers[l].weights, "fwd.L" + std::to_string(l));
        add_bias(z, layers[l].bias);
        acts.layer_inputs.push_back(std::move(x));
        x = (l + 1 < layers.size()) ? relu(z) : z;
        acts.pre_activations.push_back(std::move(z));
    }
    return acts;
}

double softmax_cross_entropy(const Matrix& logits, const std::vector<std::size_t>& labels) {
    require_labels(labels, logits.rows(), logits.cols());
    double total = 0.0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        double mx = logits(r, 0);
        for (std::size_t j = 1; j < logits.cols(); ++j) mx = std::max(mx, static_cast<double>(logits(r, j)));
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols(); ++j) sum += std::exp(logits(r, j) - mx);
        total += mx + std::log(sum) - logits(r, labels[r]);
    }
    return total / static_cast<double>(logits.rows());
}

Matrix softmax_cross_entropy_grad(const Matrix& logits, const std::vector<std::size_t>& labels) {
    require_labels(labels, logits.rows(), logits.cols());
    Matrix g(logits.rows(), logits.cols());
    const double inv_batch = 1.0 / static_cast<double>(logits.rows());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        double mx = logits(r, 0);
        for (std::size_t j = 1; j < logits.cols(); ++j) mx = std::max(mx, static_cast<double>(logits(r, j)));
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols(); ++j) sum += std::exp(logits(r, j) - mx);
        for (std::size_t j = 0; j < logits.cols(); ++j) {
            const double p = std::exp(logits(r, j) - mx) / sum;
            g(r, j) = static_cast<float>((p - (j == labels[r] ? 1.0 : 0.0)) * inv_batch);
        }
    }
    return g;
}

Gradients backward(const Model& model, const Activations& acts,
                   const std::vector<std::size_t>& labels, GemmEngine& engine) {
    if (acts.model_id != model.id() || acts.generation != model.generation()) {
        throw StateError("activations belong to a different model state (model " +
                         std::to_string(acts.model_id) + " gen " + std::to_string(acts.generation) +
                         ", expected model " + std::to_string(model.id()) + " gen " +
                         std::to_string(model.generation()) + ")");
    }
    const auto& layers = model.layers();
    if (acts.layer_inputs.size() != layers.size() || acts.pre_activations.size() != layers.size()) {
        throw StateError("activations do not cover every layer");
    }

    Gradients grads;
    grads.weights.resize(layers.size(), Matrix(1, 1));
    grads.bias.resize(layers.size());

    Matrix dz = softmax_cross_entropy_grad(acts.pre_activations.back(), labels);
    for (std::size_t l = layers.size(); l-- > 0;) {
        const std::string tag = ".L" + std::to_string(l);
        grads.weights[l] = engine.multiply(transpose(acts.layer_inputs[l]), dz, "bwd.dW" + tag);

        auto& db = grads.bias[l];
        db.assign(dz.cols(), 0.0f);
        for (std::size_t r = 0; r < dz.rows(); ++r)
            for (std::size_t j = 0; j < dz.cols(); ++j) db[j] += dz(r, j);

        Matrix dx = engine.multiply(dz, transpose(layers[l].weights), "bwd.dX" + tag);
        if (l == 0) {
            grads.input = std::move(dx);
        } else {
            const Matrix& z_prev = acts.pre_activations[l - 1];
            for (std::size_t i = 0; i < dx.size(); ++i) {
                if (z_prev.data()[i] <= 0.0f) dx.data()[i] = 0.0f;
            }
            dz = std::move(dx);
        }
    }
    return grads;
}

void sgd_step(Model& model, const Gradients& grads, float lr) {
    if (!(lr >= 0.0f) || !std::isfinite(lr)) throw ArgumentError("learning rate must be finite and >= 0");
    auto& layers = model.layers_;
    if (grads.weights.size() != layers.size() || grads.bias.size() != layers.size()) {
        throw ShapeError("gradients cover " + std::to_string(grads.weights.size()) + " layers, model has " +
                         std::to_string(layers.size()));
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& gw = grads.weights[l];
        if (gw.rows() != layers[l].weights.rows() || gw.cols() != layers[l].weights.cols() ||
            grads.bias[l].size() != layers[l].bias.size()) {
            throw ShapeError("gradient shape mismatch at layer " + std::to_string(l));
        }
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
        auto w = layers[l].weights.data();
        const auto g = grads.weights[l].data();
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * g[i];
        for (std::size_t j = 0; j < layers[l].bias.size(); ++j) layers[l].bias[j] -= lr * grads.bias[l][j];
    }
    ++model.generation_;
}

GradCheckResult gradient_check(const Model& model, const Batch& batch, GemmEngine& engine,
                               double epsilon, bool corrupt) {
    validate_batch(model.spec(), batch);
    if (!(epsilon > 0.0)) throw ArgumentError("finite-difference step must be positive");

    const auto acts = forward(model, batch.inputs, engine);
    auto grads = backward(model, acts, batch.labels, engine);
    if (corrupt) {
        for (auto& gw : grads.weights)
            for (auto& v : gw.data()) v *= 1.5f;
    }

    FlatModel flat = flatten(model);
    GradCheckResult result{model.spec(), 0.0, "", 0, 0};
    std::vector<bool> up_pattern, down_pattern;
    const auto check = [&](std::size_t index, double analytic, const std::string& name) {
        const double saved = flat.params[index];
        flat.params[index] = saved + epsilon;
        const double up = flat_loss(flat, batch, &up_pattern);
        flat.params[index] = saved - epsilon;
        const double down = flat_loss(flat, batch, &down_pattern);
        flat.params[index] = saved;
        if (up_pattern != down_pattern) {
            ++result.skipped_at_kink;
            return;
        }
        ++result.checked;
        const double numeric = (up - down) / (2.0 * epsilon);
        const double err = std::abs(analytic - numeric) /
                           std::max({std::abs(analytic), std::abs(numeric), 1e-6});
        if (err > result.max_rel_error || result.worst_parameter.empty()) {
            result.max_rel_error = std::max(result.max_rel_error, err);
            result.worst_parameter = name;
        }
    };

    for (std::size_t l = 0; l < model.layers().size(); ++l) {
        const auto& gw = grads.weights[l];
        for (std::size_t i = 0; i < gw.rows(); ++i)
            for (std::size_t j = 0; j < gw.cols(); ++j)
                check(flat.w_offset[l] + i * gw.cols() + j, gw(i, j),
                      "W" + std::to_string(l) + "[" + std::to_string(i) + "," + std::to_string(j) + "]");
        for (std::size_t j = 0; j < grads.bias[l].size(); ++j)
            check(flat.b_offset[l] + j, grads.bias[l][j],
                  "b" + std::to_string(l) + "[" + std::to_string(j) + "]");
    }
    return result;
}

}  // namespace gemmbench
