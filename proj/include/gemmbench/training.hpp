#pragma once

// Feed-forward network whose every matrix product goes through a selected
// GEMM kernel, so one training step can be profiled product by product.

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gemmbench/device_sim.hpp"
#include "gemmbench/kernels.hpp"
#include "gemmbench/tensor.hpp"

namespace gemmbench {

struct ModelSpec {
    std::vector<std::size_t> layer_dims;

    std::size_t num_layers() const noexcept {
        return layer_dims.empty() ? 0 : layer_dims.size() - 1;
    }
    /// GEMMs in one forward+backward step: one forward and two backward per layer.
    std::size_t gemms_per_step() const noexcept { return 3 * num_layers(); }
    std::size_t parameter_count() const noexcept;
    std::string to_string() const;  // "784-256-128-16"

    friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

void validate_spec(const ModelSpec& spec);

/// Model1 [16,16], Model2 [16,16,16,16], Model3 [256,256], Model4 [784,256,128,16].
std::array<ModelSpec, 4> preset_models();

/// 1-based preset lookup; throws ArgumentError outside 1..4.
ModelSpec preset_model(int index);

/// Same depth with every width clamped to `cap`.
ModelSpec cap_width(const ModelSpec& spec, std::size_t cap);

struct DenseLayer {
    Matrix weights;           // in x out
    std::vector<float> bias;  // out
};

struct Gradients;

class Model {
public:
    /// Weights uniform in +-sqrt(6 / (in + out)), biases zero.
    static Model init(const ModelSpec& spec, Seed seed);

    explicit Model(std::vector<DenseLayer> layers);
    Model(const Model& other);
    Model& operator=(const Model& other);
    Model(Model&&) noexcept = default;
    Model& operator=(Model&&) noexcept = default;

    const ModelSpec& spec() const noexcept { return spec_; }
    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

    /// Identity of this parameter state; changes whenever parameters change.
    std::uint64_t id() const noexcept { return id_; }
    std::uint64_t generation() const noexcept { return generation_; }

    friend void sgd_step(Model& model, const Gradients& grads, float lr);

private:
    ModelSpec spec_;
    std::vector<DenseLayer> layers_;
    std::uint64_t id_;
    std::uint64_t generation_ = 0;
};

struct Batch {
    Matrix inputs;                    // B x d0
    std::vector<std::size_t> labels;  // B entries, each < d_last
};

void validate_batch(const ModelSpec& spec, const Batch& batch);

/// Inputs uniform in [-1, 1), labels uniform over the output classes.
Batch random_batch(const ModelSpec& spec, std::size_t batch_size, Seed seed);

/// Linearly separable data: sample i has label i % d_last and a large value
/// in input column (label % d0) on top of small noise.
Batch separable_batch(const ModelSpec& spec, std::size_t batch_size, Seed seed);

enum class ExecutionTarget { Host, Simulated };

struct Backend {
    KernelVariant variant = KernelVariant::tiled_vectorized(16);
    ExecutionTarget target = ExecutionTarget::Host;
    DeviceProfile device{};
};

struct GemmCall {
    std::string op;  // "fwd.L0", "bwd.dW.L1", "bwd.dX.L1", ...
    GemmDims dims;
    double seconds = 0.0;  // host kernel time; zero on the simulator
    MemCounters counters;  // simulator only
};

/// Routes every product of a training step through one backend and keeps a
/// log of the calls.
class GemmEngine {
public:
    explicit GemmEngine(Backend backend = {});

    Matrix multiply(const Matrix& a, const Matrix& b, std::string op);

    const Backend& backend() const noexcept { return backend_; }
    const std::vector<GemmCall>& calls() const noexcept { return calls_; }
    void clear() noexcept { calls_.clear(); }

private:
    Backend backend_;
    std::vector<GemmCall> calls_;
};

struct Activations {
    std::uint64_t model_id = 0;
    std::uint64_t generation = 0;
    std::vector<Matrix> layer_inputs;  // X_l fed to layer l
    std::vector<Matrix> pre_activations;  // Z_l = X_l W_l + b_l
    const Matrix& logits() const { return pre_activations.back(); }
};

/// Hidden layers apply ReLU; the last layer is linear.
Activations forward(const Model& model, const Matrix& inputs, GemmEngine& engine);

/// Mean softmax cross-entropy, evaluated in double precision.
double softmax_cross_entropy(const Matrix& logits, const std::vector<std::size_t>& labels);

/// d(loss)/d(logits) = (softmax(logits) - onehot(labels)) / B.
Matrix softmax_cross_entropy_grad(const Matrix& logits, const std::vector<std::size_t>& labels);

struct Gradients {
    std::vector<Matrix> weights;
    std::vector<std::vector<float>> bias;
    Matrix input{1, 1};  // d(loss)/d(inputs)
};

/// Reverse-mode pass. dW = X^T dZ and dX = dZ W^T are formed with explicit
/// transposes and multiplied on `engine`. Throws StateError when `acts` were
/// produced by a different model or parameter state.
Gradients backward(const Model& model, const Activations& acts,
                   const std::vector<std::size_t>& labels, GemmEngine& engine);

/// p <- p - lr * g for every parameter. lr must be >= 0.
void sgd_step(Model& model, const Gradients& grads, float lr);

struct GradCheckResult {
    ModelSpec spec;
    double max_rel_error = 0.0;
    std::string worst_parameter;  // e.g. "W1[3,7]"
    std::size_t checked = 0;
    std::size_t skipped_at_kink = 0;
};

/// Compares backward() against central differences of the loss computed in
/// double precision by an independent plain-loop forward pass. Per-element
/// error is |g - fd| / max(|g|, |fd|, 1e-6). Parameters whose +-epsilon
/// perturbations flip the sign of any hidden pre-activation straddle a ReLU
/// kink, where the loss is not differentiable; they are counted in
/// `skipped_at_kink` instead of being compared. `corrupt` scales every
/// analytic weight gradient by 1.5 (negative control for tests).
GradCheckResult gradient_check(const Model& model, const Batch& batch, GemmEngine& engine,
                               double epsilon = 1e-3, bool corrupt = false);

}  // namespace gemmbench
