#pragma once

#include <cstdint>
#include <vector>

#include "fedfs/tensor.hpp"

namespace fedfs {

/// Activation applied after the last layer. Hidden layers are always ReLU.
enum class OutputActivation { identity, sigmoid };

/// Architecture of a dense net: layer_sizes = {input dim, hidden dims..., output dim}.
struct ModelSpec {
    std::vector<std::size_t> layer_sizes;
    OutputActivation output = OutputActivation::identity;

    std::size_t input_dim() const { return layer_sizes.front(); }
    std::size_t output_dim() const { return layer_sizes.back(); }
    std::size_t num_layers() const { return layer_sizes.size() - 1; }

    /// Throws ConfigError unless there are >= 2 layer sizes, all >= 1.
    void validate() const;

    bool operator==(const ModelSpec&) const = default;
};

struct Layer {
    Tensor2 weight;             // in_dim x out_dim
    std::vector<double> bias;   // out_dim
};

struct ModelParams {
    ModelSpec spec;
    std::vector<Layer> layers;

    std::size_t coord_count() const;
    /// Flat coordinate view (weights row-major, then bias, layer by layer).
    /// Only meant for serialization and finite-difference probing; hot paths
    /// iterate the layer vectors directly.
    double coord(std::size_t flat_index) const;
    void set_coord(std::size_t flat_index, double value);

    bool same_shape(const ModelParams& o) const;
    bool all_finite() const;
    bool bit_equal(const ModelParams& o) const;
};

/// Weights uniform in [-a, a] with a = sqrt(6 / (fan_in + fan_out)), biases zero.
ModelParams init_model(const ModelSpec& spec, std::uint64_t seed);

/// Same shapes as `like`, every coordinate zero. Gradient accumulators start here.
ModelParams zeros_like(const ModelParams& like);

/// g += scale * other, coordinatewise. Shapes must match.
void add_scaled(ModelParams& g, const ModelParams& other, double scale);

struct LossGrad {
    double loss = 0.0;
    ModelParams grads;
};

/// Batch forward pass; returns the last layer's activations (logits for an
/// identity-output classifier). Deterministic, no dropout or noise.
Tensor2 forward(const ModelParams& params, const Tensor2& batch);

/// Row-wise softmax with max-subtraction, so large logits cannot overflow.
Tensor2 softmax(const Tensor2& logits);

/// Mean negative log-likelihood over the batch plus exact analytic gradients.
LossGrad ce_loss_grad(const ModelParams& params, const Tensor2& batch, const std::vector<int>& labels);

/// Mean KL(uniform || softmax(model(x))) over the batch. Zero exactly when
/// every prediction is uniform.
LossGrad kl_uniform_loss_grad(const ModelParams& params, const Tensor2& batch);

/// Mean per-sample L2 distance between hidden(softmax(global(z))) and z.
/// Gradients are taken w.r.t. the hidden params only; the global model is
/// treated as a fixed feature map.
LossGrad l2_recon_loss_grad(const ModelParams& hidden, const ModelParams& frozen_global, const Tensor2& z_batch);

/// One gradient step: every coordinate becomes p - lr * g. Throws NumericError
/// on non-finite gradients.
ModelParams sgd_step(ModelParams params, const ModelParams& grads, double lr);

}  // namespace fedfs
