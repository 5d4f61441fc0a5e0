#include "fedfs/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <string>

#include "fedfs/errors.hpp"
#include "fedfs/rng.hpp"

namespace fedfs {

namespace {

constexpr double kProbFloor = 1e-12;  // clip inside logs only

double clipped_log(double p) { return std::log(std::clamp(p, kProbFloor, 1.0)); }

/// Forward pass keeping every layer's post-activation output; acts[0] is the
/// input batch, acts[L] the final output.
struct ForwardCache {
    std::vector<Tensor2> acts;
};

void apply_hidden_relu(Tensor2& t) {
    for (double& v : t.data) v = v > 0.0 ? v : 0.0;
}

void apply_output(Tensor2& t, OutputActivation out) {
    if (out == OutputActivation::sigmoid) {
        for (double& v : t.data) v = 1.0 / (1.0 + std::exp(-v));
    }
}

ForwardCache forward_cached(const ModelParams& params, const Tensor2& batch) {
    if (batch.cols != params.spec.input_dim()) {
        throw DimensionError("forward: batch has " + std::to_string(batch.cols) + " columns, model expects " +
                             std::to_string(params.spec.input_dim()));
    }
    ForwardCache cache;
    cache.acts.reserve(params.layers.size() + 1);
    cache.acts.push_back(batch);
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        const Layer& layer = params.layers[l];
        Tensor2 z;
        matmul(cache.acts.back(), layer.weight, z);
        for (std::size_t i = 0; i < z.rows; ++i) {
            double* zi = z.row(i);
            for (std::size_t j = 0; j < z.cols; ++j) zi[j] += layer.bias[j];
        }
        if (l + 1 < params.layers.size()) {
            apply_hidden_relu(z);
        } else {
            apply_output(z, params.spec.output);
        }
        cache.acts.push_back(std::move(z));
    }
    return cache;
}

/// Backpropagates d_last (gradient w.r.t. the last layer's pre-activation) and
/// returns parameter gradients. `cache` must come from forward_cached on the
/// same params/batch.
ModelParams backward(const ModelParams& params, const ForwardCache& cache, Tensor2 d_last) {
    ModelParams grads = zeros_like(params);
    Tensor2 dz = std::move(d_last);
    for (std::size_t l = params.layers.size(); l-- > 0;) {
        const Tensor2& input = cache.acts[l];
        matmul_at_b(input, dz, grads.layers[l].weight);
        std::vector<double>& db = grads.layers[l].bias;
        for (std::size_t i = 0; i < dz.rows; ++i) {
            const double* di = dz.row(i);
            for (std::size_t j = 0; j < dz.cols; ++j) db[j] += di[j];
        }
        if (l == 0) break;
        Tensor2 dprev;
        matmul_a_bt(dz, params.layers[l].weight, dprev);
        const Tensor2& act = cache.acts[l];  // post-ReLU output of layer l-1
        for (std::size_t i = 0; i < dprev.data.size(); ++i) {
            if (act.data[i] <= 0.0) dprev.data[i] = 0.0;
        }
        dz = std::move(dprev);
    }
    return grads;
}

void require_nonempty(const Tensor2& batch) {
    if (batch.rows == 0) throw EmptyInputError("empty batch");
}

void require_logit_output(const ModelParams& params, const char* op) {
    if (params.spec.output != OutputActivation::identity) {
        throw ConfigError(std::string(op) + ": classifier losses need an identity output layer");
    }
}

}  // namespace

void ModelSpec::validate() const {
    if (layer_sizes.size() < 2) throw ConfigError("model spec needs at least input and output sizes");
    for (std::size_t s : layer_sizes) {
        if (s < 1) throw ConfigError("model spec has a zero-sized layer");
    }
}

std::size_t ModelParams::coord_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers) n += l.weight.data.size() + l.bias.size();
    return n;
}

double ModelParams::coord(std::size_t flat_index) const {
    for (const Layer& l : layers) {
        if (flat_index < l.weight.data.size()) return l.weight.data[flat_index];
        flat_index -= l.weight.data.size();
        if (flat_index < l.bias.size()) return l.bias[flat_index];
        flat_index -= l.bias.size();
    }
    throw DimensionError("coord index out of range");
}

void ModelParams::set_coord(std::size_t flat_index, double value) {
    for (Layer& l : layers) {
        if (flat_index < l.weight.data.size()) {
            l.weight.data[flat_index] = value;
            return;
        }
        flat_index -= l.weight.data.size();
        if (flat_index < l.bias.size()) {
            l.bias[flat_index] = value;
            return;
        }
        flat_index -= l.bias.size();
    }
    throw DimensionError("coord index out of range");
}

bool ModelParams::same_shape(const ModelParams& o) const {
    if (spec != o.spec || layers.size() != o.layers.size()) return false;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        if (!layers[l].weight.same_shape(o.layers[l].weight)) return false;
        if (layers[l].bias.size() != o.layers[l].bias.size()) return false;
    }
    return true;
}

bool ModelParams::all_finite() const {
    for (const Layer& l : layers) {
        if (!l.weight.all_finite()) return false;
        for (double b : l.bias) {
            if (!std::isfinite(b)) return false;
        }
    }
    return true;
}

bool ModelParams::bit_equal(const ModelParams& o) const {
    if (!same_shape(o)) return false;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const auto& a = layers[l];
        const auto& b = o.layers[l];
        if (std::memcmp(a.weight.data.data(), b.weight.data.data(), a.weight.data.size() * sizeof(double)) != 0)
            return false;
        if (std::memcmp(a.bias.data(), b.bias.data(), a.bias.size() * sizeof(double)) != 0) return false;
    }
    return true;
}

ModelParams init_model(const ModelSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    ModelParams params;
    params.spec = spec;
    params.layers.resize(spec.num_layers());
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
        const std::size_t fan_in = spec.layer_sizes[l];
        const std::size_t fan_out = spec.layer_sizes[l + 1];
        const double a = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Layer& layer = params.layers[l];
        layer.weight = Tensor2(fan_in, fan_out);
        for (double& w : layer.weight.data) w = a * (2.0 * rng.uniform() - 1.0);
        layer.bias.assign(fan_out, 0.0);
    }
    return params;
}

ModelParams zeros_like(const ModelParams& like) {
    ModelParams z;
    z.spec = like.spec;
    z.layers.resize(like.layers.size());
    for (std::size_t l = 0; l < like.layers.size(); ++l) {
        z.layers[l].weight = Tensor2(like.layers[l].weight.rows, like.layers[l].weight.cols);
        z.layers[l].bias.assign(like.layers[l].bias.size(), 0.0);
    }
    return z;
}

void add_scaled(ModelParams& g, const ModelParams& other, double scale) {
    if (!g.same_shape(other)) throw DimensionError("add_scaled: shape mismatch");
    for (std::size_t l = 0; l < g.layers.size(); ++l) {
        double* __restrict__ w = g.layers[l].weight.data.data();
        const double* __restrict__ ow = other.layers[l].weight.data.data();
        const std::size_t wn = g.layers[l].weight.data.size();
        for (std::size_t i = 0; i < wn; ++i) w[i] += scale * ow[i];
        double* __restrict__ b = g.layers[l].bias.data();
        const double* __restrict__ ob = other.layers[l].bias.data();
        const std::size_t bn = g.layers[l].bias.size();
        for (std::size_t i = 0; i < bn; ++i) b[i] += scale * ob[i];
    }
}

Tensor2 forward(const ModelParams& params, const Tensor2& batch) {
    ForwardCache cache = forward_cached(params, batch);
    return std::move(cache.acts.back());
}

Tensor2 softmax(const Tensor2& logits) {
    Tensor2 out(logits.rows, logits.cols);
    for (std::size_t i = 0; i < logits.rows; ++i) {
        const double* zi = logits.row(i);
        double* pi = out.row(i);
        double mx = zi[0];
        for (std::size_t j = 1; j < logits.cols; ++j) mx = std::max(mx, zi[j]);
        double sum = 0.0;
        for (std::size_t j = 0; j < logits.cols; ++j) {
            pi[j] = std::exp(zi[j] - mx);
            sum += pi[j];
        }
        const double inv = 1.0 / sum;
        for (std::size_t j = 0; j < logits.cols; ++j) pi[j] *= inv;
    }
    return out;
}

LossGrad ce_loss_grad(const ModelParams& params, const Tensor2& batch, const std::vector<int>& labels) {
    require_nonempty(batch);
    require_logit_output(params, "ce_loss_grad");
    if (labels.size() != batch.rows) throw DimensionError("ce_loss_grad: label count differs from batch rows");
    const std::size_t n = params.spec.output_dim();
    for (int y : labels) {
        if (y < 0 || static_cast<std::size_t>(y) >= n) throw DimensionError("ce_loss_grad: label out of range");
    }

    ForwardCache cache = forward_cached(params, batch);
    Tensor2 probs = softmax(cache.acts.back());
    const double inv_batch = 1.0 / static_cast<double>(batch.rows);

    double loss = 0.0;
    Tensor2 dz(probs.rows, probs.cols);
    for (std::size_t i = 0; i < probs.rows; ++i) {
        const double* pi = probs.row(i);
        double* di = dz.row(i);
        const std::size_t y = static_cast<std::size_t>(labels[i]);
        loss -= clipped_log(pi[y]);
        for (std::size_t j = 0; j < probs.cols; ++j) di[j] = pi[j] * inv_batch;
        di[y] -= inv_batch;
    }
    return LossGrad{loss * inv_batch, backward(params, cache, std::move(dz))};
}

LossGrad kl_uniform_loss_grad(const ModelParams& params, const Tensor2& batch) {
    require_nonempty(batch);
    require_logit_output(params, "kl_uniform_loss_grad");
    ForwardCache cache = forward_cached(params, batch);
    Tensor2 probs = softmax(cache.acts.back());
    const std::size_t n = params.spec.output_dim();
    const double u = 1.0 / static_cast<double>(n);
    const double inv_batch = 1.0 / static_cast<double>(batch.rows);

    double loss = 0.0;
    Tensor2 dz(probs.rows, probs.cols);
    const double log_u = std::log(u);
    for (std::size_t i = 0; i < probs.rows; ++i) {
        const double* pi = probs.row(i);
        double* di = dz.row(i);
        for (std::size_t j = 0; j < n; ++j) {
            loss += u * (log_u - clipped_log(pi[j]));
            di[j] = (pi[j] - u) * inv_batch;
        }
    }
    return LossGrad{std::max(0.0, loss * inv_batch), backward(params, cache, std::move(dz))};
}

LossGrad l2_recon_loss_grad(const ModelParams& hidden, const ModelParams& frozen_global, const Tensor2& z_batch) {
    require_nonempty(z_batch);
    if (frozen_global.spec.output_dim() != hidden.spec.input_dim()) {
        throw DimensionError("l2_recon_loss_grad: global output dim differs from hidden input dim");
    }
    if (hidden.spec.output_dim() != z_batch.cols) {
        throw DimensionError("l2_recon_loss_grad: hidden output dim differs from z dim");
    }

    const Tensor2 probs = softmax(forward(frozen_global, z_batch));
    ForwardCache cache = forward_cached(hidden, probs);
    const Tensor2& recon = cache.acts.back();
    const double inv_batch = 1.0 / static_cast<double>(z_batch.rows);

    double loss = 0.0;
    Tensor2 d_recon(recon.rows, recon.cols);
    for (std::size_t i = 0; i < recon.rows; ++i) {
        const double* ri = recon.row(i);
        const double* zi = z_batch.row(i);
        double* di = d_recon.row(i);
        double sq = 0.0;
        for (std::size_t j = 0; j < recon.cols; ++j) {
            const double diff = ri[j] - zi[j];
            sq += diff * diff;
        }
        const double norm = std::sqrt(sq);
        loss += norm;
        // d||r - z|| / dr = (r - z)/||r - z||; flat at the exact minimum
        const double scale = norm > kProbFloor ? inv_batch / norm : 0.0;
        for (std::size_t j = 0; j < recon.cols; ++j) di[j] = (ri[j] - zi[j]) * scale;
    }
    if (hidden.spec.output == OutputActivation::sigmoid) {
        for (std::size_t i = 0; i < d_recon.data.size(); ++i) {
            const double s = recon.data[i];
            d_recon.data[i] *= s * (1.0 - s);
        }
    }
    return LossGrad{loss * inv_batch, backward(hidden, cache, std::move(d_recon))};
}

ModelParams sgd_step(ModelParams params, const ModelParams& grads, double lr) {
    if (!params.same_shape(grads)) throw DimensionError("sgd_step: gradient shape mismatch");
    if (lr < 0.0) throw ConfigError("sgd_step: negative learning rate");
    if (!grads.all_finite()) throw NumericError("sgd_step: non-finite gradient");
    for (std::size_t l = 0; l < params.layers.size(); ++l) {
        double* __restrict__ w = params.layers[l].weight.data.data();
        const double* __restrict__ gw = grads.layers[l].weight.data.data();
        const std::size_t wn = params.layers[l].weight.data.size();
        for (std::size_t i = 0; i < wn; ++i) w[i] -= lr * gw[i];
        double* __restrict__ b = params.layers[l].bias.data();
        const double* __restrict__ gb = grads.layers[l].bias.data();
        const std::size_t bn = params.layers[l].bias.size();
        for (std::size_t i = 0; i < bn; ++i) b[i] -= lr * gb[i];
    }
    return params;
}

}  // namespace fedfs
