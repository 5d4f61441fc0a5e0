#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "fedfs/client.hpp"
#include "fedfs/data.hpp"
#include "fedfs/nn.hpp"

namespace fedfs {

struct GaussianComponent {
    double pi = 0.0;        // mixture weight
    double mu = 0.0;        // scalar mean, applied to every coordinate
    double variance = 0.0;  // scalar variance, isotropic
};

/// Cloud-side prior assembled from the uploaded per-device scalars.
struct GaussianMixture {
    std::vector<GaussianComponent> components;
    std::size_t dim = 0;

    void validate() const;  // weights sum to 1 +- 1e-12, all nonnegative
};

/// n near-one-hot probability columns: c_diag on the diagonal, eps elsewhere.
/// eps is always stored as (1 - c_diag) / (n - 1) so every column sums to 1.
struct ProbeMatrix {
    std::size_t n = 0;
    double c_diag = 0.0;
    double eps = 0.0;

    std::vector<double> column(std::size_t i) const;
};

/// Synthesized mimic samples plus the probe column each row was decoded from.
struct MimicDataset {
    Tensor2 features;                // rows x d_in, clipped to [0, 1]
    std::vector<int> intended_class;

    Dataset to_dataset(int num_classes) const;
};

struct FsnetConfig {
    std::vector<std::size_t> hidden_layer_sizes;  // decoder middle dims
    std::size_t train_steps = 2000;
    std::size_t sample_batch = 64;
    double lr = 0.05;
    std::size_t synth_count = 60;
    double c_diag = 0.91;
    double eps = 0.0;        // 0 -> derived from c_diag
    bool uniform_pi = false; // weight components equally instead of by N_k
    std::uint64_t seed = 0;
};

/// One component per client, weighted by sample count: pi_k = N_k / sum N_j,
/// or 1/K with uniform_weights.
GaussianMixture build_mixture(const std::vector<std::pair<ClientStats, std::size_t>>& stats, std::size_t dim,
                              bool uniform_weights = false);

/// count rows; each picks a component by weight, then draws every coordinate
/// from Normal(mu_k, variance_k) and clips to [0, 1].
Tensor2 sample_mixture(const GaussianMixture& gm, std::size_t count, std::uint64_t seed);

/// Throws DegeneracyError when the diagonal cannot dominate (c_diag <= 1/n or
/// below the 0.9 floor). A supplied eps must match (1 - c_diag)/(n - 1) within
/// 1e-9; the derived value is what gets stored.
ProbeMatrix make_probe_matrix(std::size_t n, double c_diag, double eps = 0.0);

struct HiddenTrainResult {
    ModelParams hidden;
    double initial_loss = 0.0;  // reconstruction loss on a held-out mixture batch
    double final_loss = 0.0;    // same batch, after training
};

/// Fits the decoder omega to invert softmax(global(z)) -> z over fresh mixture
/// batches. global_params are never touched. warm_start, when given, must have
/// the decoder architecture implied by the config; otherwise a seeded fresh
/// model is used.
HiddenTrainResult train_hidden(const ModelParams& global_params, const FsnetConfig& config,
                               const GaussianMixture& gm, const ModelParams* warm_start = nullptr);

/// Decodes probe columns into mimic rows, cycling through classes so counts
/// divisible by n are exactly class-balanced. Each row's probe column gets
/// seeded jitter of magnitude 0.1 * eps (then renormalized) so rows from the
/// same class differ.
MimicDataset synthesize(const ModelParams& hidden, const ProbeMatrix& probe, std::size_t synth_count,
                        std::uint64_t seed);

/// Flat binary dump: rows and cols as 64-bit counts, then row-major doubles.
void write_mimic(const MimicDataset& mimic, const std::string& path);

}  // namespace fedfs
