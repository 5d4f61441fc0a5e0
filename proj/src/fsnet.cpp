#include "fedfs/fsnet.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "fedfs/errors.hpp"
#include "fedfs/rng.hpp"

namespace fedfs {

namespace {

constexpr std::uint64_t kInitTag = 0x1;
constexpr std::uint64_t kEvalTag = 0x2;
constexpr std::uint64_t kStepTag = 0x3;
constexpr std::size_t kEvalBatch = 256;

ModelSpec decoder_spec(const ModelParams& global_params, const FsnetConfig& config) {
    ModelSpec spec;
    spec.layer_sizes.push_back(global_params.spec.output_dim());
    for (std::size_t s : config.hidden_layer_sizes) spec.layer_sizes.push_back(s);
    spec.layer_sizes.push_back(global_params.spec.input_dim());
    spec.output = OutputActivation::sigmoid;
    spec.validate();
    return spec;
}

}  // namespace

void GaussianMixture::validate() const {
    if (components.empty()) throw ConfigError("mixture has no components");
    double sum = 0.0;
    for (const GaussianComponent& c : components) {
        if (c.pi < 0.0) throw ConfigError("mixture weight is negative");
        if (c.variance < 0.0) throw ConfigError("mixture variance is negative");
        sum += c.pi;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ConfigError("mixture weights do not sum to 1");
}

GaussianMixture build_mixture(const std::vector<std::pair<ClientStats, std::size_t>>& stats, std::size_t dim,
                              bool uniform_weights) {
    if (stats.empty()) throw ConfigError("build_mixture: no client stats");
    std::size_t total = 0;
    for (const auto& [s, n] : stats) {
        if (n < 1) throw ConfigError("build_mixture: client with no samples");
        total += n;
    }
    GaussianMixture gm;
    gm.dim = dim;
    gm.components.reserve(stats.size());
    for (const auto& [s, n] : stats) {
        const double pi = uniform_weights ? 1.0 / static_cast<double>(stats.size())
                                          : static_cast<double>(n) / static_cast<double>(total);
        gm.components.push_back({pi, s.mu, s.sigma});
    }
    gm.validate();
    return gm;
}

Tensor2 sample_mixture(const GaussianMixture& gm, std::size_t count, std::uint64_t seed) {
    if (count < 1) throw ConfigError("sample_mixture: count must be >= 1");
    gm.validate();
    Rng rng(seed);
    Tensor2 z(count, gm.dim);
    for (std::size_t i = 0; i < count; ++i) {
        const double u = rng.uniform();
        std::size_t pick = gm.components.size() - 1;
        double acc = 0.0;
        for (std::size_t k = 0; k < gm.components.size(); ++k) {
            acc += gm.components[k].pi;
            if (u <= acc) {
                pick = k;
                break;
            }
        }
        const GaussianComponent& comp = gm.components[pick];
        const double stddev = std::sqrt(comp.variance);
        double* row = z.row(i);
        for (std::size_t j = 0; j < gm.dim; ++j) {
            row[j] = std::clamp(comp.mu + stddev * rng.normal(), 0.0, 1.0);
        }
    }
    return z;
}

std::vector<double> ProbeMatrix::column(std::size_t i) const {
    std::vector<double> col(n, eps);
    col[i] = c_diag;
    return col;
}

ProbeMatrix make_probe_matrix(std::size_t n, double c_diag, double eps) {
    if (n < 2) throw ConfigError("make_probe_matrix: need at least 2 classes");
    if (c_diag <= 1.0 / static_cast<double>(n)) {
        throw DegeneracyError("make_probe_matrix: diagonal does not dominate its column");
    }
    if (c_diag < 0.9) throw DegeneracyError("make_probe_matrix: diagonal below the 0.9 floor");
    if (c_diag > 1.0) throw ConfigError("make_probe_matrix: diagonal above 1");
    const double derived = (1.0 - c_diag) / static_cast<double>(n - 1);
    if (eps != 0.0 && std::abs(c_diag + static_cast<double>(n - 1) * eps - 1.0) > 1e-9) {
        throw ConfigError("make_probe_matrix: eps inconsistent with c_diag");
    }
    return ProbeMatrix{n, c_diag, derived};
}

Dataset MimicDataset::to_dataset(int num_classes) const {
    Dataset ds;
    ds.features = features;
    ds.labels = intended_class;
    ds.num_classes = num_classes;
    ds.validate();
    return ds;
}

HiddenTrainResult train_hidden(const ModelParams& global_params, const FsnetConfig& config,
                               const GaussianMixture& gm, const ModelParams* warm_start) {
    if (gm.dim != global_params.spec.input_dim()) {
        throw DimensionError("train_hidden: mixture dim differs from global input dim");
    }
    const ModelSpec spec = decoder_spec(global_params, config);

    HiddenTrainResult result;
    if (warm_start) {
        if (warm_start->spec != spec) throw DimensionError("train_hidden: warm start has a different architecture");
        result.hidden = *warm_start;
    } else {
        result.hidden = init_model(spec, mix_seed(config.seed, kInitTag));
    }

    const Tensor2 eval_batch = sample_mixture(gm, kEvalBatch, mix_seed(config.seed, kEvalTag));
    result.initial_loss = l2_recon_loss_grad(result.hidden, global_params, eval_batch).loss;

    for (std::size_t step = 0; step < config.train_steps; ++step) {
        const Tensor2 z = sample_mixture(gm, config.sample_batch, mix_seed(config.seed, kStepTag, step));
        LossGrad lg = l2_recon_loss_grad(result.hidden, global_params, z);
        if (!std::isfinite(lg.loss)) throw NumericError("train_hidden: non-finite reconstruction loss");
        result.hidden = sgd_step(std::move(result.hidden), lg.grads, config.lr);
    }

    result.final_loss = l2_recon_loss_grad(result.hidden, global_params, eval_batch).loss;
    return result;
}

MimicDataset synthesize(const ModelParams& hidden, const ProbeMatrix& probe, std::size_t synth_count,
                        std::uint64_t seed) {
    if (probe.n != hidden.spec.input_dim()) throw DimensionError("synthesize: probe size differs from decoder input");
    if (synth_count < probe.n) throw ConfigError("synthesize: synth_count must cover every class");

    Rng rng(seed);
    Tensor2 probes(synth_count, probe.n);
    MimicDataset mimic;
    mimic.intended_class.resize(synth_count);
    const double jitter = 0.1 * probe.eps;
    for (std::size_t i = 0; i < synth_count; ++i) {
        const std::size_t cls = i % probe.n;
        mimic.intended_class[i] = static_cast<int>(cls);
        std::vector<double> col = probe.column(cls);
        double sum = 0.0;
        for (double& v : col) {
            v += rng.uniform(-jitter, jitter);
            sum += v;
        }
        double* row = probes.row(i);
        for (std::size_t j = 0; j < probe.n; ++j) row[j] = col[j] / sum;
    }

    mimic.features = forward(hidden, probes);
    for (double& v : mimic.features.data) v = std::clamp(v, 0.0, 1.0);
    return mimic;
}

void write_mimic(const MimicDataset& mimic, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    const std::uint64_t rows = mimic.features.rows;
    const std::uint64_t cols = mimic.features.cols;
    f.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    f.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    f.write(reinterpret_cast<const char*>(mimic.features.data.data()),
            static_cast<std::streamsize>(mimic.features.data.size() * sizeof(double)));
    if (!f) throw IoError("write failed for " + path);
}

}  // namespace fedfs
