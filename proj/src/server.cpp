#include "fedfs/server.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

#include "fedfs/errors.hpp"
#include "fedfs/parallel.hpp"
#include "fedfs/rng.hpp"

namespace fedfs {

namespace {

constexpr char kCheckpointMagic[4] = {'F', 'F', 'S', 'N'};
constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<double> flatten(const ModelParams& params) {
    std::vector<double> out;
    out.reserve(params.coord_count());
    for (const Layer& l : params.layers) {
        out.insert(out.end(), l.weight.data.begin(), l.weight.data.end());
        out.insert(out.end(), l.bias.begin(), l.bias.end());
    }
    return out;
}

struct ClientRoundResult {
    ModelParams params;
    double mean_loss = 0.0;
    double accuracy = 0.0;
    ClientStats stats;
};

}  // namespace

std::vector<std::size_t> select_clients(std::size_t num_clients, double fraction, std::uint64_t round_seed) {
    if (num_clients == 0) throw ConfigError("select_clients: no clients");
    if (!(fraction > 0.0) || fraction > 1.0) throw ConfigError("select_clients: fraction must be in (0, 1]");
    const std::size_t m =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(num_clients))));

    std::vector<std::size_t> ids(num_clients);
    std::iota(ids.begin(), ids.end(), 0);
    Rng rng(round_seed);
    rng.shuffle(ids);
    ids.resize(std::min(m, num_clients));
    std::sort(ids.begin(), ids.end());
    return ids;
}

ModelParams aggregate(const std::vector<WeightedParams>& updates) {
    if (updates.empty()) throw EmptyInputError("aggregate: no updates");
    std::size_t total = 0;
    for (const WeightedParams& u : updates) {
        if (!u.params->same_shape(*updates.front().params)) throw DimensionError("aggregate: spec mismatch");
        total += u.samples;
    }
    if (total == 0) throw ConfigError("aggregate: zero total samples");

    ModelParams out = *updates.front().params;
    const double w0 = static_cast<double>(updates.front().samples) / static_cast<double>(total);
    for (Layer& l : out.layers) {
        for (double& v : l.weight.data) v *= w0;
        for (double& v : l.bias) v *= w0;
    }
    for (std::size_t k = 1; k < updates.size(); ++k) {
        const double w = static_cast<double>(updates[k].samples) / static_cast<double>(total);
        add_scaled(out, *updates[k].params, w);
    }
    return out;
}

double beta_at(std::size_t round, const ServerConfig& config) {
    if (round < 1) throw ConfigError("beta_at: rounds start at 1");
    if (config.beta_period < 1) throw ConfigError("beta_at: beta_period must be >= 1");
    if (!(config.beta_decay > 0.0)) throw ConfigError("beta_at: beta_decay must be positive");
    const std::size_t k = (round - 1) / config.beta_period;
    // 1/0.1 is exactly 10, and beta0 / 10^k rounds correctly; powering 0.1
    // directly would miss the decimal values by an ulp.
    const double inv = 1.0 / config.beta_decay;
    return config.beta0 / std::pow(inv, static_cast<double>(k));
}

PrivacyRankResult privacy_rank_check(const std::vector<double>& alphas, std::size_t d) {
    const std::size_t n = alphas.size();
    if (n < 1 || d < 1) throw ConfigError("privacy_rank_check: need n >= 1 and d >= 1");
    bool any_nonzero = false;
    for (double a : alphas) any_nonzero = any_nonzero || a != 0.0;
    if (!any_nonzero) throw DegeneracyError("privacy_rank_check: all-zero weights");

    // M[r][k*d + c] = alphas[k] when r == c, else 0
    Tensor2 m(d, n * d);
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t r = 0; r < d; ++r) m(r, k * d + r) = alphas[k];
    }

    constexpr double kTol = 1e-10;
    std::size_t rank = 0;
    for (std::size_t col = 0; col < m.cols && rank < m.rows; ++col) {
        std::size_t pivot = rank;
        for (std::size_t r = rank + 1; r < m.rows; ++r) {
            if (std::abs(m(r, col)) > std::abs(m(pivot, col))) pivot = r;
        }
        if (std::abs(m(pivot, col)) <= kTol) continue;
        if (pivot != rank) {
            for (std::size_t j = 0; j < m.cols; ++j) std::swap(m(rank, j), m(pivot, j));
        }
        const double inv = 1.0 / m(rank, col);
        for (std::size_t r = rank + 1; r < m.rows; ++r) {
            const double factor = m(r, col) * inv;
            if (factor == 0.0) continue;
            for (std::size_t j = col; j < m.cols; ++j) m(r, j) -= factor * m(rank, j);
        }
        ++rank;
    }

    PrivacyRankResult result;
    result.rank = rank;
    result.kernel_dim = n * d - rank;
    result.unique = result.kernel_dim == 0;
    return result;
}

std::uint64_t spec_hash(const ModelSpec& spec) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    };
    mix(spec.layer_sizes.size());
    for (std::size_t s : spec.layer_sizes) mix(s);
    mix(static_cast<std::uint64_t>(spec.output));
    return h;
}

void write_checkpoint(const std::string& path, const ModelParams& global_params, const ModelParams* hidden) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    f.write(kCheckpointMagic, 4);
    const std::uint32_t version = kCheckpointVersion;
    f.write(reinterpret_cast<const char*>(&version), sizeof(version));
    const std::uint64_t hash = spec_hash(global_params.spec);
    f.write(reinterpret_cast<const char*>(&hash), sizeof(hash));

    auto write_model = [&f](const ModelParams* p) {
        const std::vector<double> coords = p ? flatten(*p) : std::vector<double>{};
        const std::uint64_t count = coords.size();
        f.write(reinterpret_cast<const char*>(&count), sizeof(count));
        f.write(reinterpret_cast<const char*>(coords.data()), static_cast<std::streamsize>(count * sizeof(double)));
    };
    write_model(&global_params);
    write_model(hidden);
    if (!f) throw IoError("write failed for " + path);
}

Checkpoint read_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kCheckpointMagic, 4) != 0) throw FormatError("bad checkpoint magic in " + path);
    Checkpoint cp;
    f.read(reinterpret_cast<char*>(&cp.version), sizeof(cp.version));
    f.read(reinterpret_cast<char*>(&cp.spec_hash), sizeof(cp.spec_hash));
    auto read_model = [&f, &path](std::vector<double>& out) {
        std::uint64_t count = 0;
        f.read(reinterpret_cast<char*>(&count), sizeof(count));
        out.resize(count);
        f.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(count * sizeof(double)));
        if (!f) throw IoError("truncated checkpoint: " + path);
    };
    read_model(cp.global_coords);
    read_model(cp.hidden_coords);
    return cp;
}

std::vector<RoundMetrics> run_training(const ServerConfig& config, const RunInputs& inputs,
                                       const RunOptions& options) {
    if (!inputs.train || !inputs.test || !inputs.plan) throw ConfigError("run_training: missing inputs");
    if (config.rounds < 1) throw ConfigError("run_training: rounds must be >= 1");
    if (inputs.plan->num_clients != config.num_clients) {
        throw ConfigError("run_training: partition plan does not match client count");
    }
    inputs.model_spec.validate();
    if (inputs.model_spec.input_dim() != inputs.train->dim()) {
        throw DimensionError("run_training: model input dim differs from dataset");
    }
    if (inputs.model_spec.output_dim() != static_cast<std::size_t>(inputs.train->num_classes)) {
        throw DimensionError("run_training: model output dim differs from class count");
    }

    std::vector<ClientShard> shards(config.num_clients);
    for (std::size_t c = 0; c < config.num_clients; ++c) {
        shards[c] = ClientShard{c, inputs.train, inputs.plan->client_indices(c)};
        if (shards[c].size() == 0) throw ConfigError("run_training: client " + std::to_string(c) + " has no data");
    }

    const std::uint64_t seed = config.seed;
    ModelParams global = init_model(inputs.model_spec, mix_seed(seed, seed_tag::init));
    std::optional<ModelParams> hidden;
    std::map<std::size_t, std::pair<ClientStats, std::size_t>> stats_table;  // latest upload per client

    auto train_round = [&](std::size_t round, const ModelParams& start, const Dataset* mimic, double beta,
                           const std::vector<std::size_t>& selected, std::vector<ClientRoundResult>& results) {
        results.resize(selected.size());
        parallel_for(selected.size(), options.threads, [&](std::size_t i) {
            const std::size_t id = selected[i];
            LocalTrainConfig cfg = inputs.local;
            cfg.beta = beta;
            cfg.seed = mix_seed(seed, seed_tag::client, round, id);
            LocalUpdateResult r;
            try {
                r = mimic ? local_update_rectified(start, shards[id], *mimic, cfg)
                          : local_update(start, shards[id], cfg);
            } catch (const NumericError& e) {
                throw NumericError("round " + std::to_string(round) + ", client " + std::to_string(id) + ": " +
                                   e.what());
            }
            ClientRoundResult& out = results[i];
            out.accuracy = evaluate(r.params, *inputs.test);
            out.params = std::move(r.params);
            out.mean_loss = r.mean_loss;
            out.stats = local_stats(shards[id]);
        });
        for (std::size_t i = 0; i < selected.size(); ++i) {
            stats_table[selected[i]] = {results[i].stats, shards[selected[i]].size()};
        }
    };

    // Round 1 is the bootstrap: plain local training in both modes; the
    // decoder and mimic data only exist from round 2 on.
    std::vector<RoundMetrics> metrics;
    metrics.reserve(config.rounds);
    std::vector<std::size_t> selected;
    std::vector<ClientRoundResult> results;
    for (std::size_t t = 1; t <= config.rounds; ++t) {
        std::optional<Dataset> mimic;
        RoundMetrics m;
        m.round = t;
        m.beta = beta_at(t, config);

        if (t > 1) {
            std::vector<WeightedParams> updates;
            updates.reserve(selected.size());
            for (std::size_t i = 0; i < selected.size(); ++i) {
                updates.push_back({&results[i].params, shards[selected[i]].size()});
            }
            global = aggregate(updates);
            if (!global.all_finite()) throw NumericError("round " + std::to_string(t) + ": non-finite global model");

            if (config.mode == Mode::fed_fsnet) {
                std::vector<std::pair<ClientStats, std::size_t>> stats;
                stats.reserve(stats_table.size());
                for (const auto& [id, entry] : stats_table) stats.push_back(entry);
                const GaussianMixture gm = build_mixture(stats, inputs.train->dim(), inputs.fsnet.uniform_pi);

                FsnetConfig fs = inputs.fsnet;
                fs.seed = mix_seed(seed, seed_tag::fsnet, t);
                HiddenTrainResult trained = train_hidden(global, fs, gm, hidden ? &*hidden : nullptr);
                hidden = std::move(trained.hidden);
                m.recon_initial = trained.initial_loss;
                m.recon_final = trained.final_loss;

                const ProbeMatrix probe = make_probe_matrix(inputs.model_spec.output_dim(), fs.c_diag, fs.eps);
                const MimicDataset synth =
                    synthesize(*hidden, probe, fs.synth_count, mix_seed(seed, seed_tag::synth, t));
                mimic = synth.to_dataset(inputs.train->num_classes);
            }
        }

        selected = select_clients(config.num_clients, config.fraction, mix_seed(seed, seed_tag::select, t));
        m.selected_ids = selected;
        train_round(t, global, mimic ? &*mimic : nullptr, m.beta, selected, results);

        m.acc_global = evaluate(global, *inputs.test);
        double acc_sum = 0.0;
        double loss_sum = 0.0;
        for (const ClientRoundResult& r : results) {
            acc_sum += r.accuracy;
            loss_sum += r.mean_loss;
        }
        m.acc_local = acc_sum / static_cast<double>(results.size());
        m.mean_train_loss = loss_sum / static_cast<double>(results.size());

        if (!options.checkpoint_dir.empty()) {
            char name[64];
            std::snprintf(name, sizeof(name), "/checkpoint_round_%03zu.bin", t);
            write_checkpoint(options.checkpoint_dir + name, global, hidden ? &*hidden : nullptr);
        }
        if (options.on_round) options.on_round(m);
        metrics.push_back(std::move(m));
    }
    return metrics;
}

}  // namespace fedfs
