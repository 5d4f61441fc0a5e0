#include "fedfs/client.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fedfs/errors.hpp"
#include "fedfs/rng.hpp"

namespace fedfs {

namespace {

void gather_batch(const ClientShard& shard, const std::vector<std::size_t>& positions, std::size_t begin,
                  std::size_t end, Tensor2& features, std::vector<int>& labels) {
    const std::size_t d = shard.data->dim();
    features = Tensor2(end - begin, d);
    labels.resize(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
        const std::size_t sample = shard.indices[positions[i]];
        std::copy_n(shard.data->features.row(sample), d, features.row(i - begin));
        labels[i - begin] = shard.data->labels[sample];
    }
}

LocalUpdateResult run_local(const ModelParams& global_params, const ClientShard& shard, const Dataset* mimic,
                            const LocalTrainConfig& config) {
    if (shard.size() == 0) throw EmptyInputError("local_update: empty shard");
    if (config.local_epochs < 1 || config.batch_size < 1) throw ConfigError("local_update: counts must be >= 1");
    if (mimic && mimic->size() == 0) throw EmptyInputError("local_update: empty mimic set");
    if (mimic && mimic->dim() != shard.data->dim()) {
        throw DimensionError("local_update: mimic feature dim differs from shard");
    }

    ModelParams params = global_params;
    Rng rng(config.seed);
    std::vector<std::size_t> positions(shard.size());
    std::iota(positions.begin(), positions.end(), 0);

    Tensor2 batch;
    std::vector<int> labels;
    double epoch_loss = 0.0;
    for (std::size_t epoch = 0; epoch < config.local_epochs; ++epoch) {
        rng.shuffle(positions);
        double loss_sum = 0.0;
        for (std::size_t begin = 0; begin < positions.size(); begin += config.batch_size) {
            const std::size_t end = std::min(begin + config.batch_size, positions.size());
            // canonical row order inside the batch; the shuffle only decides membership
            std::sort(positions.begin() + begin, positions.begin() + end);
            gather_batch(shard, positions, begin, end, batch, labels);

            LossGrad lg = ce_loss_grad(params, batch, labels);
            double step_loss = lg.loss;
            if (mimic && config.beta != 0.0) {
                const LossGrad kl = kl_uniform_loss_grad(params, mimic->features);
                add_scaled(lg.grads, kl.grads, config.beta);
                step_loss += config.beta * kl.loss;
            }
            if (!std::isfinite(step_loss)) throw NumericError("local_update: non-finite training loss");
            params = sgd_step(std::move(params), lg.grads, config.lr);
            loss_sum += step_loss * static_cast<double>(end - begin);
        }
        epoch_loss = loss_sum / static_cast<double>(shard.size());
    }
    return LocalUpdateResult{std::move(params), epoch_loss};
}

}  // namespace

LocalUpdateResult local_update(const ModelParams& global_params, const ClientShard& shard,
                               const LocalTrainConfig& config) {
    return run_local(global_params, shard, nullptr, config);
}

LocalUpdateResult local_update_rectified(const ModelParams& global_params, const ClientShard& shard,
                                         const Dataset& mimic, const LocalTrainConfig& config) {
    return run_local(global_params, shard, &mimic, config);
}

ClientStats local_stats(const ClientShard& shard) {
    if (shard.size() == 0) throw EmptyInputError("local_stats: empty shard");
    // Welford over every feature value the device holds
    double mean = 0.0;
    double m2 = 0.0;
    std::size_t count = 0;
    const std::size_t d = shard.data->dim();
    for (std::size_t idx : shard.indices) {
        const double* row = shard.data->features.row(idx);
        for (std::size_t j = 0; j < d; ++j) {
            ++count;
            const double delta = row[j] - mean;
            mean += delta / static_cast<double>(count);
            m2 += delta * (row[j] - mean);
        }
    }
    return ClientStats{mean, m2 / static_cast<double>(count)};
}

}  // namespace fedfs
