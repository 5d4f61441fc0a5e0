#pragma once

#include <cstdint>
#include <vector>

#include "fedfs/data.hpp"
#include "fedfs/nn.hpp"

namespace fedfs {

/// One device's private slice of the train set. Holds indices, not copies.
struct ClientShard {
    std::size_t id = 0;
    const Dataset* data = nullptr;
    std::vector<std::size_t> indices;

    std::size_t size() const { return indices.size(); }
};

/// The two scalars a device uploads: mean and population variance over every
/// feature value it holds.
struct ClientStats {
    double mu = 0.0;
    double sigma = 0.0;
};

struct LocalTrainConfig {
    std::size_t local_epochs = 10;
    std::size_t batch_size = 60;
    double lr = 0.01;
    double beta = 0.0;  // weight of the uniform-KL term on mimic data
    std::uint64_t seed = 0;
};

struct LocalUpdateResult {
    ModelParams params;
    double mean_loss = 0.0;  // final epoch, sample-weighted
};

/// Mini-batch SGD on cross-entropy starting from a copy of global_params.
/// Batch membership is seeded per epoch; rows within a batch are gathered in
/// shard order so a full-shard batch reproduces the plain full-batch gradient.
LocalUpdateResult local_update(const ModelParams& global_params, const ClientShard& shard,
                               const LocalTrainConfig& config);

/// Same loop, but every step adds beta times the uniform-KL gradient over the
/// whole mimic set. With beta = 0 the output is bit-identical to local_update
/// under the same seed.
LocalUpdateResult local_update_rectified(const ModelParams& global_params, const ClientShard& shard,
                                         const Dataset& mimic, const LocalTrainConfig& config);

ClientStats local_stats(const ClientShard& shard);

}  // namespace fedfs
