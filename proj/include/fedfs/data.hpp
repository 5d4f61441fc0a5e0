#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedfs/tensor.hpp"

namespace fedfs {

struct Dataset {
    Tensor2 features;          // rows x d_in, values in [0, 1]
    std::vector<int> labels;
    int num_classes = 0;

    std::size_t size() const { return features.rows; }
    std::size_t dim() const { return features.cols; }
    void validate() const;
};

/// Reads an IDX image/label pair (big-endian, magic 0x00000803 / 0x00000801).
/// Pixel bytes are scaled by 1/255; images are flattened row-major. Files
/// ending in ".gz" are decompressed transparently.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

/// Inverse of load_idx for datasets whose features are exact multiples of
/// 1/255. img_rows/img_cols give the written image shape; 0,0 means 1 x d_in.
void write_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path,
               std::size_t img_rows = 0, std::size_t img_cols = 0);

/// Gaussian blobs: one isotropic cluster per class around a seeded random
/// center, clipped to [0, 1]. Samples are laid out class-major.
Dataset make_synthetic(int num_classes, std::size_t samples_per_class, std::size_t d_in, double cluster_spread,
                       std::uint64_t seed);

/// Half-open range [begin, end) into a PartitionPlan's order vector.
struct SampleRange {
    std::size_t begin = 0;
    std::size_t end = 0;
    std::size_t size() const { return end - begin; }
};

struct PartitionPlan {
    std::size_t num_clients = 0;
    std::size_t shards_per_client = 0;
    std::vector<std::size_t> order;                     // permutation of sample indices
    std::vector<std::vector<SampleRange>> assignments;  // per client, one range per shard

    std::vector<std::size_t> client_indices(std::size_t client) const;
    std::size_t client_size(std::size_t client) const;
};

/// Label-sorted extreme split: samples are stable-sorted by label, cut into
/// num_shards equal contiguous shards, the shards shuffled and dealt
/// num_shards / num_clients per client. Trailing samples that do not fill a
/// shard are dropped.
PartitionPlan partition_noniid(const Dataset& ds, std::size_t num_clients, std::size_t num_shards,
                               std::uint64_t seed);

/// Global shuffle followed by equal contiguous splits.
PartitionPlan partition_iid(const Dataset& ds, std::size_t num_clients, std::uint64_t seed);

}  // namespace fedfs
