#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedfs/client.hpp"
#include "fedfs/data.hpp"
#include "fedfs/fsnet.hpp"
#include "fedfs/server.hpp"

namespace fedfs {

enum class DatasetKind { synthetic, idx };
enum class PartitionKind { iid, noniid };

/// Parsed form of the flat `section.key = value` experiment file.
struct ExperimentConfig {
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    bool write_checkpoints = true;

    DatasetKind dataset_kind = DatasetKind::synthetic;
    std::string train_images, train_labels, test_images, test_labels;  // idx paths
    int synth_classes = 10;
    std::size_t synth_train_per_class = 600;
    std::size_t synth_test_per_class = 200;
    std::size_t synth_dim = 64;
    double synth_spread = 0.25;

    std::vector<std::size_t> model_hidden;

    PartitionKind partition_kind = PartitionKind::noniid;
    std::size_t partition_shards = 0;  // 0 -> 2 * clients

    ServerConfig server;
    LocalTrainConfig local;
    FsnetConfig fsnet;
    bool fsnet_hidden_set = false;  // false -> mirror of model_hidden
};

/// One `key = value` per line, dotted section prefixes, '#' comments.
/// Unknown keys are rejected so typos cannot silently change an experiment.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

/// Materialized experiment: datasets, partition plan and the RunInputs view
/// over them.
struct LoadedExperiment {
    Dataset train;
    Dataset test;
    PartitionPlan plan;
    ExperimentConfig config;

    RunInputs inputs() const;
};

LoadedExperiment load_experiment(const ExperimentConfig& config);

/// FEDFS_THREADS caps intra-round client parallelism (0 = sequential); unset
/// falls back to the hardware thread count.
std::size_t resolve_thread_count();

}  // namespace fedfs
