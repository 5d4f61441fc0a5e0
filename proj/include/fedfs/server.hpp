#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedfs/client.hpp"
#include "fedfs/data.hpp"
#include "fedfs/fsnet.hpp"
#include "fedfs/metrics.hpp"
#include "fedfs/nn.hpp"

namespace fedfs {

enum class Mode { fedavg, fed_fsnet };

struct ServerConfig {
    std::size_t num_clients = 100;
    double fraction = 1.0;  // f in (0, 1]
    std::size_t rounds = 50;
    double beta0 = 1.0;
    double beta_decay = 0.1;
    std::size_t beta_period = 10;
    Mode mode = Mode::fedavg;
    std::uint64_t seed = 0;
};

/// max(1, round(f * K)) distinct ids, drawn from a seeded permutation and
/// returned sorted ascending.
std::vector<std::size_t> select_clients(std::size_t num_clients, double fraction, std::uint64_t round_seed);

struct WeightedParams {
    const ModelParams* params = nullptr;
    std::size_t samples = 0;
};

/// Coordinatewise mean weighted by sample counts, accumulated in input order.
/// Callers pass updates sorted by client id so reductions are reproducible.
ModelParams aggregate(const std::vector<WeightedParams>& updates);

/// beta0 * beta_decay^floor((t - 1) / beta_period) for round t >= 1. Computed
/// through the reciprocal so a decimal decay like 0.1 yields exact 0.1, 1e-4.
double beta_at(std::size_t round, const ServerConfig& config);

struct PrivacyRankResult {
    std::size_t rank = 0;
    std::size_t kernel_dim = 0;
    bool unique = false;
};

/// Materializes the d x (n*d) block matrix [a_1 I | a_2 I | ... | a_n I] of a
/// weighted model sum and row-reduces it: the sum identifies the individual
/// summands only when the kernel is trivial, i.e. for a single client.
PrivacyRankResult privacy_rank_check(const std::vector<double>& alphas, std::size_t d);

/// Everything a training run needs besides the server schedule.
struct RunInputs {
    const Dataset* train = nullptr;
    const Dataset* test = nullptr;
    const PartitionPlan* plan = nullptr;
    ModelSpec model_spec;
    LocalTrainConfig local;  // beta and seed fields are filled per round
    FsnetConfig fsnet;       // seed field is filled per round
};

struct RunOptions {
    std::size_t threads = 1;     // intra-round client parallelism; <= 1 sequential
    std::string checkpoint_dir;  // empty -> no checkpoints
    std::function<void(const RoundMetrics&)> on_round;
};

/// Orchestrates the rounds. Round 1 bootstraps with plain local training in
/// both modes; every later round runs aggregate -> (fed_fsnet only: fit
/// decoder, synthesize mimic data) -> select -> local training -> metrics.
/// acc_global is measured on the model the round offloaded. Returns one
/// RoundMetrics per round.
std::vector<RoundMetrics> run_training(const ServerConfig& config, const RunInputs& inputs,
                                       const RunOptions& options = {});

/// Stream ids for everything run_training seeds, exposed so oracle tests can
/// reproduce a run from the outside.
namespace seed_tag {
inline constexpr std::uint64_t init = 0xF1;
inline constexpr std::uint64_t select = 0xF2;
inline constexpr std::uint64_t client = 0xF3;
inline constexpr std::uint64_t fsnet = 0xF4;
inline constexpr std::uint64_t synth = 0xF5;
}  // namespace seed_tag

/// Round checkpoint: 16-byte header (magic "FFSN", u32 version, u64 spec hash)
/// followed by the flat coordinates of the global model and, when present, the
/// decoder (each prefixed by its u64 coordinate count).
void write_checkpoint(const std::string& path, const ModelParams& global_params, const ModelParams* hidden);

struct Checkpoint {
    std::uint32_t version = 0;
    std::uint64_t spec_hash = 0;
    std::vector<double> global_coords;
    std::vector<double> hidden_coords;
};

Checkpoint read_checkpoint(const std::string& path);

std::uint64_t spec_hash(const ModelSpec& spec);

}  // namespace fedfs
