#include "fedfs/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "fedfs/errors.hpp"
#include "fedfs/rng.hpp"

namespace fedfs {

namespace {

constexpr std::uint64_t kDataTag = 0xD1;
constexpr std::uint64_t kPartitionTag = 0xD2;

std::string trim(const std::string& s) {
    const std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::uint64_t to_count(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const std::uint64_t v = std::stoull(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: '" + key + "' expects a count, got '" + value + "'");
    }
}

double to_real(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: '" + key + "' expects a real, got '" + value + "'");
    }
}

bool to_bool(const std::string& key, const std::string& value) {
    if (value == "true") return true;
    if (value == "false") return false;
    throw ConfigError("config: '" + key + "' expects true or false, got '" + value + "'");
}

std::vector<std::size_t> to_count_list(const std::string& key, const std::string& value) {
    std::vector<std::size_t> out;
    if (trim(value).empty()) return out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_count(key, trim(item)));
    return out;
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (key == "seed") cfg.seed = to_count(key, value);
        else if (key == "output.dir") cfg.output_dir = value;
        else if (key == "output.checkpoints") cfg.write_checkpoints = to_bool(key, value);
        else if (key == "dataset.kind") {
            if (value == "synthetic") cfg.dataset_kind = DatasetKind::synthetic;
            else if (value == "idx") cfg.dataset_kind = DatasetKind::idx;
            else throw ConfigError("config: dataset.kind must be synthetic or idx");
        }
        else if (key == "dataset.train_images") cfg.train_images = value;
        else if (key == "dataset.train_labels") cfg.train_labels = value;
        else if (key == "dataset.test_images") cfg.test_images = value;
        else if (key == "dataset.test_labels") cfg.test_labels = value;
        else if (key == "dataset.classes") cfg.synth_classes = static_cast<int>(to_count(key, value));
        else if (key == "dataset.train_per_class") cfg.synth_train_per_class = to_count(key, value);
        else if (key == "dataset.test_per_class") cfg.synth_test_per_class = to_count(key, value);
        else if (key == "dataset.dim") cfg.synth_dim = to_count(key, value);
        else if (key == "dataset.spread") cfg.synth_spread = to_real(key, value);
        else if (key == "model.hidden") cfg.model_hidden = to_count_list(key, value);
        else if (key == "partition.kind") {
            if (value == "iid") cfg.partition_kind = PartitionKind::iid;
            else if (value == "noniid") cfg.partition_kind = PartitionKind::noniid;
            else throw ConfigError("config: partition.kind must be iid or noniid");
        }
        else if (key == "partition.shards") cfg.partition_shards = to_count(key, value);
        else if (key == "server.clients") cfg.server.num_clients = to_count(key, value);
        else if (key == "server.fraction") cfg.server.fraction = to_real(key, value);
        else if (key == "server.rounds") cfg.server.rounds = to_count(key, value);
        else if (key == "server.beta0") cfg.server.beta0 = to_real(key, value);
        else if (key == "server.beta_decay") cfg.server.beta_decay = to_real(key, value);
        else if (key == "server.beta_period") cfg.server.beta_period = to_count(key, value);
        else if (key == "server.mode") {
            if (value == "fedavg") cfg.server.mode = Mode::fedavg;
            else if (value == "fed_fsnet") cfg.server.mode = Mode::fed_fsnet;
            else throw ConfigError("config: server.mode must be fedavg or fed_fsnet");
        }
        else if (key == "local.epochs") cfg.local.local_epochs = to_count(key, value);
        else if (key == "local.batch") cfg.local.batch_size = to_count(key, value);
        else if (key == "local.lr") cfg.local.lr = to_real(key, value);
        else if (key == "fsnet.hidden") {
            cfg.fsnet.hidden_layer_sizes = to_count_list(key, value);
            cfg.fsnet_hidden_set = true;
        }
        else if (key == "fsnet.steps") cfg.fsnet.train_steps = to_count(key, value);
        else if (key == "fsnet.batch") cfg.fsnet.sample_batch = to_count(key, value);
        else if (key == "fsnet.lr") cfg.fsnet.lr = to_real(key, value);
        else if (key == "fsnet.synth") cfg.fsnet.synth_count = to_count(key, value);
        else if (key == "fsnet.c_diag") cfg.fsnet.c_diag = to_real(key, value);
        else if (key == "fsnet.uniform_pi") cfg.fsnet.uniform_pi = to_bool(key, value);
        else throw ConfigError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (!cfg.fsnet_hidden_set) {
        cfg.fsnet.hidden_layer_sizes.assign(cfg.model_hidden.rbegin(), cfg.model_hidden.rend());
    }
    cfg.server.seed = cfg.seed;
    return cfg;
}

ExperimentConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str());
}

RunInputs LoadedExperiment::inputs() const {
    RunInputs in;
    in.train = &train;
    in.test = &test;
    in.plan = &plan;
    in.model_spec.layer_sizes.push_back(train.dim());
    for (std::size_t h : config.model_hidden) in.model_spec.layer_sizes.push_back(h);
    in.model_spec.layer_sizes.push_back(static_cast<std::size_t>(train.num_classes));
    in.model_spec.output = OutputActivation::identity;
    in.local = config.local;
    in.fsnet = config.fsnet;
    return in;
}

LoadedExperiment load_experiment(const ExperimentConfig& config) {
    LoadedExperiment exp;
    exp.config = config;

    if (config.dataset_kind == DatasetKind::idx) {
        exp.train = load_idx(config.train_images, config.train_labels);
        exp.test = load_idx(config.test_images, config.test_labels);
        if (exp.train.dim() != exp.test.dim()) throw ConsistencyError("train and test feature dims differ");
        exp.test.num_classes = exp.train.num_classes = std::max(exp.train.num_classes, exp.test.num_classes);
    } else {
        // One generation pass so train and test share class centers; the first
        // train_per_class rows of each class block become training data.
        const std::size_t per = config.synth_train_per_class + config.synth_test_per_class;
        const Dataset all = make_synthetic(config.synth_classes, per, config.synth_dim, config.synth_spread,
                                           mix_seed(config.seed, kDataTag));
        auto take = [&](std::size_t offset, std::size_t count) {
            Dataset ds;
            ds.num_classes = config.synth_classes;
            ds.features = Tensor2(count * static_cast<std::size_t>(config.synth_classes), all.dim());
            ds.labels.reserve(ds.features.rows);
            std::size_t row = 0;
            for (int c = 0; c < config.synth_classes; ++c) {
                const std::size_t base = static_cast<std::size_t>(c) * per + offset;
                for (std::size_t s = 0; s < count; ++s, ++row) {
                    std::copy_n(all.features.row(base + s), all.dim(), ds.features.row(row));
                    ds.labels.push_back(c);
                }
            }
            return ds;
        };
        exp.train = take(0, config.synth_train_per_class);
        exp.test = take(config.synth_train_per_class, config.synth_test_per_class);
    }

    const std::uint64_t part_seed = mix_seed(config.seed, kPartitionTag);
    if (config.partition_kind == PartitionKind::noniid) {
        const std::size_t shards =
            config.partition_shards ? config.partition_shards : 2 * config.server.num_clients;
        exp.plan = partition_noniid(exp.train, config.server.num_clients, shards, part_seed);
    } else {
        exp.plan = partition_iid(exp.train, config.server.num_clients, part_seed);
    }
    return exp;
}

std::size_t resolve_thread_count() {
    const char* env = std::getenv("FEDFS_THREADS");
    if (!env) {
        const unsigned hw = std::thread::hardware_concurrency();
        return hw > 0 ? hw : 1;
    }
    try {
        const long v = std::stol(env);
        if (v < 0) throw ConfigError("FEDFS_THREADS must be >= 0");
        return v == 0 ? 1 : static_cast<std::size_t>(v);
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("FEDFS_THREADS is not a number");
    }
}

}  // namespace fedfs
