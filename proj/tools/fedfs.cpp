#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedfs/config.hpp"
#include "fedfs/errors.hpp"
#include "fedfs/gradcheck.hpp"
#include "fedfs/metrics.hpp"
#include "fedfs/server.hpp"

namespace {

int cmd_run(const std::string& config_path) {
    const fedfs::ExperimentConfig cfg = fedfs::parse_config_file(config_path);
    const fedfs::LoadedExperiment exp = fedfs::load_experiment(cfg);

    std::filesystem::create_directories(cfg.output_dir);
    fedfs::RunOptions options;
    options.threads = fedfs::resolve_thread_count();
    if (cfg.write_checkpoints) options.checkpoint_dir = cfg.output_dir;
    options.on_round = [](const fedfs::RoundMetrics& m) {
        std::printf("round %zu: acc_global=%.4f acc_local=%.4f loss=%.4f beta=%g\n", m.round, m.acc_global,
                    m.acc_local, m.mean_train_loss, m.beta);
        std::fflush(stdout);
    };

    const std::vector<fedfs::RoundMetrics> metrics = fedfs::run_training(cfg.server, exp.inputs(), options);
    const std::string csv_path = cfg.output_dir + "/metrics.csv";
    fedfs::write_metrics_csv(metrics, csv_path);
    std::printf("wrote %s\n", csv_path.c_str());
    return 0;
}

int cmd_partition_report(const std::string& config_path) {
    const fedfs::ExperimentConfig cfg = fedfs::parse_config_file(config_path);
    const fedfs::LoadedExperiment exp = fedfs::load_experiment(cfg);
    for (std::size_t c = 0; c < exp.plan.num_clients; ++c) {
        std::vector<std::size_t> hist(exp.train.num_classes, 0);
        for (std::size_t idx : exp.plan.client_indices(c)) ++hist[exp.train.labels[idx]];
        std::printf("client %zu: n=%zu |", c, exp.plan.client_size(c));
        for (std::size_t y = 0; y < hist.size(); ++y) {
            if (hist[y]) std::printf(" %zu:%zu", y, hist[y]);
        }
        std::printf("\n");
    }
    return 0;
}

int cmd_privacy_check(std::size_t clients, std::size_t dim) {
    const std::vector<double> alphas(clients, clients ? 1.0 / static_cast<double>(clients) : 0.0);
    const fedfs::PrivacyRankResult r = fedfs::privacy_rank_check(alphas, dim);
    std::printf("rank=%zu kernel=%zu unique=%s\n", r.rank, r.kernel_dim, r.unique ? "true" : "false");
    return 0;
}

int cmd_gradcheck(std::size_t nets, std::size_t coords) {
    const fedfs::GradCheckSuiteReport report = fedfs::run_gradcheck_suite(nets, coords, 0x9dc5);
    std::printf("%s\n", report.summary().c_str());
    std::printf("gradcheck: %s\n", report.pass ? "PASS" : "FAIL");
    return report.pass ? 0 : 2;
}

int cmd_compare(const std::string& path_a, const std::string& path_b) {
    const std::vector<fedfs::RoundMetrics> a = fedfs::read_metrics_csv(path_a);
    const std::vector<fedfs::RoundMetrics> b = fedfs::read_metrics_csv(path_b);
    if (a.empty() || b.empty()) throw fedfs::FormatError("compare: a metrics file has no rounds");
    const fedfs::RoundMetrics& fa = a.back();
    const fedfs::RoundMetrics& fb = b.back();
    std::printf("a: round %zu acc_global=%.6f acc_local=%.6f loss=%.6f\n", fa.round, fa.acc_global, fa.acc_local,
                fa.mean_train_loss);
    std::printf("b: round %zu acc_global=%.6f acc_local=%.6f loss=%.6f\n", fb.round, fb.acc_global, fb.acc_local,
                fb.mean_train_loss);
    std::printf("delta acc_global=%.6f acc_local=%.6f loss=%.6f\n", fa.acc_global - fb.acc_global,
                fa.acc_local - fb.acc_local, fa.mean_train_loss - fb.mean_train_loss);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"deterministic federated learning simulator (FedAvg + fuzzy mimic-data synthesis)"};
    app.require_subcommand(1);

    std::string config_path;
    auto* run = app.add_subcommand("run", "execute a training run from a config file");
    run->add_option("config", config_path, "experiment config file")->required();

    std::string report_config;
    auto* report = app.add_subcommand("partition-report", "print per-client label histograms");
    report->add_option("config", report_config, "experiment config file")->required();

    std::size_t clients = 0, dim = 0;
    auto* privacy = app.add_subcommand("privacy-check", "rank/kernel analysis of the aggregation map");
    privacy->add_option("--clients", clients, "number of participating devices")->required();
    privacy->add_option("--dim", dim, "parameter dimensionality")->required();

    std::size_t nets = 20, coords = 12;
    auto* grad = app.add_subcommand("gradcheck", "finite-difference check of all loss gradients");
    grad->add_option("--nets", nets, "random networks per loss");
    grad->add_option("--coords", coords, "coordinates probed per network");

    std::string csv_a, csv_b;
    auto* compare = app.add_subcommand("compare", "final-round deltas between two metrics files");
    compare->add_option("a", csv_a, "first metrics csv")->required();
    compare->add_option("b", csv_b, "second metrics csv")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (run->parsed()) return cmd_run(config_path);
        if (report->parsed()) return cmd_partition_report(report_config);
        if (privacy->parsed()) return cmd_privacy_check(clients, dim);
        if (grad->parsed()) return cmd_gradcheck(nets, coords);
        if (compare->parsed()) return cmd_compare(csv_a, csv_b);
    } catch (const fedfs::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1;
}
