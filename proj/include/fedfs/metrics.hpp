#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fedfs/data.hpp"
#include "fedfs/nn.hpp"

namespace fedfs {

struct RoundMetrics {
    std::size_t round = 0;
    double acc_global = 0.0;
    double acc_local = 0.0;
    double mean_train_loss = 0.0;
    double beta = 0.0;
    std::optional<double> recon_initial;
    std::optional<double> recon_final;
    std::vector<std::size_t> selected_ids;
};

/// Fraction of test samples whose argmax softmax prediction equals the label.
/// Ties break toward the lowest class index.
double evaluate(const ModelParams& params, const Dataset& testset);

/// Unweighted mean of evaluate() over the given models, in input order.
double acc_local(const std::vector<const ModelParams*>& updated_client_params, const Dataset& testset);

/// Fixed schema:
///   round,acc_global,acc_local,mean_train_loss,beta,recon_initial,recon_final,selected
/// Reals with 6 decimal places, selected ids semicolon-joined, absent fields empty.
void write_metrics_csv(const std::vector<RoundMetrics>& metrics, const std::string& path);

std::string metrics_to_csv(const std::vector<RoundMetrics>& metrics);

/// Parses a file produced by write_metrics_csv. Throws FormatError on schema drift.
std::vector<RoundMetrics> read_metrics_csv(const std::string& path);

}  // namespace fedfs
