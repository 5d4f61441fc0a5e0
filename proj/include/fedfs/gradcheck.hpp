#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "fedfs/nn.hpp"

namespace fedfs {

/// Evaluates a scalar loss at the given parameters. Implementations must not
/// cache anything across calls; the checker perturbs coordinates in place.
using LossFn = std::function<double(const ModelParams&)>;

struct GradCheckReport {
    std::size_t coords_checked = 0;
    double max_rel_err = 0.0;
    bool pass = false;
};

/// Compares `analytic` against central finite differences of `loss_fn`,
/// probing up to `max_coords` randomly chosen coordinates of `params`.
/// A coordinate passes when the relative error against max(|a|, |n|) is below
/// `tol`, or both sides are so small that only absolute error is meaningful.
GradCheckReport check_gradients(const LossFn& loss_fn, const ModelParams& analytic, ModelParams params,
                                double step, double tol, std::size_t max_coords, std::uint64_t seed);

struct GradCheckSuiteReport {
    GradCheckReport ce, kl, recon;
    bool pass = false;
    std::string summary() const;
};

/// Finite-difference sweep over all three losses on `nets` random networks.
GradCheckSuiteReport run_gradcheck_suite(std::size_t nets, std::size_t coords_per_net, std::uint64_t seed);

}  // namespace fedfs
