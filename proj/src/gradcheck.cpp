#include "fedfs/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "fedfs/rng.hpp"

namespace fedfs {

namespace {

// Below this magnitude a relative comparison just amplifies finite-difference
// noise; fall back to an absolute bound.
constexpr double kRelFloor = 1e-3;
constexpr double kAbsTol = 1e-7;

Tensor2 random_batch(Rng& rng, std::size_t rows, std::size_t cols) {
    Tensor2 t(rows, cols);
    for (double& v : t.data) v = rng.uniform();
    return t;
}

GradCheckReport worst_of(const GradCheckReport& a, const GradCheckReport& b) {
    GradCheckReport r;
    r.coords_checked = a.coords_checked + b.coords_checked;
    r.max_rel_err = std::max(a.max_rel_err, b.max_rel_err);
    r.pass = a.pass && b.pass;
    return r;
}

}  // namespace

GradCheckReport check_gradients(const LossFn& loss_fn, const ModelParams& analytic, ModelParams params,
                                double step, double tol, std::size_t max_coords, std::uint64_t seed) {
    const std::size_t total = params.coord_count();
    std::vector<std::size_t> picks(total);
    std::iota(picks.begin(), picks.end(), 0);
    if (max_coords < total) {
        Rng rng(seed);
        rng.shuffle(picks);
        picks.resize(max_coords);
    }

    GradCheckReport report;
    report.pass = true;
    for (std::size_t idx : picks) {
        const double saved = params.coord(idx);
        params.set_coord(idx, saved + step);
        const double lp = loss_fn(params);
        params.set_coord(idx, saved - step);
        const double lm = loss_fn(params);
        params.set_coord(idx, saved);

        const double numeric = (lp - lm) / (2.0 * step);
        const double a = analytic.coord(idx);
        const double denom = std::max(std::abs(a), std::abs(numeric));
        double rel;
        bool ok;
        if (denom >= kRelFloor) {
            rel = std::abs(a - numeric) / denom;
            ok = rel < tol;
        } else {
            rel = std::abs(a - numeric) / kRelFloor;
            ok = std::abs(a - numeric) < kAbsTol;
        }
        report.max_rel_err = std::max(report.max_rel_err, rel);
        report.pass = report.pass && ok;
        ++report.coords_checked;
    }
    return report;
}

GradCheckSuiteReport run_gradcheck_suite(std::size_t nets, std::size_t coords_per_net, std::uint64_t seed) {
    constexpr double kStep = 1e-5;
    constexpr double kTol = 1e-4;
    GradCheckSuiteReport suite;
    suite.ce.pass = suite.kl.pass = suite.recon.pass = true;

    for (std::size_t i = 0; i < nets; ++i) {
        Rng rng(mix_seed(seed, i));
        const std::size_t d_in = 2 + rng.bounded(6);
        const std::size_t h = 3 + rng.bounded(6);
        const std::size_t n = 2 + rng.bounded(5);
        const std::size_t batch = 1 + rng.bounded(7);

        ModelSpec spec{{d_in, h, n}, OutputActivation::identity};
        ModelParams params = init_model(spec, mix_seed(seed, i, 1));
        Tensor2 x = random_batch(rng, batch, d_in);
        std::vector<int> labels(batch);
        for (int& y : labels) y = static_cast<int>(rng.bounded(n));

        const ModelParams ce_grads = ce_loss_grad(params, x, labels).grads;
        suite.ce = worst_of(suite.ce, check_gradients(
                                          [&](const ModelParams& p) { return ce_loss_grad(p, x, labels).loss; },
                                          ce_grads, params, kStep, kTol, coords_per_net, mix_seed(seed, i, 2)));

        const ModelParams kl_grads = kl_uniform_loss_grad(params, x).grads;
        suite.kl = worst_of(suite.kl, check_gradients(
                                          [&](const ModelParams& p) { return kl_uniform_loss_grad(p, x).loss; },
                                          kl_grads, params, kStep, kTol, coords_per_net, mix_seed(seed, i, 3)));

        // decoder mirrors the classifier: n -> h -> d_in
        ModelSpec hidden_spec{{n, h, d_in}, OutputActivation::sigmoid};
        ModelParams hidden = init_model(hidden_spec, mix_seed(seed, i, 4));
        Tensor2 z = random_batch(rng, batch, d_in);
        const ModelParams recon_grads = l2_recon_loss_grad(hidden, params, z).grads;
        suite.recon = worst_of(suite.recon,
                               check_gradients(
                                   [&](const ModelParams& p) { return l2_recon_loss_grad(p, params, z).loss; },
                                   recon_grads, hidden, kStep, kTol, coords_per_net, mix_seed(seed, i, 5)));
    }
    suite.pass = suite.ce.pass && suite.kl.pass && suite.recon.pass;
    return suite;
}

std::string GradCheckSuiteReport::summary() const {
    std::ostringstream os;
    os << "ce: max_rel_err=" << ce.max_rel_err << " coords=" << ce.coords_checked << (ce.pass ? " ok" : " FAIL")
       << "; kl: max_rel_err=" << kl.max_rel_err << " coords=" << kl.coords_checked << (kl.pass ? " ok" : " FAIL")
       << "; recon: max_rel_err=" << recon.max_rel_err << " coords=" << recon.coords_checked
       << (recon.pass ? " ok" : " FAIL");
    return os.str();
}

}  // namespace fedfs
