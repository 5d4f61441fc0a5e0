#include <numeric>

#include <doctest.h>

#include "fedfs/client.hpp"
#include "fedfs/errors.hpp"
#include "fedfs/rng.hpp"
#include "oracles.hpp"

using namespace fedfs;

namespace {

struct Fixture {
    Dataset data;
    ClientShard shard;

    explicit Fixture(std::size_t samples = 40, int classes = 4, std::size_t dim = 6, std::uint64_t seed = 50) {
        data = make_synthetic(classes, samples / classes, dim, 0.15, seed);
        shard.id = 0;
        shard.data = &data;
        shard.indices.resize(data.size());
        std::iota(shard.indices.begin(), shard.indices.end(), 0);
    }
};

Tensor2 gather_all(const ClientShard& shard) {
    Tensor2 out(shard.size(), shard.data->dim());
    for (std::size_t i = 0; i < shard.size(); ++i) {
        std::copy_n(shard.data->features.row(shard.indices[i]), shard.data->dim(), out.row(i));
    }
    return out;
}

std::vector<int> gather_labels(const ClientShard& shard) {
    std::vector<int> out(shard.size());
    for (std::size_t i = 0; i < shard.size(); ++i) out[i] = shard.data->labels[shard.indices[i]];
    return out;
}

}  // namespace

TEST_CASE("local_update: lr=0 returns the global params bit-exactly") {
    Fixture fx;
    const ModelParams global = init_model(ModelSpec{{6, 8, 4}}, 1);
    LocalTrainConfig cfg{2, 10, 0.0, 0.0, 3};
    const LocalUpdateResult r = local_update(global, fx.shard, cfg);
    CHECK(r.params.bit_equal(global));
}

TEST_CASE("local_update: one full-batch epoch equals a single composed sgd step") {
    Fixture fx;
    const ModelParams global = init_model(ModelSpec{{6, 8, 4}}, 2);
    LocalTrainConfig cfg{1, fx.shard.size(), 0.05, 0.0, 11};
    const LocalUpdateResult got = local_update(global, fx.shard, cfg);

    const LossGrad lg = ce_loss_grad(global, gather_all(fx.shard), gather_labels(fx.shard));
    const ModelParams want = sgd_step(global, lg.grads, 0.05);
    CHECK(got.params.bit_equal(want));
    CHECK(got.mean_loss == lg.loss);
}

TEST_CASE("local_update: defaults carry the reference hyper-parameters") {
    const LocalTrainConfig cfg;
    CHECK(cfg.local_epochs == 10);
    CHECK(cfg.batch_size == 60);
    CHECK(cfg.lr == 0.01);
}

TEST_CASE("local_update: never mutates the input and is deterministic") {
    Fixture fx;
    const ModelParams global = init_model(ModelSpec{{6, 5, 4}}, 4);
    const ModelParams before = global;
    LocalTrainConfig cfg{3, 7, 0.02, 0.0, 5};
    const LocalUpdateResult a = local_update(global, fx.shard, cfg);
    const LocalUpdateResult b = local_update(global, fx.shard, cfg);
    CHECK(global.bit_equal(before));
    CHECK(a.params.bit_equal(b.params));
    CHECK(a.mean_loss == b.mean_loss);
}

TEST_CASE("local_update: training loss trends downward across epochs") {
    std::size_t non_increasing = 0, pairs = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Fixture fx(60, 3, 5, 60 + seed);
        ModelParams params = init_model(ModelSpec{{5, 8, 3}}, seed);
        LocalTrainConfig cfg{1, 10, 0.01, 0.0, 0};
        double prev = 0.0;
        for (std::size_t epoch = 0; epoch < 6; ++epoch) {
            cfg.seed = mix_seed(seed, epoch);
            const LocalUpdateResult r = local_update(params, fx.shard, cfg);
            params = r.params;
            if (epoch > 0) {
                ++pairs;
                if (r.mean_loss <= prev + 1e-12) ++non_increasing;
            }
            prev = r.mean_loss;
        }
    }
    CHECK(static_cast<double>(non_increasing) / static_cast<double>(pairs) >= 0.9);
}

TEST_CASE("local_update_rectified: beta=0 is bit-identical to the plain update") {
    Fixture fx;
    const Dataset mimic = make_synthetic(4, 5, 6, 0.2, 70);
    const ModelParams global = init_model(ModelSpec{{6, 8, 4}}, 6);
    LocalTrainConfig cfg{2, 9, 0.03, 0.0, 7};
    const LocalUpdateResult plain = local_update(global, fx.shard, cfg);
    const LocalUpdateResult rect = local_update_rectified(global, fx.shard, mimic, cfg);
    CHECK(plain.params.bit_equal(rect.params));
    CHECK(plain.mean_loss == rect.mean_loss);
}

TEST_CASE("local_update_rectified: uniform net pays no KL on the first step") {
    Fixture fx;
    const Dataset mimic = make_synthetic(4, 5, 6, 0.2, 71);
    ModelParams global;  // zero weights -> exactly uniform predictions
    global.spec = ModelSpec{{6, 4}};
    global.layers.push_back({Tensor2(6, 4), std::vector<double>(4, 0.0)});

    LocalTrainConfig cfg{1, fx.shard.size(), 0.05, 1.0, 8};
    const LocalUpdateResult rect = local_update_rectified(global, fx.shard, mimic, cfg);
    LocalTrainConfig plain_cfg = cfg;
    plain_cfg.beta = 0.0;
    const LocalUpdateResult plain = local_update(global, fx.shard, plain_cfg);
    CHECK(rect.params.bit_equal(plain.params));
    CHECK(rect.mean_loss == plain.mean_loss);
}

TEST_CASE("local_update_rectified: one step composes CE and scaled KL gradients") {
    Fixture fx;
    const Dataset mimic = make_synthetic(4, 6, 6, 0.2, 72);
    const ModelParams global = init_model(ModelSpec{{6, 4}}, 9);
    const double beta = 0.5, lr = 0.02;
    LocalTrainConfig cfg{1, fx.shard.size(), lr, beta, 10};
    const LocalUpdateResult got = local_update_rectified(global, fx.shard, mimic, cfg);

    LossGrad ce = ce_loss_grad(global, gather_all(fx.shard), gather_labels(fx.shard));
    const LossGrad kl = kl_uniform_loss_grad(global, mimic.features);
    add_scaled(ce.grads, kl.grads, beta);
    const ModelParams want = sgd_step(global, ce.grads, lr);
    CHECK(got.params.bit_equal(want));
    CHECK(got.mean_loss == ce.loss + beta * kl.loss);
}

TEST_CASE("local_update_rectified: beta=1 pushes mimic predictions toward uniform") {
    std::size_t improved = 0;
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Fixture fx(30, 3, 5, 80 + seed);
        const Dataset mimic = make_synthetic(3, 7, 5, 0.25, 90 + seed);
        const ModelParams global = init_model(ModelSpec{{5, 8, 3}}, 100 + seed);
        const double before = kl_uniform_loss_grad(global, mimic.features).loss;
        LocalTrainConfig cfg{3, 10, 0.05, 1.0, seed};
        const LocalUpdateResult r = local_update_rectified(global, fx.shard, mimic, cfg);
        const double after = kl_uniform_loss_grad(r.params, mimic.features).loss;
        if (after < before) ++improved;
    }
    CHECK(improved >= 9);
}

TEST_CASE("local_update: rejects empty shards and propagates numeric failures") {
    Fixture fx;
    ClientShard empty{1, &fx.data, {}};
    const ModelParams global = init_model(ModelSpec{{6, 4}}, 11);
    CHECK_THROWS_AS(local_update(global, empty, LocalTrainConfig{}), EmptyInputError);

    ModelParams poisoned = global;
    poisoned.layers[0].bias[0] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(local_update(poisoned, fx.shard, LocalTrainConfig{1, 10, 0.01, 0.0, 1}), NumericError);
}

TEST_CASE("local_stats: constants, Bernoulli, and the two-pass oracle") {
    Dataset ds;
    ds.num_classes = 2;
    ds.features = Tensor2(3, 4, 0.5);
    ds.labels = {0, 1, 0};
    ClientShard shard{0, &ds, {0, 1, 2}};
    ClientStats s = local_stats(shard);
    CHECK(s.mu == 0.5);
    CHECK(s.sigma == 0.0);

    Dataset coin;
    coin.num_classes = 2;
    coin.features = Tensor2(2, 4);
    for (std::size_t j = 0; j < 4; ++j) coin.features(0, j) = static_cast<double>(j % 2);
    for (std::size_t j = 0; j < 4; ++j) coin.features(1, j) = static_cast<double>((j + 1) % 2);
    coin.labels = {0, 1};
    ClientShard coin_shard{0, &coin, {0, 1}};
    s = local_stats(coin_shard);
    CHECK(s.mu == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(s.sigma == doctest::Approx(0.25).epsilon(1e-15));

    Fixture fx(24, 3, 7, 130);
    s = local_stats(fx.shard);
    std::vector<double> values;
    for (std::size_t idx : fx.shard.indices) {
        const double* row = fx.data.features.row(idx);
        values.insert(values.end(), row, row + fx.data.dim());
    }
    const oracles::MeanVar mv = oracles::two_pass_stats(values);
    CHECK(s.mu == doctest::Approx(mv.mean).epsilon(1e-12));
    CHECK(s.sigma == doctest::Approx(mv.var).epsilon(1e-12));
}
