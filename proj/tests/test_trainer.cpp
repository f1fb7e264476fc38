// Copyright (c) 2026, The LMR Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <set>

#include "lmr/checkpoint.hpp"
#include "lmr/errors.hpp"
#include "lmr/grad_check.hpp"
#include "lmr/network.hpp"
#include "lmr/trainer.hpp"
#include "test_util.hpp"

using namespace lmr;

namespace {

std::vector<const Sample*> pointers(const std::vector<Sample>& v) {
    std::vector<const Sample*> out;
    for (const auto& s : v) out.push_back(&s);
    return out;
}

TrainConfig tiny_train_config() {
    TrainConfig tc;
    tc.learning_rate = 1e-2;
    tc.batch_size = 2;
    tc.epochs = 2;
    tc.seed = 5;
    return tc;
}

}  // namespace

TEST_CASE("train config validation") {
    TrainConfig tc;
    CHECK_NOTHROW(tc.validate());
    tc.batch_size = 1;
    CHECK_THROWS_AS(tc.validate(), ConfigError);
    tc = TrainConfig{};
    tc.learning_rate = 0.0;
    CHECK_THROWS_AS(tc.validate(), ConfigError);
    tc = TrainConfig{};
    tc.weight_decay = -1.0;
    CHECK_THROWS_AS(tc.validate(), ConfigError);
    CHECK(parse_optimizer(to_string(OptimizerKind::sgd)) == OptimizerKind::sgd);
    CHECK_THROWS(parse_optimizer("rmsprop"));
}

TEST_CASE("epoch_batches partitions every index once and merges a trailing single") {
    for (std::size_t n : {2u, 5u, 7u, 9u, 64u}) {
        for (std::uint32_t b : {2u, 3u, 4u}) {
            const auto batches = epoch_batches(n, b, 11, 1);
            std::multiset<std::size_t> seen;
            for (const auto& batch : batches) {
                CHECK(batch.size() >= 2);
                CHECK(batch.size() <= b + 1);
                seen.insert(batch.begin(), batch.end());
            }
            CHECK(seen.size() == n);
            CHECK(std::set<std::size_t>(seen.begin(), seen.end()).size() == n);
        }
    }
    CHECK(epoch_batches(9, 4, 1, 1).back().size() == 5);
    CHECK(epoch_batches(10, 4, 1, 1) == epoch_batches(10, 4, 1, 1));
    CHECK(epoch_batches(10, 4, 1, 1) != epoch_batches(10, 4, 1, 2));
}

TEST_CASE("train_step rejects batches below two") {
    const auto setup = tiny_grad_check_setup(1);
    auto st = init_train_state<float>(setup.model, tiny_train_config());
    std::vector<const Sample*> one{&setup.batch[0]};
    CHECK_THROWS_AS(train_step(st, setup.model, tiny_train_config(), setup.weights, one), ValidationError);
}

TEST_CASE("train_step is deterministic") {
    const auto setup = tiny_grad_check_setup(2);
    const auto tc = tiny_train_config();
    const auto st0 = init_train_state<float>(setup.model, tc);
    auto a = st0;
    auto b = st0;
    const auto la = train_step(a, setup.model, tc, setup.weights, pointers(setup.batch));
    const auto lb = train_step(b, setup.model, tc, setup.weights, pointers(setup.batch));
    CHECK(a.params == b.params);
    CHECK(a.adam_m == b.adam_m);
    CHECK(a.adam_v == b.adam_v);
    CHECK(la.total == lb.total);
    CHECK_FALSE(a.params == st0.params);
}

TEST_CASE("threaded batch reduction matches single-threaded") {
    const auto setup = tiny_grad_check_setup(3);
    const auto params = init_params<double>(setup.model, 4);
    BatchOptions one;
    BatchOptions many;
    many.threads = 3;
    const auto g1 = batch_loss_and_grad<double>(setup.model, params, setup.weights, pointers(setup.batch), one);
    const auto g3 = batch_loss_and_grad<double>(setup.model, params, setup.weights, pointers(setup.batch), many);
    CHECK(g1.grad == g3.grad);
    CHECK(g1.total == g3.total);
}

TEST_CASE("zero loss weights leave only decoupled weight decay") {
    const auto setup = tiny_grad_check_setup(4);
    LossWeights w = setup.weights;
    w.mr = 0.0;
    w.cont = 0.0;
    for (auto kind : {OptimizerKind::adamw, OptimizerKind::sgd}) {
        TrainConfig tc = tiny_train_config();
        tc.optimizer = kind;
        tc.weight_decay = 0.1;
        auto st = init_train_state<double>(setup.model, tc);
        const auto before = st.params.flatten();
        train_step(st, setup.model, tc, w, pointers(setup.batch));
        const double shrink = 1.0 - tc.learning_rate * tc.weight_decay;
        const auto after = st.params.flat();
        for (std::size_t i = 0; i < before.size(); ++i) CHECK(after[i] == doctest::Approx(before[i] * shrink).epsilon(1e-12));
    }
}

TEST_CASE("zero gradient with zero weight decay is the identity") {
    const auto setup = tiny_grad_check_setup(4);
    LossWeights w = setup.weights;
    w.mr = 0.0;
    w.cont = 0.0;
    for (auto kind : {OptimizerKind::adamw, OptimizerKind::sgd}) {
        TrainConfig tc = tiny_train_config();
        tc.optimizer = kind;
        tc.weight_decay = 0.0;
        auto st = init_train_state<float>(setup.model, tc);
        const auto before = st.params;
        train_step(st, setup.model, tc, w, pointers(setup.batch));
        CHECK(st.params == before);
    }
}

TEST_CASE("applied sgd update equals the finite-difference gradient") {
    auto setup = tiny_grad_check_setup(5);
    setup.model.dropout = 0.0;
    TrainConfig tc = tiny_train_config();
    tc.optimizer = OptimizerKind::sgd;
    tc.weight_decay = 0.0;
    tc.learning_rate = 1.0;
    auto st = init_train_state<double>(setup.model, tc);
    const auto base = st.params;
    train_step(st, setup.model, tc, setup.weights, pointers(setup.batch));

    BatchOptions bo;
    bo.training = false;
    bo.track_kinks = true;
    const auto batch = pointers(setup.batch);
    const auto at = [&](const ParamStore<double>& p) {
        return batch_loss_and_grad<double>(setup.model, p, setup.weights, batch, bo);
    };
    const std::uint64_t sig0 = at(base).signature;
    std::mt19937_64 rng(9);
    std::uniform_int_distribution<std::size_t> pick(0, base.flat().size() - 1);
    const double h = 1e-5;
    int checked = 0;
    double worst = 0.0;
    for (int draw = 0; draw < 200 && checked < 40; ++draw) {
        const std::size_t i = pick(rng);
        auto plus = base;
        auto minus = base;
        plus.flat()[i] += h;
        minus.flat()[i] -= h;
        const auto gp = at(plus);
        const auto gm = at(minus);
        if (gp.signature != sig0 || gm.signature != sig0) continue;
        const double numeric = (gp.total - gm.total) / (2 * h);
        const double applied = base.flat()[i] - st.params.flat()[i];
        const double rel = std::abs(applied - numeric) / std::max({std::abs(applied), std::abs(numeric), 1e-6});
        worst = std::max(worst, rel);
        ++checked;
    }
    CHECK(checked >= 30);
    CHECK(worst < 1e-4);
}

TEST_CASE("in-batch negatives use every other query and never the sample's own") {
    auto setup = tiny_grad_check_setup(6);
    setup.model.dropout = 0.0;
    LossWeights w = setup.weights;
    w.positive_saliency = false;
    const auto params = init_params<double>(setup.model, 8);
    BatchOptions bo;
    bo.training = false;
    const auto& b = setup.batch;
    REQUIRE(b.size() == 3);
    const auto got = batch_loss_and_grad<double>(setup.model, params, w, pointers(b), bo);

    double expected = 0.0;
    double own = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        std::vector<double> neg;
        for (std::size_t j = 0; j < b.size(); ++j) {
            if (j == i) continue;
            const auto f = forward<double>(setup.model, params, b[i].visual, b[i].context, b[j].query);
            neg.insert(neg.end(), f.relevance.begin(), f.relevance.end());
        }
        expected += contrastive_loss<double>(neg).value / 3.0;
        const auto self = forward<double>(setup.model, params, b[i].visual, b[i].context, b[i].query);
        std::vector<double> with_self = neg;
        with_self.insert(with_self.end(), self.relevance.begin(), self.relevance.end());
        own += contrastive_loss<double>(with_self).value / 3.0;
    }
    CHECK(got.mean.l_cont == doctest::Approx(expected).epsilon(1e-12));
    CHECK(got.mean.l_cont != doctest::Approx(own).epsilon(1e-9));
}

TEST_CASE("zero contrastive weight skips negatives") {
    const auto setup = tiny_grad_check_setup(6);
    LossWeights w = setup.weights;
    w.cont = 0.0;
    w.positive_saliency = false;
    const auto params = init_params<double>(setup.model, 8);
    const auto got = batch_loss_and_grad<double>(setup.model, params, w, pointers(setup.batch), BatchOptions{});
    CHECK(got.mean.l_cont == 0.0);
    CHECK(got.total == doctest::Approx(got.mean.l_mr).epsilon(1e-12));
}

TEST_CASE("non-finite loss names the offending qid") {
    const auto setup = tiny_grad_check_setup(7);
    auto data = setup.batch;
    auto st = init_train_state<float>(setup.model, tiny_train_config());
    st.params.flat()[0] = std::numeric_limits<float>::quiet_NaN();
    try {
        train_step(st, setup.model, tiny_train_config(), setup.weights, pointers(data));
        FAIL("expected TrainingError");
    } catch (const TrainingError& e) {
        CHECK(std::string(e.what()).find(data[0].record.qid) != std::string::npos);
    }
}

TEST_CASE("train writes checkpoints and a loss history") {
    const auto setup = tiny_grad_check_setup(8);
    test::TempDir dir("train");
    TrainConfig tc = tiny_train_config();
    tc.epochs = 3;
    tc.eval_every = 2;
    const auto st = train(tc, setup.model, setup.weights, setup.batch, dir.path());
    CHECK(st.epoch == 3);
    CHECK(st.loss_history.size() == 3);
    for (std::size_t i = 0; i < st.loss_history.size(); ++i) CHECK(st.loss_history[i].epoch == i + 1);
    CHECK(std::filesystem::exists(dir / "model.lmrc"));
    CHECK(std::filesystem::exists(dir / "checkpoint_epoch_0002.lmrc"));
    CHECK_FALSE(std::filesystem::exists(dir / "checkpoint_epoch_0003.lmrc"));

    std::ifstream csv(dir / "loss_history.csv");
    std::string line;
    std::getline(csv, line);
    CHECK(line == "epoch,l1,giou,ce,l_mr,l_cont,total");
    int rows = 0;
    while (std::getline(csv, line)) ++rows;
    CHECK(rows == 3);
}

TEST_CASE("epochs=0 writes the initial state") {
    const auto setup = tiny_grad_check_setup(8);
    test::TempDir dir("train0");
    TrainConfig tc = tiny_train_config();
    tc.epochs = 0;
    const auto st = train(tc, setup.model, setup.weights, setup.batch, dir.path());
    CHECK(st.epoch == 0);
    CHECK(st.params == init_train_state<float>(setup.model, tc).params);
    const auto ck = load_checkpoint(dir / "model.lmrc");
    CHECK(ck.state.params == st.params);
}

TEST_CASE("training is bitwise reproducible and resumable") {
    const auto setup = tiny_grad_check_setup(9);
    test::TempDir a("ra");
    test::TempDir b("rb");
    test::TempDir c("rc");
    TrainConfig tc = tiny_train_config();
    tc.epochs = 4;
    train(tc, setup.model, setup.weights, setup.batch, a.path());
    train(tc, setup.model, setup.weights, setup.batch, b.path());
    CHECK(test::read_bytes(a / "model.lmrc") == test::read_bytes(b / "model.lmrc"));
    CHECK(test::read_bytes(a / "loss_history.csv") == test::read_bytes(b / "loss_history.csv"));

    TrainConfig half = tc;
    half.epochs = 2;
    train(half, setup.model, setup.weights, setup.batch, c.path());
    auto resumed = load_checkpoint(c / "model.lmrc").state;
    train(tc, setup.model, setup.weights, setup.batch, c.path(), std::move(resumed));
    CHECK(test::read_bytes(a / "model.lmrc") == test::read_bytes(c / "model.lmrc"));
    CHECK(test::read_bytes(a / "loss_history.csv") == test::read_bytes(c / "loss_history.csv"));
}

TEST_CASE("resume rejects a different seed or model") {
    const auto setup = tiny_grad_check_setup(9);
    test::TempDir dir("rs");
    TrainConfig tc = tiny_train_config();
    auto st = init_train_state<float>(setup.model, tc);
    TrainConfig other = tc;
    other.seed = tc.seed + 1;
    CHECK_THROWS_AS(train(other, setup.model, setup.weights, setup.batch, dir.path(), st), ConfigError);
    ModelConfig bigger = setup.model;
    bigger.k_moment_queries += 1;
    CHECK_THROWS_AS(train(tc, bigger, setup.weights, setup.batch, dir.path(), st), ShapeError);
}
