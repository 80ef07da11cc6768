#include <cmath>
#include <sstream>

#include "doctest.h"
#include "relrec/errors.hpp"
#include "relrec/eval.hpp"
#include "relrec/training.hpp"

using namespace relrec;

namespace {

struct SmallTask {
    SyntheticWorld world;
    PpmiMatrix ppmi;
    DatasetSplit split;
    TrainingData data;
};

SmallTask small_task() {
    SyntheticSpec spec;
    spec.n_entities = 60;
    spec.n_clusters = 4;
    spec.n_rel = 2;
    spec.triple_density = 0.3;
    SmallTask t{generate_synthetic(spec), {}, {}, {}};
    t.ppmi = compute_ppmi(t.world.graph);
    t.split = split_dataset(t.world.pairs, {0.70, 0.15, 0.15}, 1);
    t.data = {&t.world.graph, &t.ppmi, without_pairs(t.world.triples, t.split.test),
              t.split.train, t.split.dev, t.world.schema.size()};
    return t;
}

TrainConfig small_config() {
    TrainConfig c;
    c.d = 8;
    c.n_c = 4;
    c.n_neg = 5;
    c.b1 = 16;
    c.b2 = 16;
    c.b3 = 16;
    c.lr = 1e-2;
    c.max_epochs = 3;
    return c;
}

std::string log_without_time(const std::vector<EpochLog>& log) {
    auto copy = log;
    for (auto& e : copy) e.wall_seconds = 0;
    std::ostringstream out;
    write_training_log(copy, out);
    return out.str();
}

}  // namespace

TEST_CASE("bce hand values") {
    const std::vector<double> p{0.75, 0.25};
    const std::vector<int> y{1, 0};
    const auto r = bce_loss(p, y);
    CHECK(std::abs(r.loss - 2 * std::log(4.0 / 3.0)) <= 1e-12);
    CHECK(r.dlogits == std::vector<double>{-0.25, 0.25});

    const std::vector<double> exact{1.0, 0.0};
    const auto e = bce_loss(exact, y);
    CHECK(std::isfinite(e.loss));
    CHECK(e.loss < 1e-11);

    const std::vector<double> wrong{0.0};
    const std::vector<int> one{1};
    CHECK(bce_loss(wrong, one).loss == doctest::Approx(-std::log(1e-12)));
}

TEST_CASE("config validation") {
    TrainConfig c;
    CHECK_NOTHROW(c.validate());
    c.threshold = 1.0;
    CHECK_THROWS_AS(c.validate(), DataError);
    c = {};
    c.lr = 0;
    CHECK_THROWS_AS(c.validate(), DataError);
    c = {};
    c.patience = 0;
    CHECK_THROWS_AS(c.validate(), DataError);
    c = {};
    c.beta2 = 1.0;
    CHECK_THROWS_AS(c.validate(), DataError);
    c = {};
    c.b3 = 0;
    CHECK_THROWS_AS(c.validate(), DataError);
}

TEST_CASE("cyclic sampler visits every item once per pass") {
    CyclicSampler<int> s({1, 2, 3, 4, 5}, 9);
    for (int pass = 0; pass < 4; ++pass) {
        auto got = s.next(5);
        std::sort(got.begin(), got.end());
        CHECK(got == std::vector<int>{1, 2, 3, 4, 5});
    }
    CHECK(CyclicSampler<int>({}, 1).next(3).empty());
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}

TEST_CASE("without_pairs drops only labelled pair triples") {
    TripleSet t;
    t.add({0, 0, 1});
    t.add({0, 1, 1});
    t.add({2, 0, 3});
    const std::vector<LabeledPair> pairs{{0, 1, 1, 0}, {2, 3, 0, 1}};
    const auto kept = without_pairs(t, pairs);
    CHECK(kept.size() == 2);
    CHECK_FALSE(kept.contains({0, 0, 1}));
    CHECK(kept.contains({0, 1, 1}));
    CHECK(kept.contains({2, 0, 3}));
}

TEST_CASE("training log format") {
    std::vector<EpochLog> log{{1, 0.5, 1.25, 0.75, 1, 0.5, 2.0 / 3, 0.1234}};
    std::ostringstream out;
    write_training_log(log, out);
    CHECK(out.str() ==
          "epoch,L_n,L_r,L_p,dev_precision,dev_recall,dev_F1,wall_seconds\n"
          "1,0.5,1.25,0.75,1,0.5,0.6666666666666666,0.123\n");
}

TEST_CASE("joint training is deterministic and returns the best epoch") {
    const auto task = small_task();
    const auto c = small_config();
    TrainHooks hooks;
    std::size_t steps = 0;
    std::vector<Stage> order;
    hooks.after_step = [&](Stage s, const ModelParams&) {
        ++steps;
        if (order.size() < 3) order.push_back(s);
    };
    const auto a = joint_train(task.data, c, hooks);
    const auto b = joint_train(task.data, c);
    CHECK(log_without_time(a.log) == log_without_time(b.log));
    CHECK(a.params == b.params);
    CHECK(a.adam == b.adam);

    REQUIRE(a.log.size() >= 1);
    for (const auto& e : a.log) {
        CHECK(std::isfinite(e.recall_loss));
        CHECK(std::isfinite(e.relational_loss));
        CHECK(std::isfinite(e.prediction_loss));
    }
    // One epoch is ceil(|train| / b3) steps of every stage, in stage order.
    const std::size_t per_epoch_steps = (task.split.train.size() + c.b3 - 1) / c.b3;
    CHECK(steps == 3 * per_epoch_steps * a.log.size());
    CHECK(order == std::vector<Stage>{Stage::recall, Stage::relational, Stage::prediction});

    double best = -1;
    std::size_t best_epoch = 0;
    for (const auto& e : a.log)
        if (e.dev_f1 > best) {
            best = e.dev_f1;
            best_epoch = e.epoch;
        }
    CHECK(a.best_epoch == best_epoch);
    CHECK(a.best_dev_f1 == best);

}

TEST_CASE("returned parameters are those of the best epoch") {
    const auto task = small_task();
    auto c = small_config();
    c.max_epochs = 4;
    std::vector<ModelParams> snapshots;
    const TripleSet kb = without_pairs(task.data.triples, task.data.dev);
    TrainHooks hooks;
    const ModelParams* latest = nullptr;
    hooks.after_step = [&](Stage, const ModelParams& p) { latest = &p; };
    hooks.after_epoch = [&](const EpochLog&) { snapshots.push_back(*latest); };
    const auto r = joint_train(task.data, c, hooks);
    REQUIRE(snapshots.size() == r.log.size());
    CHECK(r.params == snapshots[r.best_epoch - 1]);

    const auto opts = c.predict_options(&kb);
    const auto probs = predict_pairs(r.params, task.split.dev, opts);
    std::vector<int> y;
    for (const auto& p : task.split.dev) y.push_back(p.label);
    CHECK(f1_score(probs, y, c.threshold).f1 == r.best_dev_f1);
}

TEST_CASE("every stage updates the shared entity embeddings") {
    const auto task = small_task();
    auto c = small_config();
    c.max_epochs = 1;
    ModelParams before;
    bool first = true;
    std::array<bool, 3> changed{};
    TrainHooks hooks;
    hooks.after_step = [&](Stage s, const ModelParams& p) {
        if (!first) changed[static_cast<std::size_t>(s)] |= !(p.entity_emb() == before.entity_emb());
        first = false;
        before = p;
    };
    joint_train(task.data, c, hooks);
    CHECK(changed[static_cast<std::size_t>(Stage::relational)]);
    CHECK(changed[static_cast<std::size_t>(Stage::prediction)]);
    CHECK(changed[static_cast<std::size_t>(Stage::recall)]);
}

TEST_CASE("training input errors and divergence") {
    auto task = small_task();
    auto c = small_config();
    TrainingData empty = task.data;
    empty.dev.clear();
    CHECK_THROWS_AS(joint_train(empty, c), DataError);
    empty = task.data;
    empty.graph = nullptr;
    CHECK_THROWS_AS(joint_train(empty, c), DataError);
    empty = task.data;
    empty.n_rel = 0;
    CHECK_THROWS_AS(joint_train(empty, c), DataError);

    c.lr = 1e300;
    CHECK_THROWS_AS(joint_train(task.data, c), DivergenceError);
}

TEST_CASE("parallel prediction matches serial prediction") {
    const auto task = small_task();
    const auto params = init_params(small_config().dims(2), task.world.graph.vocab.size(), 3);
    PredictOptions opts;
    opts.n_h = 4;
    opts.n_t = 4;
    const auto one = predict_pairs(params, task.world.pairs, opts, 1);
    const auto three = predict_pairs(params, task.world.pairs, opts, 3);
    CHECK(one == three);
    CHECK(one.size() == task.world.pairs.size());
}

TEST_CASE("gradient check catches a corrupted gradient and passes at zero loss") {
    GradCheckOptions bad;
    bad.tamper = [](GradSet& g) { g[Tensor::attn_vector](0, 0) += 1.0; };
    const auto r = grad_check(LossKind::prediction, {}, bad);
    CHECK_FALSE(r.pass);
    for (const auto& t : r.tensors) CHECK(t.pass == (t.tensor != "attn_vector"));

    GradCheckInstance zero;
    zero.zero_loss = true;
    for (auto kind : {LossKind::recall, LossKind::relational, LossKind::prediction})
        CHECK_MESSAGE(grad_check(kind, zero).pass, to_string(kind));
}
