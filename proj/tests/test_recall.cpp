#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "relrec/errors.hpp"
#include "relrec/recall.hpp"
#include "relrec/training.hpp"

using namespace relrec;

namespace {

ModelParams random_params(std::size_t vocab, std::size_t d, std::uint64_t seed) {
    ModelParams p = ModelParams::zeros({d, d, d, 1}, vocab);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    for (auto& t : p.tensors)
        for (auto& x : t.flat()) x = n(rng);
    return p;
}

}  // namespace

TEST_CASE("zero embeddings give a uniform distribution") {
    const auto p = ModelParams::zeros({4, 4, 4, 1}, 5);
    for (double x : association_probability(p, 2)) CHECK(x == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("two-entity closed form") {
    ModelParams p = ModelParams::zeros({1, 1, 1, 1}, 2);
    p.entity_emb()(0, 0) = 1.0;
    p.context_emb()(1, 0) = std::log(3.0);
    const auto probs = association_probability(p, 0);
    CHECK(std::abs(probs[0] - 0.25) <= 1e-12);
    CHECK(std::abs(probs[1] - 0.75) <= 1e-12);
    CHECK_THROWS_AS(association_probability(p, 2), LookupError);
}

TEST_CASE("association probabilities are normalised and shift invariant") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        ModelParams p = random_params(9, 3, seed);
        const auto a = association_probability(p, seed % 9);
        double s = 0;
        for (double x : a) s += x;
        CHECK(std::abs(s - 1) <= 1e-9);

        std::vector<double> w{0.3 * static_cast<double>(seed % 7), -1.1, 2.5};
        for (std::size_t j = 0; j < 9; ++j) axpy(1.0, w, p.context_emb().row(j));
        const auto b = association_probability(p, seed % 9);
        for (std::size_t j = 0; j < 9; ++j) CHECK(std::abs(a[j] - b[j]) <= 1e-12);
    }
}

TEST_CASE("large logits stay finite") {
    ModelParams p = ModelParams::zeros({1, 1, 1, 1}, 3);
    p.entity_emb()(0, 0) = 1.0;
    p.context_emb()(1, 0) = 800.0;
    p.context_emb()(2, 0) = 799.0;
    const auto probs = association_probability(p, 0);
    CHECK(probs[1] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
    std::vector<std::optional<EmpiricalDist>> emp(3);
    emp[0] = EmpiricalDist{{{2, 1.0}}};
    const std::vector<EntityId> batch{0};
    CHECK(recall_loss(p, emp, batch) == doctest::Approx(std::log1p(std::exp(1.0))));
}

TEST_CASE("recall loss hand values") {
    const auto zero = ModelParams::zeros({3, 3, 3, 1}, 2);
    std::vector<std::optional<EmpiricalDist>> emp(2);
    emp[0] = EmpiricalDist{{{0, 0.5}, {1, 0.5}}};
    emp[1] = EmpiricalDist{{{0, 0.5}, {1, 0.5}}};
    const std::vector<EntityId> one{0}, both{0, 1};
    CHECK(recall_loss(zero, emp, one) == doctest::Approx(std::log(2.0)).epsilon(1e-14));
    CHECK(recall_loss(zero, emp, both) == doctest::Approx(2 * std::log(2.0)).epsilon(1e-14));

    // One-hot target already matched with near certainty.
    ModelParams sharp = ModelParams::zeros({1, 1, 1, 1}, 2);
    sharp.entity_emb()(0, 0) = 1.0;
    sharp.context_emb()(1, 0) = 60.0;
    emp[0] = EmpiricalDist{{{1, 1.0}}};
    CHECK(recall_loss(sharp, emp, one) < 1e-20);

    emp[1].reset();
    const std::vector<EntityId> unsupported{1};
    CHECK_THROWS_AS(recall_loss(zero, emp, unsupported), DataError);
}

TEST_CASE("recall gradients match finite differences on a ten-entity instance") {
    GradCheckInstance inst;
    inst.vocab_size = 10;
    inst.d = 4;
    const auto report = grad_check(LossKind::recall, inst);
    CHECK(report.pass);
    for (const auto& t : report.tensors) CHECK_MESSAGE(t.max_rel_error <= 1e-4, t.tensor);
}

TEST_CASE("top associations: ties by id, self excluded, capped at the vocabulary") {
    const auto uniform = ModelParams::zeros({2, 2, 2, 1}, 6);
    const auto a = top_associations(uniform, 2, 3);
    REQUIRE(a.size() == 3);
    CHECK(a.entries[0].first == 0);
    CHECK(a.entries[1].first == 1);
    CHECK(a.entries[2].first == 3);
    CHECK(top_associations(uniform, 0, 100).size() == 5);
    CHECK_THROWS_AS(top_associations(uniform, 0, 0), DataError);

    const std::vector<double> probs{0.5, 0.35, 0.15};
    const auto l = top_associations(probs, 0, 5);
    REQUIRE(l.size() == 2);
    CHECK(l.entries[0] == std::pair<EntityId, double>{1, 0.35});
    CHECK(l.entries[1] == std::pair<EntityId, double>{2, 0.15});

    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto p = random_params(8, 2, seed);
        const EntityId e = seed % 8;
        const auto list = top_associations(p, e, 4);
        const auto full = association_probability(p, e);
        for (std::size_t k = 0; k < list.size(); ++k) {
            CHECK(list.entries[k].first != e);
            CHECK(list.entries[k].second == full[list.entries[k].first]);
            if (k) CHECK(list.entries[k - 1].second >= list.entries[k].second);
        }
    }
}

TEST_CASE("recall-only training decreases the loss on a tiny graph") {
    Vocab v;
    for (int i = 0; i < 10; ++i) v.add("n" + std::to_string(i));
    std::vector<std::tuple<EntityId, EntityId, std::uint64_t>> raw;
    for (EntityId i = 0; i < 10; ++i) {
        raw.emplace_back(i, (i + 1) % 10, 3 + i % 4);
        raw.emplace_back(i, (i + 3) % 10, 1 + i % 2);
    }
    const auto g = build_cooc_graph(v, raw);
    const auto ppmi = compute_ppmi(g);

    TrainingData data{&g, &ppmi, {}, {}, {}, 1};
    TrainConfig c;
    c.d = 4;
    c.b1 = 10;
    c.lr = 1e-2;
    c.max_epochs = 200;
    c.relational_stage = false;
    c.prediction_stage = false;
    const auto r = joint_train(data, c);
    REQUIRE(r.log.size() == 200);
    std::size_t down = 0;
    for (std::size_t i = 1; i < r.log.size(); ++i) down += r.log[i].recall_loss < r.log[i - 1].recall_loss;
    CHECK(static_cast<double>(down) / 199.0 >= 0.9);
    CHECK(r.log.back().recall_loss < r.log.front().recall_loss);
}
