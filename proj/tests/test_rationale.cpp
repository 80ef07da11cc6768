#include <cmath>
#include <string>

#include "doctest.h"
#include "relrec/errors.hpp"
#include "relrec/rationale.hpp"
#include "relrec/training.hpp"

using namespace relrec;

namespace {

RelationPosterior manual_posterior(std::vector<double> probs) {
    RelationPosterior p;
    for (RelationId k = 0; k < probs.size(); ++k)
        if (probs[k] > 0) p.survivors.push_back(k);
    p.probs = std::move(probs);
    return p;
}

AssumptionRecord record(EntityId h, EntityId t, double attn, std::vector<double> probs) {
    AssumptionRecord r;
    r.a_h = h;
    r.a_t = t;
    r.attn = attn;
    r.posterior = manual_posterior(std::move(probs));
    r.top_relation = r.posterior.top();
    return r;
}

// Entity 0 recalls ph, entity 1 recalls pt, exactly.
ModelParams cwa_world() {
    const double ph[] = {0.04, 0.04, 0.5, 0.4, 0.01, 0.01};
    const double pt[] = {0.1, 0.1, 0.1, 0.1, 0.2, 0.4};
    ModelParams p = ModelParams::zeros({2, 2, 2, 1}, 6);
    p.entity_emb()(0, 0) = 1.0;
    p.entity_emb()(1, 1) = 1.0;
    for (std::size_t j = 0; j < 6; ++j) {
        p.context_emb()(j, 0) = std::log(ph[j]);
        p.context_emb()(j, 1) = std::log(pt[j]);
    }
    return p;
}

}  // namespace

TEST_CASE("assumption mode parsing") {
    CHECK(parse_assumption_mode("OWA") == AssumptionMode::owa);
    CHECK(parse_assumption_mode("cwa") == AssumptionMode::cwa);
    CHECK_THROWS_AS(parse_assumption_mode("both"), DataError);
}

TEST_CASE("assumption vector is the posterior-weighted relation sum") {
    Matrix rel(5, 2);
    rel(0, 0) = 1; rel(0, 1) = 2;
    rel(1, 0) = 3; rel(1, 1) = 4;
    rel(4, 0) = 100;  // NA row never contributes

    const auto post = posterior_from_scores({2.0, 0.0}, 1.0);
    const auto a = assumption_vector(post, rel);
    const double p0 = std::exp(2.0) / (std::exp(2.0) + std::exp(1.0));
    CHECK(std::abs(p0 - 0.7311) < 1e-4);
    CHECK(a[0] == doctest::Approx(p0).epsilon(1e-14));
    CHECK(a[1] == doctest::Approx(2 * p0).epsilon(1e-14));

    const auto b = assumption_vector(manual_posterior({0.5, 1.0}), rel);
    CHECK(b[0] == 3.5);
    CHECK(b[1] == 5.0);
}

TEST_CASE("pair representation") {
    ModelParams p = ModelParams::zeros({1, 1, 1, 1}, 2);
    p[Tensor::proj_weight](0, 0) = 0.1;
    p[Tensor::proj_weight](1, 0) = 0.2;
    p[Tensor::proj_weight](2, 0) = 0.3;
    p.entity_emb()(0, 0) = 1.0;
    p.entity_emb()(1, 0) = 1.0;
    const std::vector<Real> a{1.0};
    const auto e = pair_representation(p, 0, 1, a);
    CHECK(std::abs(e[0] - 0.5370) < 1e-4);
    CHECK(e[0] == doctest::Approx(std::tanh(0.6)).epsilon(1e-14));

    ModelParams z = ModelParams::zeros({2, 3, 2, 1}, 2);
    z[Tensor::proj_bias](0, 1) = 0.7;
    const std::vector<Real> zero_a{0.0, 0.0};
    const auto ez = pair_representation(z, 0, 1, zero_a);
    CHECK(ez[0] == 0.0);
    CHECK(ez[1] == doctest::Approx(std::tanh(0.7)).epsilon(1e-14));
}

TEST_CASE("attention weights") {
    ModelParams p = ModelParams::zeros({1, 1, 1, 1}, 2);
    const std::vector<std::vector<Real>> es{{0.0}, {1.0}, {-0.3}};
    for (double w : attention_weights(p, es)) CHECK(w == doctest::Approx(1.0 / 3).epsilon(1e-14));

    p[Tensor::attn_weight](0, 0) = 1.0;
    p[Tensor::attn_vector](0, 0) = std::log(3.0) / std::tanh(1.0);
    const std::vector<std::vector<Real>> two{{0.0}, {1.0}};
    const auto w = attention_weights(p, two);
    CHECK(std::abs(w[0] - 0.25) <= 1e-12);
    CHECK(std::abs(w[1] - 0.75) <= 1e-12);
}

TEST_CASE("prediction with zero weights, a biased output, and the record count") {
    ModelParams p = ModelParams::zeros({3, 3, 3, 2}, 6);
    std::vector<AssumptionInput> in{{1, 2, posterior_from_scores({1.0, 0.0}, 0.5)},
                                    {3, 4, posterior_from_scores({0.0, 0.0}, 0.5)}};
    CHECK(predict_from_assumptions(p, in).probability == 0.5);
    p[Tensor::pred_bias](0, 0) = std::log(3.0);
    const auto pred = predict_from_assumptions(p, in);
    CHECK(std::abs(pred.probability - 0.75) <= 1e-12);
    CHECK(pred.logit == doctest::Approx(std::log(3.0)));
    double s = 0;
    for (const auto& r : pred.records) s += r.attn;
    CHECK(std::abs(s - 1.0) <= 1e-12);

    PredictOptions opts;
    opts.n_h = 2;
    opts.n_t = 3;
    const auto full = predict_relation(p, 0, 1, opts);
    CHECK(full.records.size() == 6);
    for (const auto& r : full.records) {
        CHECK(r.a_h != 0);
        CHECK(r.a_t != 1);
        for (double x : r.e_vec) CHECK(std::abs(x) < 1.0);
    }
    CHECK_THROWS_AS(predict_relation(p, 0, 6, opts), LookupError);
    opts.n_h = 0;
    CHECK_THROWS_AS(predict_relation(p, 0, 1, opts), DataError);
}

TEST_CASE("rationales are ranked by attention times posterior") {
    Prediction pred;
    pred.probability = 0.9;
    const double p0 = std::exp(2.0) / (std::exp(2.0) + std::exp(1.0));
    pred.records.push_back(record(4, 5, 0.25, {0.0, 0.9}));
    pred.records.push_back(record(2, 3, 0.75, {p0, 0.0}));
    const auto rep = extract_rationales(pred, {0, 0, 1}, 5);
    REQUIRE(rep.rationales.size() == 2);
    CHECK(std::abs(rep.rationales[0].score - 0.5483) < 1e-4);
    CHECK(rep.rationales[0].head == 2);
    CHECK(rep.rationales[0].relation == 0);
    CHECK(std::abs(rep.rationales[1].score - 0.2250) < 1e-12);
    CHECK(rep.rationales[1].relation == 1);
    CHECK(rep.probability == 0.9);
}

TEST_CASE("rationale extraction: target removal, cap, ties and empty output") {
    Prediction pred;
    pred.records.push_back(record(0, 1, 0.5, {1.0}));
    pred.records.push_back(record(2, 3, 0.2, {1.0}));
    pred.records.push_back(record(1, 3, 0.2, {1.0}));
    pred.records.push_back(record(4, 5, 0.1, {0.0}));
    const auto rep = extract_rationales(pred, {0, 0, 1}, 10);
    REQUIRE(rep.rationales.size() == 2);
    CHECK(rep.rationales[0].head == 1);  // tie on score, lower head first
    CHECK(rep.rationales[1].head == 2);
    CHECK(extract_rationales(pred, {0, 0, 1}, 1).rationales.size() == 1);

    Prediction none;
    none.records.push_back(record(2, 3, 1.0, {0.0, 0.0}));
    CHECK(extract_rationales(none, {0, 0, 1}, 5).rationales.empty());
}

TEST_CASE("rationale JSON and table") {
    Vocab v(std::vector<std::string>{"aspirin", "headache", "ibuprofen", "pain"});
    RelationSchema s(std::vector<std::string>{"treats"});
    RationaleReport rep;
    rep.head = 0;
    rep.tail = 1;
    rep.probability = 0.8;
    rep.rationales.push_back({2, 0, 3, 0.5, 0.5, 1.0});
    const auto json = report_to_json(rep, v, s);
    CHECK(json ==
          R"({"head":"aspirin","tail":"headache","relation":"treats","mode":"OWA","probability":0.8,)"
          R"("rationales":[{"h":"ibuprofen","r":"treats","t":"pain","score":0.5,"attn":0.5,"posterior":1.0}]})");
    rep.mode = AssumptionMode::cwa;
    CHECK(report_to_json(rep, v, s).find(R"("fallback":false)") != std::string::npos);

    const auto table = format_report_table(rep, v, s);
    CHECK(table.find("Target (CWA)") != std::string::npos);
    CHECK(table.find("ibuprofen") != std::string::npos);
    CHECK(table.find("score 0.5000") != std::string::npos);
}

TEST_CASE("closed-world pairs are ranked by the association product") {
    const auto p = cwa_world();
    const auto ph = association_probability(p, 0);
    CHECK(ph[2] == doctest::Approx(0.5).epsilon(1e-12));
    TripleSet kb;
    kb.add({2, 0, 4});
    kb.add({3, 0, 5});
    const auto pairs = cwa_assumption_pairs(p, kb, 0, 1, 2, 2);
    REQUIRE(pairs.size() == 2);
    CHECK(pairs[0].a_h == 3);
    CHECK(pairs[0].a_t == 5);
    CHECK(std::abs(pairs[0].rank_score - 0.16) <= 1e-12);
    CHECK(pairs[1].a_h == 2);
    CHECK(pairs[1].a_t == 4);
    CHECK(std::abs(pairs[1].rank_score - 0.10) <= 1e-12);

    PredictOptions opts;
    opts.n_h = 2;
    opts.n_t = 2;
    opts.mode = AssumptionMode::cwa;
    opts.kb = &kb;
    const auto pred = predict_relation(p, 0, 1, opts);
    CHECK_FALSE(pred.cwa_fallback);
    REQUIRE(pred.records.size() == 2);
    for (const auto& r : pred.records) {
        CHECK(r.kb_verified);
        CHECK(r.posterior.probs[0] == 1.0);
    }
    const auto rep = extract_rationales(pred, {0, 0, 1}, 5);
    REQUIRE(rep.rationales.size() == 2);
    for (const auto& r : rep.rationales) CHECK(kb.contains({r.head, r.relation, r.tail}));
}

TEST_CASE("closed-world fallback and missing kb") {
    const auto p = cwa_world();
    TripleSet kb;
    kb.add({0, 0, 1});
    PredictOptions opts;
    opts.n_h = 2;
    opts.n_t = 2;
    opts.mode = AssumptionMode::cwa;
    opts.kb = &kb;
    const auto pred = predict_relation(p, 0, 1, opts);
    CHECK(pred.cwa_fallback);
    CHECK(pred.records.size() == 4);
    const auto rep = extract_rationales(pred, {0, 0, 1}, 5);
    CHECK(rep.cwa_fallback);
    CHECK(rep.rationales.empty());

    opts.mode = AssumptionMode::owa;
    const auto owa = predict_relation(p, 0, 1, opts);
    CHECK(owa.probability == pred.probability);
    CHECK_FALSE(owa.cwa_fallback);

    opts.mode = AssumptionMode::cwa;
    opts.kb = nullptr;
    CHECK_THROWS_AS(predict_relation(p, 0, 1, opts), DataError);
}

TEST_CASE("prediction gradients match finite differences") {
    GradCheckInstance inst;
    for (std::uint64_t seed : {7, 8}) {
        inst.seed = seed;
        const auto report = grad_check(LossKind::prediction, inst);
        for (const auto& t : report.tensors) CHECK_MESSAGE(t.pass, t.tensor, " ", t.max_rel_error);
        CHECK(report.pass);
    }
}
