#include <cmath>
#include <limits>

#include "doctest.h"
#include "relrec/errors.hpp"
#include "relrec/params.hpp"

using namespace relrec;

TEST_CASE("dims layout") {
    ModelDims d{8, 6, 5, 3};
    CHECK(d.n_rel_total() == 7);
    CHECK(d.na_index() == 6);
    CHECK(d.reverse_of(1) == 4);
    CHECK(ModelDims{}.d == 128);
    CHECK_THROWS_AS((ModelDims{0, 1, 1, 1}.validate()), DataError);
    CHECK_THROWS_AS((ModelDims{1, 1, 1, 0}.validate()), DataError);
}

TEST_CASE("init shapes, determinism and zero biases") {
    const ModelDims d{8, 6, 5, 3};
    const auto a = init_params(d, 11, 42);
    const auto b = init_params(d, 11, 42);
    CHECK(a == b);
    CHECK_FALSE(a == init_params(d, 11, 43));
    CHECK(a.entity_emb().rows() == 11);
    CHECK(a.relation_emb().rows() == 7);
    CHECK(a[Tensor::proj_weight].rows() == 24);
    CHECK(a[Tensor::proj_weight].cols() == 6);
    CHECK(a[Tensor::attn_weight].rows() == 5);
    CHECK(a[Tensor::attn_weight].cols() == 6);
    CHECK(a[Tensor::pred_bias].size() == 1);
    for (auto t : {Tensor::proj_bias, Tensor::attn_bias, Tensor::pred_bias})
        for (Real x : a[t].flat()) CHECK(x == 0.0);
    CHECK_THROWS_AS(init_params(d, 0, 1), DataError);
}

TEST_CASE("init bounds hold for every entry across seeds") {
    const ModelDims d{10, 7, 4, 2};
    const double emb = 0.5 / 10;
    auto glorot = [](double in, double out) { return std::sqrt(6.0 / (in + out)); };
    for (std::uint64_t seed = 0; seed < 50; ++seed) {
        const auto p = init_params(d, 9, seed);
        auto within = [](const Matrix& m, double bound) {
            for (Real x : m.flat())
                if (std::abs(x) > bound) return false;
            return true;
        };
        CHECK(within(p.entity_emb(), emb));
        CHECK(within(p.context_emb(), emb));
        CHECK(within(p.relation_emb(), emb));
        CHECK(within(p[Tensor::proj_weight], glorot(30, 7)));
        CHECK(within(p[Tensor::attn_weight], glorot(7, 4)));
        CHECK(within(p[Tensor::attn_vector], glorot(4, 1)));
        CHECK(within(p[Tensor::pred_weight], glorot(7, 1)));
    }
}

TEST_CASE("adam first step on a scalar") {
    ModelParams p = ModelParams::zeros({1, 1, 1, 1}, 1);
    AdamState s(p, 1e-3);
    GradSet g(p);
    g[Tensor::pred_bias](0, 0) = 1.0;
    adam_step(p, g, s);
    // t = 1: m̂ = 1, v̂ = 1, so the move is lr / (1 + eps).
    const double expected = -1e-3 / (1.0 + 1e-8);
    CHECK(p[Tensor::pred_bias](0, 0) == doctest::Approx(expected).epsilon(1e-15));
    CHECK(std::abs(p[Tensor::pred_bias](0, 0) + 0.001) < 1e-10);
    CHECK(s.moments[static_cast<std::size_t>(Tensor::pred_bias)].step == 1);
    CHECK(s.steps() == 1);
}

TEST_CASE("adam with zero gradients keeps parameters and decays moments") {
    ModelParams p = init_params({3, 3, 3, 1}, 4, 1);
    const ModelParams before = p;
    AdamState s(p, 1e-2);
    GradSet g(p);
    g[Tensor::entity_emb];  // touched, all zero
    adam_step(p, g, s);
    CHECK(p == before);

    g.clear();
    g[Tensor::entity_emb](0, 0) = 2.0;
    adam_step(p, g, s);
    const auto idx = static_cast<std::size_t>(Tensor::entity_emb);
    const double m1 = s.moments[idx].m(0, 0);
    const double v1 = s.moments[idx].v(0, 0);
    g.clear();
    g[Tensor::entity_emb];
    adam_step(p, g, s);
    CHECK(s.moments[idx].m(0, 0) == doctest::Approx(0.9 * m1));
    CHECK(s.moments[idx].v(0, 0) == doctest::Approx(0.999 * v1));
}

TEST_CASE("adam leaves untouched tensors alone") {
    ModelParams p = init_params({3, 3, 3, 1}, 4, 1);
    const ModelParams before = p;
    AdamState s(p, 1e-2);
    GradSet g(p);
    g[Tensor::context_emb](1, 1) = 1.0;
    adam_step(p, g, s);
    CHECK(p.entity_emb() == before.entity_emb());
    CHECK(p.relation_emb() == before.relation_emb());
    CHECK_FALSE(p.context_emb() == before.context_emb());
    CHECK(s.moments[static_cast<std::size_t>(Tensor::entity_emb)].step == 0);
}

TEST_CASE("adam is deterministic") {
    ModelParams p1 = init_params({3, 3, 3, 1}, 4, 9), p2 = p1;
    AdamState s1(p1, 1e-2), s2(p2, 1e-2);
    GradSet g(p1);
    g[Tensor::relation_emb](2, 1) = -0.3;
    g[Tensor::proj_weight](4, 0) = 0.7;
    adam_step(p1, g, s1);
    adam_step(p2, g, s2);
    CHECK(p1 == p2);
    CHECK(s1 == s2);
}

TEST_CASE("non-finite gradient names the tensor and changes nothing") {
    ModelParams p = init_params({3, 3, 3, 1}, 4, 1);
    const ModelParams before = p;
    AdamState s(p, 1e-2);
    const AdamState s_before = s;
    GradSet g(p);
    g[Tensor::entity_emb](0, 0) = 1.0;
    g[Tensor::attn_weight](1, 2) = std::numeric_limits<double>::quiet_NaN();
    try {
        adam_step(p, g, s);
        FAIL("expected divergence");
    } catch (const DivergenceError& e) {
        CHECK(std::string(e.what()).find("attn_weight") != std::string::npos);
    }
    CHECK(p == before);
    CHECK(s == s_before);
}

TEST_CASE("gradient set tracks touched tensors") {
    ModelParams p = ModelParams::zeros({2, 2, 2, 1}, 3);
    GradSet g(p);
    CHECK_FALSE(g.is_touched(Tensor::entity_emb));
    g[Tensor::entity_emb](0, 0) = 1;
    CHECK(g.is_touched(Tensor::entity_emb));
    g.clear();
    CHECK_FALSE(g.is_touched(Tensor::entity_emb));
    CHECK(g.grads.entity_emb()(0, 0) == 0);
}
