#include "relrec/params.hpp"

#include <cmath>
#include <random>
#include <string>

#include "relrec/errors.hpp"

namespace relrec {

void ModelDims::validate() const {
    if (d == 0 || d_p == 0 || d_a == 0 || n_rel == 0)
        throw DataError("model dimensions must be positive");
}

ModelParams ModelParams::zeros_like(const ModelParams& other) {
    ModelParams p;
    for (std::size_t i = 0; i < kNumTensors; ++i)
        p.tensors[i] = Matrix(other.tensors[i].rows(), other.tensors[i].cols());
    return p;
}

ModelParams ModelParams::zeros(const ModelDims& dims, std::size_t vocab_size) {
    ModelParams p;
    p[Tensor::entity_emb] = Matrix(vocab_size, dims.d);
    p[Tensor::context_emb] = Matrix(vocab_size, dims.d);
    p[Tensor::relation_emb] = Matrix(dims.n_rel_total(), dims.d);
    p[Tensor::proj_weight] = Matrix(3 * dims.d, dims.d_p);
    p[Tensor::proj_bias] = Matrix(1, dims.d_p);
    p[Tensor::attn_weight] = Matrix(dims.d_a, dims.d_p);
    p[Tensor::attn_bias] = Matrix(1, dims.d_a);
    p[Tensor::attn_vector] = Matrix(1, dims.d_a);
    p[Tensor::pred_weight] = Matrix(1, dims.d_p);
    p[Tensor::pred_bias] = Matrix(1, 1);
    return p;
}

void GradSet::clear() {
    for (auto& t : grads.tensors) t.set_zero();
    touched.reset();
}

ModelParams init_params(const ModelDims& dims, std::size_t vocab_size, std::uint64_t seed) {
    dims.validate();
    if (vocab_size == 0) throw DataError("cannot initialise parameters for an empty vocabulary");
    ModelParams p = ModelParams::zeros(dims, vocab_size);
    std::mt19937_64 rng(seed);

    auto fill_uniform = [&rng](Matrix& m, double bound) {
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& x : m.flat()) x = dist(rng);
    };
    const double emb_bound = 0.5 / static_cast<double>(dims.d);
    auto glorot = [](std::size_t fan_in, std::size_t fan_out) {
        return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    };

    fill_uniform(p[Tensor::entity_emb], emb_bound);
    fill_uniform(p[Tensor::context_emb], emb_bound);
    fill_uniform(p[Tensor::relation_emb], emb_bound);
    fill_uniform(p[Tensor::proj_weight], glorot(3 * dims.d, dims.d_p));
    fill_uniform(p[Tensor::attn_weight], glorot(dims.d_p, dims.d_a));
    fill_uniform(p[Tensor::attn_vector], glorot(dims.d_a, 1));
    fill_uniform(p[Tensor::pred_weight], glorot(dims.d_p, 1));
    return p;
}

AdamState::AdamState(const ModelParams& params, double lr_, double beta1_, double beta2_,
                     double eps_)
    : lr(lr_), beta1(beta1_), beta2(beta2_), eps(eps_) {
    for (std::size_t i = 0; i < kNumTensors; ++i) {
        const auto& t = params.tensors[i];
        moments[i].m = Matrix(t.rows(), t.cols());
        moments[i].v = Matrix(t.rows(), t.cols());
    }
}

std::uint64_t AdamState::steps() const {
    std::uint64_t s = 0;
    for (const auto& m : moments) s += m.step;
    return s;
}

void adam_step(ModelParams& params, const GradSet& grads, AdamState& state) {
    for (std::size_t i = 0; i < kNumTensors; ++i) {
        if (!grads.touched.test(i)) continue;
        const auto& g = grads.grads.tensors[i];
        if (!g.same_shape(params.tensors[i]) || !g.same_shape(state.moments[i].m))
            throw DataError("gradient shape mismatch for " + std::string(kTensorNames[i]));
        for (Real x : g.flat())
            if (!std::isfinite(x))
                throw DivergenceError("non-finite gradient in " + std::string(kTensorNames[i]));
    }

    for (std::size_t i = 0; i < kNumTensors; ++i) {
        if (!grads.touched.test(i)) continue;
        auto& mom = state.moments[i];
        ++mom.step;
        const double t = static_cast<double>(mom.step);
        const double c1 = 1.0 - std::pow(state.beta1, t);
        const double c2 = 1.0 - std::pow(state.beta2, t);
        auto p = params.tensors[i].flat();
        auto g = grads.grads.tensors[i].flat();
        auto m = mom.m.flat();
        auto v = mom.v.flat();
        for (std::size_t k = 0; k < p.size(); ++k) {
            m[k] = state.beta1 * m[k] + (1.0 - state.beta1) * g[k];
            v[k] = state.beta2 * v[k] + (1.0 - state.beta2) * g[k] * g[k];
            const double m_hat = m[k] / c1;
            const double v_hat = v[k] / c2;
            p[k] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

}  // namespace relrec
