#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <string_view>

#include "relrec/tensor.hpp"

namespace relrec {

/// Relation rows: forward [0, n_rel), reverse [n_rel, 2·n_rel), NA at 2·n_rel.
struct ModelDims {
    std::size_t d = 128;
    std::size_t d_p = 128;
    std::size_t d_a = 128;
    std::size_t n_rel = 1;

    std::size_t n_rel_total() const noexcept { return 2 * n_rel + 1; }
    std::size_t na_index() const noexcept { return 2 * n_rel; }
    std::size_t reverse_of(std::size_t k) const noexcept { return k + n_rel; }

    /// Throws DataError unless every dimension is positive.
    void validate() const;

    friend bool operator==(const ModelDims&, const ModelDims&) = default;
};

enum class Tensor : std::size_t {
    entity_emb,
    context_emb,
    relation_emb,
    proj_weight,  // 3d × d_p, maps [υ_h; υ_t; a] to the assumption representation
    proj_bias,    // 1 × d_p
    attn_weight,  // d_a × d_p
    attn_bias,    // 1 × d_a
    attn_vector,  // 1 × d_a
    pred_weight,  // 1 × d_p
    pred_bias,    // 1 × 1
};

inline constexpr std::size_t kNumTensors = 10;

inline constexpr std::array<std::string_view, kNumTensors> kTensorNames = {
    "entity_emb", "context_emb", "relation_emb", "proj_weight", "proj_bias",
    "attn_weight", "attn_bias",  "attn_vector",  "pred_weight", "pred_bias",
};

constexpr std::string_view tensor_name(Tensor t) {
    return kTensorNames[static_cast<std::size_t>(t)];
}

struct ModelParams {
    std::array<Matrix, kNumTensors> tensors;

    Matrix& operator[](Tensor t) { return tensors[static_cast<std::size_t>(t)]; }
    const Matrix& operator[](Tensor t) const { return tensors[static_cast<std::size_t>(t)]; }

    Matrix& entity_emb() { return (*this)[Tensor::entity_emb]; }
    const Matrix& entity_emb() const { return (*this)[Tensor::entity_emb]; }
    Matrix& context_emb() { return (*this)[Tensor::context_emb]; }
    const Matrix& context_emb() const { return (*this)[Tensor::context_emb]; }
    Matrix& relation_emb() { return (*this)[Tensor::relation_emb]; }
    const Matrix& relation_emb() const { return (*this)[Tensor::relation_emb]; }

    std::size_t vocab_size() const { return entity_emb().rows(); }

    /// Zero tensors with the same shapes as `other`.
    static ModelParams zeros_like(const ModelParams& other);
    /// Zero tensors shaped for (dims, vocab_size).
    static ModelParams zeros(const ModelDims& dims, std::size_t vocab_size);

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

/// Gradient accumulator. Only tensors marked in `touched` take part in an optimizer step.
struct GradSet {
    ModelParams grads;
    std::bitset<kNumTensors> touched;

    explicit GradSet(const ModelParams& like) : grads(ModelParams::zeros_like(like)) {}

    Matrix& operator[](Tensor t) {
        touched.set(static_cast<std::size_t>(t));
        return grads[t];
    }
    const Matrix& operator[](Tensor t) const { return grads[t]; }
    bool is_touched(Tensor t) const { return touched.test(static_cast<std::size_t>(t)); }

    void clear();
};

/// Embeddings uniform in ±0.5/d, dense weights Glorot-uniform, biases zero.
ModelParams init_params(const ModelDims& dims, std::size_t vocab_size, std::uint64_t seed);

struct AdamState {
    struct Moments {
        Matrix m;
        Matrix v;
        std::uint64_t step = 0;

        friend bool operator==(const Moments&, const Moments&) = default;
    };

    std::array<Moments, kNumTensors> moments;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    AdamState(const ModelParams& params, double lr, double beta1 = 0.9, double beta2 = 0.999,
              double eps = 1e-8);

    /// Total number of tensor updates applied so far.
    std::uint64_t steps() const;

    friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// Bias-corrected Adam update of every touched tensor. Untouched tensors keep both
/// their values and their moments. Throws DivergenceError naming the first tensor
/// with a non-finite gradient, before anything is modified.
void adam_step(ModelParams& params, const GradSet& grads, AdamState& state);

}  // namespace relrec
