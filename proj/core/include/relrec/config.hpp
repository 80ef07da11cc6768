#pragma once

#include <cstddef>
#include <cstdint>

#include "relrec/params.hpp"
#include "relrec/rationale.hpp"

namespace relrec {

/// Every knob of joint training. Zero for d_p, d_a, n_h or n_t means "same as d" / "same as n_c".
struct TrainConfig {
    std::size_t d = 128;
    std::size_t d_p = 0;
    std::size_t d_a = 0;

    std::size_t b1 = 256;  // entities per recall step
    std::size_t b2 = 256;  // gold triples per relational step
    std::size_t b3 = 256;  // labelled pairs per prediction step
    std::size_t n_neg = 100;
    std::size_t n_c = 32;
    std::size_t n_h = 0;
    std::size_t n_t = 0;
    std::size_t top_k = 5;

    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    std::size_t patience = 10;
    std::size_t max_epochs = 200;
    std::uint64_t seed = 1;
    double threshold = 0.5;

    bool na_in_denominator = true;
    AssumptionMode mode = AssumptionMode::owa;

    bool recall_stage = true;
    bool relational_stage = true;
    bool prediction_stage = true;

    std::size_t proj_dim() const noexcept { return d_p ? d_p : d; }
    std::size_t attn_dim() const noexcept { return d_a ? d_a : proj_dim(); }
    std::size_t head_assocs() const noexcept { return n_h ? n_h : n_c; }
    std::size_t tail_assocs() const noexcept { return n_t ? n_t : n_c; }

    ModelDims dims(std::size_t n_rel) const { return {d, proj_dim(), attn_dim(), n_rel}; }

    PredictOptions predict_options(const TripleSet* kb = nullptr) const {
        PredictOptions o;
        o.n_h = head_assocs();
        o.n_t = tail_assocs();
        o.posterior.na_in_denominator = na_in_denominator;
        o.mode = mode;
        o.kb = kb;
        return o;
    }

    /// Throws DataError when a size is zero or a rate is out of range.
    void validate() const;

    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

}  // namespace relrec
