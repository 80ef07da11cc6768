#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "relrec/dataset.hpp"
#include "relrec/params.hpp"
#include "relrec/recall.hpp"
#include "relrec/relational.hpp"

namespace relrec {

enum class AssumptionMode { owa, cwa };

std::string_view to_string(AssumptionMode mode);
/// Accepts "owa"/"cwa" in any case; throws DataError otherwise.
AssumptionMode parse_assumption_mode(std::string_view text);

/// One association pair (a_h, a_t) with its relation posterior and attention state.
struct AssumptionRecord {
    EntityId a_h = 0;
    EntityId a_t = 0;
    std::optional<RelationId> top_relation;
    RelationPosterior posterior;
    bool kb_verified = false;  // posterior comes from stored triples, not from scores
    std::vector<Real> a_vec;   // d
    std::vector<Real> e_vec;   // d_p, entries in (−1, 1)
    std::vector<Real> attn_hidden;  // d_a
    double attn_logit = 0;
    double attn = 0;
    double score = 0;  // attn × posterior[top_relation], 0 without a top relation
};

struct Prediction {
    double probability = 0.5;
    double logit = 0;
    std::vector<Real> rationale_vec;  // attention-weighted sum of e_vec
    std::vector<AssumptionRecord> records;
    AssumptionMode mode = AssumptionMode::owa;
    bool cwa_fallback = false;
};

struct PredictOptions {
    std::size_t n_h = 32;
    std::size_t n_t = 32;
    PosteriorOptions posterior;
    AssumptionMode mode = AssumptionMode::owa;
    const TripleSet* kb = nullptr;  // required for CWA
};

/// a = Σ_k probs[k] · ξ_k over forward relations.
std::vector<Real> assumption_vector(const RelationPosterior& posterior, const Matrix& relation_emb);

/// tanh([υ_{a_h}; υ_{a_t}; a] · W_p + b_p)
std::vector<Real> pair_representation(const ModelParams& params, EntityId a_h, EntityId a_t,
                                      std::span<const Real> a_vec);

/// Softmax of vᵀ tanh(W_a e + b_a) over all given pair representations.
std::vector<double> attention_weights(const ModelParams& params,
                                      std::span<const std::vector<Real>> e_vecs);

/// A pair entering the assumption stage together with its posterior.
struct AssumptionInput {
    EntityId a_h;
    EntityId a_t;
    RelationPosterior posterior;
    bool kb_verified = false;
};

/// Representation, attention and prediction for an explicit list of assumption pairs.
Prediction predict_from_assumptions(const ModelParams& params, std::vector<AssumptionInput> pairs);

/// Full pipeline for a target pair: recall associations, form every N_h × N_t
/// assumption (OWA) or the kb-verified ones (CWA), attend and predict.
Prediction predict_relation(const ModelParams& params, EntityId e_h, EntityId e_t,
                            const PredictOptions& opts);

/// Closed-world selection: pairs from A(e_h) × A(e_t) holding some kb relation, ranked by
/// p(a_h|e_h)·p(a_t|e_t).
struct CwaPair {
    EntityId a_h;
    EntityId a_t;
    double rank_score;
    std::vector<RelationId> relations;
};

std::vector<CwaPair> cwa_assumption_pairs(const ModelParams& params, const TripleSet& kb,
                                          EntityId e_h, EntityId e_t, std::size_t n_h,
                                          std::size_t n_t);

/// Adds ∂L/∂θ to `grads` for a prediction whose loss has derivative `dlogit` with
/// respect to the pre-sigmoid logit. Survivor sets and association lists are held fixed.
void backprop_prediction(const ModelParams& params, const Prediction& pred, double dlogit,
                         PosteriorOptions opts, GradSet& grads);

struct Rationale {
    EntityId head;
    RelationId relation;
    EntityId tail;
    double score;
    double attn;
    double posterior;
};

struct RationaleReport {
    EntityId head = 0;
    EntityId tail = 0;
    RelationId relation = 0;
    double probability = 0;
    AssumptionMode mode = AssumptionMode::owa;
    bool cwa_fallback = false;
    std::vector<Rationale> rationales;  // score descending, at most K
};

/// Ranks (a_h, k, a_t) over every surviving relation k of every record by
/// attn · posterior[k], drops the target triple itself and keeps the top `k_max`.
RationaleReport extract_rationales(const Prediction& pred, const Triple& target, std::size_t k_max);

/// One JSON object, no trailing newline.
std::string report_to_json(const RationaleReport& report, const Vocab& vocab,
                           const RelationSchema& schema);
/// Target pair panel followed by the ranked rationale rows.
std::string format_report_table(const RationaleReport& report, const Vocab& vocab,
                                const RelationSchema& schema);

}  // namespace relrec
