#include "relrec/rationale.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include <fmt/format.h>

#include "json.hpp"
#include "relational_detail.hpp"
#include "relrec/errors.hpp"

namespace relrec {

namespace {

double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

std::size_t forward_relations(const ModelParams& params) {
    return (params.relation_emb().rows() - 1) / 2;
}

/// out += x · W[offset : offset + x.size(), :]
void add_row_times_block(std::span<const Real> x, const Matrix& w, std::size_t offset,
                         std::span<Real> out) {
    for (std::size_t r = 0; r < x.size(); ++r) axpy(x[r], w.row(offset + r), out);
}

/// out[r] += Σ_c W[offset + r][c] · y[c]
void add_block_times_col(const Matrix& w, std::size_t offset, std::span<const Real> y,
                         std::span<Real> out) {
    for (std::size_t r = 0; r < out.size(); ++r) out[r] += dot(w.row(offset + r), y);
}

/// W[offset + r][c] += x[r] · y[c]
void add_outer(std::span<const Real> x, std::span<const Real> y, Matrix& w, std::size_t offset) {
    for (std::size_t r = 0; r < x.size(); ++r) axpy(x[r], y, w.row(offset + r));
}

/// tanh(W_a e + b_a)
std::vector<Real> attention_hidden(const ModelParams& params, std::span<const Real> e) {
    const auto& wa = params[Tensor::attn_weight];
    const auto ba = params[Tensor::attn_bias].row(0);
    std::vector<Real> h(wa.rows());
    for (std::size_t a = 0; a < wa.rows(); ++a) h[a] = std::tanh(dot(wa.row(a), e) + ba[a]);
    return h;
}

void softmax_inplace(std::vector<double>& z) {
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0;
    for (auto& x : z) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (auto& x : z) x /= sum;
}

RelationPosterior kb_posterior(std::size_t n_rel, const std::vector<RelationId>& relations) {
    RelationPosterior post;
    post.probs.assign(n_rel, 0.0);
    for (RelationId k : relations) {
        post.probs[k] = 1.0 / static_cast<double>(relations.size());
        post.survivors.push_back(k);
    }
    return post;
}

}  // namespace

std::string_view to_string(AssumptionMode mode) {
    return mode == AssumptionMode::owa ? "OWA" : "CWA";
}

AssumptionMode parse_assumption_mode(std::string_view text) {
    std::string lower(text);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (lower == "owa") return AssumptionMode::owa;
    if (lower == "cwa") return AssumptionMode::cwa;
    throw DataError("unknown assumption mode '" + std::string(text) + "' (expected owa or cwa)");
}

std::vector<Real> assumption_vector(const RelationPosterior& posterior,
                                    const Matrix& relation_emb) {
    std::vector<Real> a(relation_emb.cols(), 0.0);
    for (RelationId k : posterior.survivors) axpy(posterior.probs[k], relation_emb.row(k), a);
    return a;
}

std::vector<Real> pair_representation(const ModelParams& params, EntityId a_h, EntityId a_t,
                                      std::span<const Real> a_vec) {
    const auto& w = params[Tensor::proj_weight];
    const std::size_t d = params.entity_emb().cols();
    if (a_vec.size() != d) throw DataError("assumption vector has the wrong dimension");
    auto bias = params[Tensor::proj_bias].row(0);
    std::vector<Real> u(bias.begin(), bias.end());
    add_row_times_block(params.entity_emb().row(a_h), w, 0, u);
    add_row_times_block(params.entity_emb().row(a_t), w, d, u);
    add_row_times_block(a_vec, w, 2 * d, u);
    for (auto& x : u) x = std::tanh(x);
    return u;
}

std::vector<double> attention_weights(const ModelParams& params,
                                      std::span<const std::vector<Real>> e_vecs) {
    if (e_vecs.empty()) throw DataError("attention over an empty assumption set");
    const auto v = params[Tensor::attn_vector].row(0);
    std::vector<double> g;
    g.reserve(e_vecs.size());
    for (const auto& e : e_vecs) g.push_back(dot(v, attention_hidden(params, e)));
    softmax_inplace(g);
    return g;
}

Prediction predict_from_assumptions(const ModelParams& params,
                                    std::vector<AssumptionInput> pairs) {
    if (pairs.empty()) throw DataError("prediction needs at least one assumption pair");
    const std::size_t d = params.entity_emb().cols();
    const std::size_t n_rel = forward_relations(params);
    const auto& w = params[Tensor::proj_weight];
    const std::size_t d_p = w.cols();

    // The projection splits into per-entity and per-relation parts, each computed once.
    std::map<EntityId, std::vector<Real>> head_part, tail_part;
    auto project = [&](std::map<EntityId, std::vector<Real>>& cache, EntityId e,
                       std::size_t offset) -> const std::vector<Real>& {
        auto [it, inserted] = cache.try_emplace(e);
        if (inserted) {
            it->second.assign(d_p, 0.0);
            add_row_times_block(params.entity_emb().row(e), w, offset, it->second);
        }
        return it->second;
    };
    std::vector<std::vector<Real>> rel_part(n_rel, std::vector<Real>(d_p, 0.0));
    for (std::size_t k = 0; k < n_rel; ++k)
        add_row_times_block(params.relation_emb().row(k), w, 2 * d, rel_part[k]);

    Prediction pred;
    pred.records.reserve(pairs.size());
    const auto bias = params[Tensor::proj_bias].row(0);
    const auto v = params[Tensor::attn_vector].row(0);
    std::vector<double> logits;
    logits.reserve(pairs.size());
    for (auto& in : pairs) {
        if (in.a_h >= params.vocab_size() || in.a_t >= params.vocab_size())
            throw LookupError("entity id out of range");
        AssumptionRecord rec;
        rec.a_h = in.a_h;
        rec.a_t = in.a_t;
        rec.kb_verified = in.kb_verified;
        rec.a_vec = assumption_vector(in.posterior, params.relation_emb());
        std::vector<Real> u(bias.begin(), bias.end());
        axpy(1.0, project(head_part, in.a_h, 0), u);
        axpy(1.0, project(tail_part, in.a_t, d), u);
        for (RelationId k : in.posterior.survivors) axpy(in.posterior.probs[k], rel_part[k], u);
        for (auto& x : u) x = std::tanh(x);
        rec.e_vec = std::move(u);
        rec.attn_hidden = attention_hidden(params, rec.e_vec);
        rec.attn_logit = dot(v, rec.attn_hidden);
        rec.top_relation = in.posterior.top();
        rec.posterior = std::move(in.posterior);
        logits.push_back(rec.attn_logit);
        pred.records.push_back(std::move(rec));
    }

    softmax_inplace(logits);
    pred.rationale_vec.assign(d_p, 0.0);
    for (std::size_t n = 0; n < pred.records.size(); ++n) {
        auto& rec = pred.records[n];
        rec.attn = logits[n];
        rec.score = rec.top_relation ? rec.attn * rec.posterior.probs[*rec.top_relation] : 0.0;
        axpy(rec.attn, rec.e_vec, pred.rationale_vec);
    }
    pred.logit = dot(params[Tensor::pred_weight].row(0), pred.rationale_vec) +
                 params[Tensor::pred_bias][0];
    pred.probability = sigmoid(pred.logit);
    return pred;
}

std::vector<CwaPair> cwa_assumption_pairs(const ModelParams& params, const TripleSet& kb,
                                          EntityId e_h, EntityId e_t, std::size_t n_h,
                                          std::size_t n_t) {
    const std::size_t n_rel = forward_relations(params);
    const auto heads = top_associations(params, e_h, n_h);
    const auto tails = top_associations(params, e_t, n_t);
    std::vector<CwaPair> out;
    for (auto [a_h, p_h] : heads.entries) {
        for (auto [a_t, p_t] : tails.entries) {
            auto rels = kb.relations_between(a_h, a_t);
            std::erase_if(rels, [n_rel](RelationId r) { return r >= n_rel; });
            if (!rels.empty()) out.push_back({a_h, a_t, p_h * p_t, std::move(rels)});
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const CwaPair& a, const CwaPair& b) {
        if (a.rank_score != b.rank_score) return a.rank_score > b.rank_score;
        return std::tie(a.a_h, a.a_t) < std::tie(b.a_h, b.a_t);
    });
    return out;
}

Prediction predict_relation(const ModelParams& params, EntityId e_h, EntityId e_t,
                            const PredictOptions& opts) {
    if (e_h >= params.vocab_size() || e_t >= params.vocab_size())
        throw LookupError("entity id out of range");
    if (opts.n_h == 0 || opts.n_t == 0) throw DataError("N_h and N_t must be at least 1");

    std::vector<AssumptionInput> inputs;
    bool fallback = false;
    if (opts.mode == AssumptionMode::cwa) {
        if (!opts.kb) throw DataError("closed-world prediction needs a knowledge base");
        const std::size_t n_rel = forward_relations(params);
        for (auto& p : cwa_assumption_pairs(params, *opts.kb, e_h, e_t, opts.n_h, opts.n_t))
            inputs.push_back({p.a_h, p.a_t, kb_posterior(n_rel, p.relations), true});
        fallback = inputs.empty();
    }
    if (inputs.empty()) {
        const auto heads = top_associations(params, e_h, opts.n_h);
        const auto tails = top_associations(params, e_t, opts.n_t);
        inputs.reserve(heads.size() * tails.size());
        for (auto [a_h, p_h] : heads.entries)
            for (auto [a_t, p_t] : tails.entries)
                inputs.push_back({a_h, a_t, relation_posterior(params, a_h, a_t, opts.posterior)});
    }
    Prediction pred = predict_from_assumptions(params, std::move(inputs));
    pred.mode = opts.mode;
    pred.cwa_fallback = fallback;
    return pred;
}

void backprop_prediction(const ModelParams& params, const Prediction& pred, double dlogit,
                         PosteriorOptions opts, GradSet& grads) {
    const std::size_t d = params.entity_emb().cols();
    const std::size_t n_rel = forward_relations(params);
    const auto& w = params[Tensor::proj_weight];
    const std::size_t d_p = w.cols();
    const auto& wa = params[Tensor::attn_weight];
    const auto v = params[Tensor::attn_vector].row(0);
    const auto wr = params[Tensor::pred_weight].row(0);

    Matrix& g_ent = grads[Tensor::entity_emb];
    Matrix& g_rel = grads[Tensor::relation_emb];
    Matrix& g_w = grads[Tensor::proj_weight];
    auto g_b = grads[Tensor::proj_bias].row(0);
    Matrix& g_wa = grads[Tensor::attn_weight];
    auto g_ba = grads[Tensor::attn_bias].row(0);
    auto g_v = grads[Tensor::attn_vector].row(0);
    auto g_wr = grads[Tensor::pred_weight].row(0);
    auto g_br = grads[Tensor::pred_bias].row(0);

    // logit = W_r · r + b_r
    axpy(dlogit, pred.rationale_vec, g_wr);
    g_br[0] += dlogit;
    std::vector<Real> d_r(wr.begin(), wr.end());
    for (auto& x : d_r) x *= dlogit;

    // r = Σ attn_ij e_ij, attn = softmax(g)
    double avg = 0;
    std::vector<double> d_attn(pred.records.size());
    for (std::size_t n = 0; n < pred.records.size(); ++n) {
        d_attn[n] = dot(d_r, pred.records[n].e_vec);
        avg += pred.records[n].attn * d_attn[n];
    }

    std::vector<std::vector<Real>> rel_part(n_rel, std::vector<Real>(d_p, 0.0));
    for (std::size_t k = 0; k < n_rel; ++k)
        add_row_times_block(params.relation_emb().row(k), w, 2 * d, rel_part[k]);

    std::map<EntityId, std::vector<Real>> head_du, tail_du;
    std::vector<std::vector<Real>> rel_du(n_rel, std::vector<Real>(d_p, 0.0));
    std::vector<Real> de(d_p), d_pre(wa.rows()), du(d_p);
    for (std::size_t n = 0; n < pred.records.size(); ++n) {
        const auto& rec = pred.records[n];
        const double d_g = rec.attn * (d_attn[n] - avg);

        for (std::size_t c = 0; c < d_p; ++c) de[c] = rec.attn * d_r[c];
        // g = vᵀ h, h = tanh(W_a e + b_a)
        for (std::size_t a = 0; a < wa.rows(); ++a) {
            const double h = rec.attn_hidden[a];
            g_v[a] += d_g * h;
            d_pre[a] = d_g * v[a] * (1.0 - h * h);
            g_ba[a] += d_pre[a];
        }
        for (std::size_t a = 0; a < wa.rows(); ++a) {
            axpy(d_pre[a], rec.e_vec, g_wa.row(a));
            axpy(d_pre[a], wa.row(a), de);
        }
        // e = tanh(u)
        for (std::size_t c = 0; c < d_p; ++c) du[c] = de[c] * (1.0 - rec.e_vec[c] * rec.e_vec[c]);
        axpy(1.0, du, g_b);
        auto& hd = head_du[rec.a_h];
        if (hd.empty()) hd.assign(d_p, 0.0);
        axpy(1.0, du, hd);
        auto& td = tail_du[rec.a_t];
        if (td.empty()) td.assign(d_p, 0.0);
        axpy(1.0, du, td);

        // u ⊇ Σ_k probs_k ξ_k W3
        const auto& post = rec.posterior;
        for (RelationId k : post.survivors) axpy(post.probs[k], du, rel_du[k]);
        if (rec.kb_verified || post.survivors.empty()) continue;

        // Posterior backward with the survivor set held fixed.
        double mean = 0;
        std::vector<double> d_prob(post.survivors.size());
        for (std::size_t s = 0; s < post.survivors.size(); ++s) {
            const RelationId k = post.survivors[s];
            d_prob[s] = dot(du, rel_part[k]);
            mean += post.probs[k] * d_prob[s];
        }
        for (std::size_t s = 0; s < post.survivors.size(); ++s) {
            const RelationId k = post.survivors[s];
            const double ds = post.probs[k] * (d_prob[s] - mean);
            detail::add_score_grad(params, rec.a_h, k, rec.a_t, ds, g_ent, g_rel);
        }
        if (opts.na_in_denominator)
            detail::add_score_grad(params, rec.a_h, 2 * n_rel, rec.a_t, -post.na_mass * mean,
                                   g_ent, g_rel);
    }

    for (auto& [e, sum] : head_du) {
        add_outer(params.entity_emb().row(e), sum, g_w, 0);
        add_block_times_col(w, 0, sum, g_ent.row(e));
    }
    for (auto& [e, sum] : tail_du) {
        add_outer(params.entity_emb().row(e), sum, g_w, d);
        add_block_times_col(w, d, sum, g_ent.row(e));
    }
    for (std::size_t k = 0; k < n_rel; ++k) {
        add_outer(params.relation_emb().row(k), rel_du[k], g_w, 2 * d);
        add_block_times_col(w, 2 * d, rel_du[k], g_rel.row(k));
    }
}

RationaleReport extract_rationales(const Prediction& pred, const Triple& target,
                                   std::size_t k_max) {
    RationaleReport report;
    report.head = target.head;
    report.tail = target.tail;
    report.relation = target.relation;
    report.probability = pred.probability;
    report.mode = pred.mode;
    report.cwa_fallback = pred.cwa_fallback;
    // A fallback prediction has no kb-verified assumptions to report.
    if (pred.cwa_fallback) return report;

    std::vector<Rationale> cands;
    for (const auto& rec : pred.records) {
        for (RelationId k : rec.posterior.survivors) {
            const double p = rec.posterior.probs[k];
            if (p <= 0) continue;
            if (Triple{rec.a_h, k, rec.a_t} == target) continue;
            cands.push_back({rec.a_h, k, rec.a_t, rec.attn * p, rec.attn, p});
        }
    }
    std::sort(cands.begin(), cands.end(), [](const Rationale& a, const Rationale& b) {
        if (a.score != b.score) return a.score > b.score;
        return std::tie(a.head, a.tail, a.relation) < std::tie(b.head, b.tail, b.relation);
    });
    if (cands.size() > k_max) cands.resize(k_max);
    report.rationales = std::move(cands);
    return report;
}

std::string report_to_json(const RationaleReport& report, const Vocab& vocab,
                           const RelationSchema& schema) {
    nlohmann::ordered_json j;
    j["head"] = vocab.term(report.head);
    j["tail"] = vocab.term(report.tail);
    j["relation"] = schema.row_name(report.relation);
    j["mode"] = to_string(report.mode);
    j["probability"] = report.probability;
    if (report.mode == AssumptionMode::cwa) j["fallback"] = report.cwa_fallback;
    j["rationales"] = nlohmann::ordered_json::array();
    for (const auto& r : report.rationales) {
        j["rationales"].push_back({{"h", vocab.term(r.head)},
                                   {"r", schema.row_name(r.relation)},
                                   {"t", vocab.term(r.tail)},
                                   {"score", r.score},
                                   {"attn", r.attn},
                                   {"posterior", r.posterior}});
    }
    return j.dump();
}

std::string format_report_table(const RationaleReport& report, const Vocab& vocab,
                                 const RelationSchema& schema) {
    std::size_t wh = vocab.term(report.head).size();
    std::size_t wr = schema.row_name(report.relation).size();
    for (const auto& r : report.rationales) {
        wh = std::max(wh, vocab.term(r.head).size());
        wr = std::max(wr, schema.row_name(r.relation).size());
    }
    std::string out;
    out += fmt::format("Target ({})\n", to_string(report.mode));
    out += fmt::format("  {:<{}}  {:<{}}  {}    p = {:.4f}\n", vocab.term(report.head), wh,
                       schema.row_name(report.relation), wr, vocab.term(report.tail),
                       report.probability);
    if (report.cwa_fallback) out += "  (no kb-verified assumption; prediction used all pairs)\n";
    out += fmt::format("Rationales (top {})\n", report.rationales.size());
    if (report.rationales.empty()) out += "  (none)\n";
    for (std::size_t n = 0; n < report.rationales.size(); ++n) {
        const auto& r = report.rationales[n];
        out += fmt::format("  {:>2}. {:<{}}  {:<{}}  {}    score {:.4f}  attn {:.4f}  p {:.4f}\n",
                           n + 1, vocab.term(r.head), wh, schema.row_name(r.relation), wr,
                           vocab.term(r.tail), r.score, r.attn, r.posterior);
    }
    return out;
}

}  // namespace relrec
