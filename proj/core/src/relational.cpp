#include "relrec/relational.hpp"

#include <algorithm>
#include <cmath>

#include "relrec/errors.hpp"
#include "relational_detail.hpp"

namespace relrec {

namespace {

constexpr double sign(double x) { return (x > 0) - (x < 0); }

void check_args(const ModelParams& params, EntityId h, std::size_t r, EntityId t) {
    if (h >= params.vocab_size() || t >= params.vocab_size())
        throw LookupError("entity id out of range");
    if (r >= params.relation_emb().rows()) throw LookupError("relation row out of range");
}

double l1_score(std::span<const Real> h, std::span<const Real> r, std::span<const Real> t) {
    double s = 0;
    for (std::size_t i = 0; i < h.size(); ++i) s += std::abs(h[i] + r[i] - t[i]);
    return -s;
}

}  // namespace

namespace detail {

void add_score_grad(const ModelParams& params, EntityId h, std::size_t r, EntityId t,
                    double coeff, Matrix& g_ent, Matrix& g_rel) {
    const auto uh = params.entity_emb().row(h);
    const auto ut = params.entity_emb().row(t);
    const auto xr = params.relation_emb().row(r);
    auto gh = g_ent.row(h);
    auto gt = g_ent.row(t);
    auto gr = g_rel.row(r);
    for (std::size_t i = 0; i < uh.size(); ++i) {
        const double s = coeff * sign(uh[i] + xr[i] - ut[i]);
        gh[i] -= s;
        gr[i] -= s;
        gt[i] += s;
    }
}

}  // namespace detail

std::optional<RelationId> RelationPosterior::top() const {
    std::optional<RelationId> best;
    for (RelationId k : survivors)
        if (!best || probs[k] > probs[*best]) best = k;
    return best;
}

double triple_score(const ModelParams& params, EntityId head, std::size_t relation,
                    EntityId tail) {
    check_args(params, head, relation, tail);
    return l1_score(params.entity_emb().row(head), params.relation_emb().row(relation),
                    params.entity_emb().row(tail));
}

RelationPosterior posterior_from_scores(std::vector<double> scores, double na_score,
                                        PosteriorOptions opts) {
    RelationPosterior post;
    post.probs.assign(scores.size(), 0.0);
    post.na_score = na_score;
    double mx = na_score;
    for (RelationId k = 0; k < scores.size(); ++k) {
        if (scores[k] > na_score) {
            post.survivors.push_back(k);
            mx = std::max(mx, scores[k]);
        }
    }
    if (!post.survivors.empty()) {
        const double na_term = opts.na_in_denominator ? std::exp(na_score - mx) : 0.0;
        double denom = na_term;
        for (RelationId k : post.survivors) denom += std::exp(scores[k] - mx);
        for (RelationId k : post.survivors) post.probs[k] = std::exp(scores[k] - mx) / denom;
        post.na_mass = na_term / denom;
    }
    post.scores = std::move(scores);
    return post;
}

RelationPosterior relation_posterior(const ModelParams& params, EntityId a_head, EntityId a_tail,
                                     PosteriorOptions opts) {
    const std::size_t n_rel = (params.relation_emb().rows() - 1) / 2;
    std::vector<double> scores(n_rel);
    for (std::size_t k = 0; k < n_rel; ++k) scores[k] = triple_score(params, a_head, k, a_tail);
    const double na = triple_score(params, a_head, 2 * n_rel, a_tail);
    return posterior_from_scores(std::move(scores), na, opts);
}

std::vector<Triple> corrupt_triples(const Triple& gold, std::size_t n_neg, CorruptSide side,
                                    std::size_t vocab_size, std::mt19937_64& rng) {
    if (vocab_size < 2) throw DataError("corruption needs at least two entities");
    if (n_neg == 0) throw DataError("number of corruptions must be at least 1");
    const EntityId gold_id = side == CorruptSide::head ? gold.head : gold.tail;
    // Draw from vocab_size - 1 ids and skip over the gold one.
    std::uniform_int_distribution<EntityId> dist(0, static_cast<EntityId>(vocab_size - 2));
    std::vector<Triple> out;
    out.reserve(n_neg);
    for (std::size_t n = 0; n < n_neg; ++n) {
        EntityId e = dist(rng);
        if (e >= gold_id) ++e;
        Triple c = gold;
        (side == CorruptSide::head ? c.head : c.tail) = e;
        out.push_back(c);
    }
    return out;
}

std::vector<Triple> corrupt_triples(const Triple& gold, std::size_t n_neg, CorruptSide side,
                                    std::size_t vocab_size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return corrupt_triples(gold, n_neg, side, vocab_size, rng);
}

double relational_loss(const ModelParams& params, std::span<const Triple> batch,
                       std::size_t n_neg, std::uint64_t seed, GradSet* grads) {
    std::mt19937_64 rng(seed);
    Matrix* g_ent = grads ? &(*grads)[Tensor::entity_emb] : nullptr;
    Matrix* g_rel = grads ? &(*grads)[Tensor::relation_emb] : nullptr;
    double loss = 0;
    std::vector<double> f;
    for (const auto& gold : batch) {
        check_args(params, gold.head, gold.relation, gold.tail);
        for (auto side : {CorruptSide::head, CorruptSide::tail}) {
            auto cands = corrupt_triples(gold, n_neg, side, params.vocab_size(), rng);
            cands.insert(cands.begin(), gold);
            f.resize(cands.size());
            for (std::size_t x = 0; x < cands.size(); ++x)
                f[x] = triple_score(params, cands[x].head, cands[x].relation, cands[x].tail);
            const double mx = *std::max_element(f.begin(), f.end());
            double sum = 0;
            for (double v : f) sum += std::exp(v - mx);
            const double log_norm = mx + std::log(sum);
            loss -= f[0] - log_norm;
            if (!grads) continue;
            for (std::size_t x = 0; x < cands.size(); ++x) {
                const double coeff = std::exp(f[x] - log_norm) - (x == 0 ? 1.0 : 0.0);
                detail::add_score_grad(params, cands[x].head, cands[x].relation, cands[x].tail, coeff,
                               *g_ent, *g_rel);
            }
        }
    }
    return loss;
}

}  // namespace relrec
