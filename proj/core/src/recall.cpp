#include "relrec/recall.hpp"

#include <algorithm>
#include <cmath>

#include "relrec/errors.hpp"

namespace relrec {

namespace {

void softmax_inplace(std::vector<double>& z) {
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0;
    for (auto& x : z) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (auto& x : z) x /= sum;
}

void check_entity(const ModelParams& params, EntityId e) {
    if (e >= params.vocab_size())
        throw LookupError("entity id out of range: " + std::to_string(e));
}

}  // namespace

std::vector<double> association_probability(const ModelParams& params, EntityId e) {
    check_entity(params, e);
    const auto& ctx = params.context_emb();
    const auto query = params.entity_emb().row(e);
    std::vector<double> z(ctx.rows());
    for (std::size_t j = 0; j < ctx.rows(); ++j) z[j] = dot(ctx.row(j), query);
    softmax_inplace(z);
    return z;
}

double recall_loss(const ModelParams& params,
                   std::span<const std::optional<EmpiricalDist>> empirical,
                   std::span<const EntityId> batch, GradSet* grads) {
    const auto& ent = params.entity_emb();
    const auto& ctx = params.context_emb();
    Matrix* g_ent = grads ? &(*grads)[Tensor::entity_emb] : nullptr;
    Matrix* g_ctx = grads ? &(*grads)[Tensor::context_emb] : nullptr;

    double loss = 0;
    std::vector<double> z(ctx.rows());
    for (EntityId i : batch) {
        check_entity(params, i);
        if (i >= empirical.size() || !empirical[i])
            throw DataError("recall loss requested for an entity without empirical support");
        const auto ui = ent.row(i);
        for (std::size_t j = 0; j < ctx.rows(); ++j) z[j] = dot(ctx.row(j), ui);
        const double mx = *std::max_element(z.begin(), z.end());
        double sum = 0;
        for (double x : z) sum += std::exp(x - mx);
        const double log_norm = mx + std::log(sum);
        for (auto [j, target] : empirical[i]->support) loss -= target * (z[j] - log_norm);
        if (!grads) continue;

        // d loss / d logit_j = p_j - p̂_j (the empirical distribution sums to one).
        for (auto& x : z) x = std::exp(x - log_norm);
        for (auto [j, target] : empirical[i]->support) z[j] -= target;
        auto gi = g_ent->row(i);
        for (std::size_t j = 0; j < ctx.rows(); ++j) {
            axpy(z[j], ctx.row(j), gi);
            axpy(z[j], ui, g_ctx->row(j));
        }
    }
    return loss;
}

AssociationList top_associations(std::span<const double> probs, EntityId e, std::size_t n) {
    if (n == 0) throw DataError("number of associations must be at least 1");
    std::vector<EntityId> ids;
    ids.reserve(probs.size());
    for (EntityId j = 0; j < probs.size(); ++j)
        if (j != e) ids.push_back(j);
    n = std::min(n, ids.size());
    auto better = [&probs](EntityId a, EntityId b) {
        return probs[a] != probs[b] ? probs[a] > probs[b] : a < b;
    };
    std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n), ids.end(),
                      better);
    AssociationList out;
    out.entries.reserve(n);
    for (std::size_t k = 0; k < n; ++k) out.entries.emplace_back(ids[k], probs[ids[k]]);
    return out;
}

AssociationList top_associations(const ModelParams& params, EntityId e, std::size_t n) {
    auto probs = association_probability(params, e);
    return top_associations(probs, e, n);
}

}  // namespace relrec
