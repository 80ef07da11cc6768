#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "relrec/graph.hpp"
#include "relrec/params.hpp"

namespace relrec {

/// Top-N associations of an entity, by probability descending then id ascending.
struct AssociationList {
    std::vector<std::pair<EntityId, double>> entries;

    std::size_t size() const noexcept { return entries.size(); }
};

/// p(·|e) = softmax_j(υ'_j · υ_e) over the whole vocabulary.
std::vector<double> association_probability(const ModelParams& params, EntityId e);

/// Cross entropy between the empirical (PPMI) and the model distribution, summed over
/// `batch`. Every entity in the batch must have a non-empty empirical distribution.
/// Gradients for entity_emb and context_emb are added to `grads` when non-null.
double recall_loss(const ModelParams& params,
                   std::span<const std::optional<EmpiricalDist>> empirical,
                   std::span<const EntityId> batch, GradSet* grads = nullptr);

/// The `n` most probable associations of `e`, never including `e` itself.
AssociationList top_associations(const ModelParams& params, EntityId e, std::size_t n);

/// Same selection from an already computed distribution.
AssociationList top_associations(std::span<const double> probs, EntityId e, std::size_t n);

}  // namespace relrec
