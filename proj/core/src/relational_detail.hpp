#pragma once

#include "relrec/params.hpp"
#include "relrec/relational.hpp"

namespace relrec::detail {

/// Adds coeff · ∂f(h, r, t)/∂θ to the entity and relation gradients (sign(0) = 0).
void add_score_grad(const ModelParams& params, EntityId h, std::size_t r, EntityId t,
                    double coeff, Matrix& g_ent, Matrix& g_rel);

}  // namespace relrec::detail
