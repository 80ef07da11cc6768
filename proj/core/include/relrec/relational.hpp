#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "relrec/dataset.hpp"
#include "relrec/params.hpp"

namespace relrec {

struct PosteriorOptions {
    /// Keep exp(s_NA) in the normaliser. Turning it off makes surviving probabilities
    /// sum to one; only meant for sensitivity checks.
    bool na_in_denominator = true;
};

/// Posterior over forward relations for one association pair, thresholded by NA.
struct RelationPosterior {
    std::vector<double> probs;   // n_rel entries; exactly 0 unless scores[k] > na_score
    std::vector<double> scores;  // s_k for forward relations
    double na_score = 0;
    std::vector<RelationId> survivors;  // ascending
    double na_mass = 0;  // exp(s_NA) / denominator, 0 when nothing survives

    /// Surviving relation with the largest probability (lowest id on ties).
    std::optional<RelationId> top() const;
};

/// f(h, r, t) = -‖υ_h + ξ_r − υ_t‖₁. `relation` is a row index (forward, reverse or NA).
double triple_score(const ModelParams& params, EntityId head, std::size_t relation,
                    EntityId tail);

RelationPosterior relation_posterior(const ModelParams& params, EntityId a_head, EntityId a_tail,
                                     PosteriorOptions opts = {});

/// Posterior from precomputed scores. Exposed for the closed-form checks.
RelationPosterior posterior_from_scores(std::vector<double> scores, double na_score,
                                        PosteriorOptions opts = {});

enum class CorruptSide { head, tail };

/// `n_neg` uniform replacements of one side, never equal to the gold entity on that
/// side. Sampling is with replacement.
std::vector<Triple> corrupt_triples(const Triple& gold, std::size_t n_neg, CorruptSide side,
                                    std::size_t vocab_size, std::mt19937_64& rng);
std::vector<Triple> corrupt_triples(const Triple& gold, std::size_t n_neg, CorruptSide side,
                                    std::size_t vocab_size, std::uint64_t seed);

/// −Σ ln p(h|t,r) − Σ ln p(t|h,r), each a softmax over the gold triple and its
/// corruptions. Corruptions are drawn from one generator seeded with `seed`, head side
/// then tail side for every triple in order. Adds entity/relation gradients to `grads`.
double relational_loss(const ModelParams& params, std::span<const Triple> batch,
                       std::size_t n_neg, std::uint64_t seed, GradSet* grads = nullptr);

}  // namespace relrec
