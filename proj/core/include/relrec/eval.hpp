#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "relrec/dataset.hpp"
#include "relrec/graph.hpp"

namespace relrec {

struct DatasetSplit {
    std::vector<LabeledPair> train;
    std::vector<LabeledPair> dev;
    std::vector<LabeledPair> test;
};

/// Stratified, seed-deterministic split. Split sizes follow the ratios over the whole
/// set; positives and negatives are each divided with the same ratios.
DatasetSplit split_dataset(std::span<const LabeledPair> pairs,
                           std::array<double, 3> ratios = {0.70, 0.15, 0.15},
                           std::uint64_t seed = 1);

using EntityPair = std::pair<EntityId, EntityId>;

/// As many distinct negatives as positives, heads drawn from `head_pool` and tails from
/// `tail_pool`. A negative never equals a positive or an entry of `exclude`.
/// Throws DataError when the pools cannot supply enough pairs.
std::vector<EntityPair> sample_negative_pairs(std::span<const EntityPair> positives,
                                              std::span<const EntityId> head_pool,
                                              std::span<const EntityId> tail_pool,
                                              std::uint64_t seed,
                                              std::span<const EntityPair> exclude = {});

struct Metrics {
    double precision = 0;
    double recall = 0;
    double f1 = 0;
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Binary metrics with "positive" meaning probability ≥ threshold. F1 is 0 when
/// precision + recall is 0.
Metrics f1_score(std::span<const double> probabilities, std::span<const int> labels,
                 double threshold = 0.5);

struct SyntheticSpec {
    std::size_t n_entities = 300;
    std::size_t n_clusters = 6;
    std::size_t n_rel = 4;
    double density = 0.3;          // edge probability inside a cluster
    double cross_density = 0.05;   // edge probability between rule-linked clusters
    double noise = 0.02;           // edge probability between unlinked clusters
    double signal_count = 8.0;     // mean extra count of a signal edge
    double noise_count = 1.0;      // mean extra count of a noise edge
    std::size_t edges_per_relation = 2;
    double triple_density = 0.1;   // fraction of rule-satisfying pairs stored as triples
    std::uint64_t seed = 1;
};

struct RuleEdge {
    std::size_t head_cluster;
    std::size_t tail_cluster;
    RelationId relation;

    friend bool operator==(const RuleEdge&, const RuleEdge&) = default;
};

/// Planted-cluster world: every label and triple follows `rule` exactly.
struct SyntheticWorld {
    SyntheticSpec spec;
    std::vector<std::size_t> cluster;  // per entity
    std::vector<RuleEdge> rule;
    CoocGraph graph;
    RelationSchema schema;
    TripleSet triples;                 // all rule-true triples that were sampled
    std::vector<LabeledPair> pairs;    // balanced labels for `target`
    RelationId target = 0;

    bool rule_holds(EntityId head, RelationId relation, EntityId tail) const;
};

/// Throws DataError on degenerate parameters (density 0, fewer than two clusters, ...).
SyntheticWorld generate_synthetic(const SyntheticSpec& spec);

/// Writes graph.tsv, triples.tsv, pairs.tsv, clusters.tsv and rule.tsv into `dir`.
void write_synthetic(const SyntheticWorld& world, const std::filesystem::path& dir);

/// Reloads a directory written by write_synthetic and counts labelled pairs and triples
/// that disagree with the stored cluster rule.
std::size_t check_synthetic_files(const std::filesystem::path& dir);

}  // namespace relrec
