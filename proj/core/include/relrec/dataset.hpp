#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "relrec/graph.hpp"

namespace relrec {

using RelationId = std::uint32_t;

/// Forward relation names. Reverse rows are named `<name>_inv`, the threshold row "NA".
class RelationSchema {
public:
    RelationSchema() = default;
    explicit RelationSchema(std::vector<std::string> names);

    RelationId add(std::string_view name);
    std::optional<RelationId> find(std::string_view name) const;
    /// Throws LookupError for unknown names.
    RelationId id(std::string_view name) const;

    std::size_t size() const noexcept { return names_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }

    /// Name of any relation row: forward, reverse or NA.
    std::string row_name(std::size_t row) const;

    friend bool operator==(const RelationSchema& a, const RelationSchema& b) {
        return a.names_ == b.names_;
    }

    static constexpr std::string_view kNaName = "NA";
    static constexpr std::string_view kReverseSuffix = "_inv";

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, RelationId> index_;
};

struct Triple {
    EntityId head;
    RelationId relation;
    EntityId tail;

    friend bool operator==(const Triple&, const Triple&) = default;
    friend auto operator<=>(const Triple&, const Triple&) = default;
};

/// Duplicate-free triple collection with per-relation argument pools.
class TripleSet {
public:
    TripleSet() = default;

    /// Returns false if the triple was already present.
    bool add(const Triple& t);
    bool contains(const Triple& t) const;
    /// Relations r with (head, r, tail) in the set, ascending.
    std::vector<RelationId> relations_between(EntityId head, EntityId tail) const;

    const std::vector<Triple>& triples() const noexcept { return triples_; }
    std::size_t size() const noexcept { return triples_.size(); }
    bool empty() const noexcept { return triples_.empty(); }

    /// Distinct entities seen as head (tail) of `r`, ascending.
    std::vector<EntityId> head_pool(RelationId r) const;
    std::vector<EntityId> tail_pool(RelationId r) const;

    bool augmented() const noexcept { return augmented_; }
    /// Copy with (t, r + n_rel, h) added for every forward (h, r, t).
    TripleSet with_reverse(std::size_t n_rel) const;

private:
    static std::uint64_t pair_key(EntityId h, EntityId t) {
        return (static_cast<std::uint64_t>(h) << 32) | t;
    }

    std::vector<Triple> triples_;
    std::unordered_map<std::uint64_t, std::vector<RelationId>> by_pair_;
    bool augmented_ = false;
};

struct LabeledPair {
    EntityId head;
    EntityId tail;
    int label;  // 0 or 1
    RelationId relation;

    friend bool operator==(const LabeledPair&, const LabeledPair&) = default;
};

/// Whether loaders may extend the schema with relation names they have not seen.
enum class SchemaPolicy { extend, fixed };

/// `head<TAB>relation<TAB>tail`. Unknown terms (and, under SchemaPolicy::fixed, unknown
/// relations) are collected and reported together in one DataError.
TripleSet load_triples(const std::filesystem::path& path, const Vocab& vocab,
                       RelationSchema& schema, SchemaPolicy policy = SchemaPolicy::extend);
void write_triples(const TripleSet& triples, const Vocab& vocab, const RelationSchema& schema,
                   std::ostream& out);

/// `head<TAB>tail<TAB>label<TAB>relation`, label in {0, 1}.
std::vector<LabeledPair> load_pairs(const std::filesystem::path& path, const Vocab& vocab,
                                    RelationSchema& schema,
                                    SchemaPolicy policy = SchemaPolicy::extend);
void write_pairs(const std::vector<LabeledPair>& pairs, const Vocab& vocab,
                 const RelationSchema& schema, std::ostream& out);

}  // namespace relrec
