#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

namespace relrec {

using EntityId = std::uint32_t;

/// Bijection between term strings and dense ids [0, size()).
class Vocab {
public:
    Vocab() = default;
    explicit Vocab(std::vector<std::string> terms);

    /// Returns the id of `term`, inserting it at the end if absent.
    EntityId add(std::string_view term);

    std::optional<EntityId> find(std::string_view term) const;
    /// Throws LookupError for unknown terms.
    EntityId id(std::string_view term) const;
    const std::string& term(EntityId id) const;

    std::size_t size() const noexcept { return terms_.size(); }
    const std::vector<std::string>& terms() const noexcept { return terms_; }

    /// Terms ordered by edit distance to `query` (ties alphabetical), at most `limit` of them.
    std::vector<std::string> nearest(std::string_view query, std::size_t limit) const;

    /// FNV-1a over the ordered term list.
    std::uint64_t hash() const;

    friend bool operator==(const Vocab& a, const Vocab& b) { return a.terms_ == b.terms_; }

private:
    std::vector<std::string> terms_;
    std::unordered_map<std::string, EntityId> index_;
};

struct CoocEdge {
    EntityId i;  // i < j
    EntityId j;
    std::uint64_t count;

    friend bool operator==(const CoocEdge&, const CoocEdge&) = default;
};

/// Undirected co-occurrence graph with merged counts and incident-count marginals.
struct CoocGraph {
    Vocab vocab;
    std::vector<CoocEdge> edges;  // sorted by (i, j)
    std::vector<std::uint64_t> marginals;
    std::uint64_t total = 0;
    std::size_t self_loops_dropped = 0;

    std::size_t num_entities() const noexcept { return vocab.size(); }
};

/// Builds a graph from raw (a, b, count) triples, merging duplicates and dropping self-loops.
/// `vocab` may already hold terms; ids of the triples must index into it.
CoocGraph build_cooc_graph(Vocab vocab,
                           const std::vector<std::tuple<EntityId, EntityId, std::uint64_t>>& raw);

/// Reads `term_a<TAB>term_b<TAB>count` lines. Gzip-compressed files are detected and
/// decompressed transparently. Blank lines and lines starting with '#' are skipped.
CoocGraph load_cooc_graph(const std::filesystem::path& path);

/// Parses the same format from an in-memory stream. `source` is used in error messages.
CoocGraph read_cooc_graph(std::istream& in, const std::string& source = "<stream>");

/// Writes the merged edge list in (i, j) order using the input format.
void write_cooc_graph(const CoocGraph& graph, std::ostream& out);
void save_cooc_graph(const CoocGraph& graph, const std::filesystem::path& path);

struct PpmiEntry {
    EntityId neighbor;
    double value;  // > 0
};

struct PpmiMatrix {
    std::vector<std::vector<PpmiEntry>> rows;  // each row sorted by neighbor id

    std::size_t num_entities() const noexcept { return rows.size(); }
    /// 0 when no positive entry is stored.
    double at(EntityId i, EntityId j) const;
};

/// ppmi(i, j) = max(0, ln(c_ij * C / (m_i * m_j))); only positive values are stored.
PpmiMatrix compute_ppmi(const CoocGraph& graph);

struct EmpiricalDist {
    std::vector<std::pair<EntityId, double>> support;
};

/// Row-normalized PPMI. std::nullopt when the row has no positive entry.
std::optional<EmpiricalDist> empirical_context_dist(const PpmiMatrix& ppmi, EntityId e);

/// empirical_context_dist for every entity.
std::vector<std::optional<EmpiricalDist>> empirical_context_dists(const PpmiMatrix& ppmi);

}  // namespace relrec
