#include "relrec/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>

#include <spdlog/spdlog.h>

#include "relrec/errors.hpp"
#include "text_io.hpp"

namespace relrec {

Vocab::Vocab(std::vector<std::string> terms) {
    for (auto& t : terms) {
        if (find(t)) throw DataError("duplicate vocabulary term: " + t);
        add(t);
    }
}

EntityId Vocab::add(std::string_view term) {
    if (auto it = index_.find(std::string(term)); it != index_.end()) return it->second;
    auto id = static_cast<EntityId>(terms_.size());
    terms_.emplace_back(term);
    index_.emplace(terms_.back(), id);
    return id;
}

std::optional<EntityId> Vocab::find(std::string_view term) const {
    auto it = index_.find(std::string(term));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

EntityId Vocab::id(std::string_view term) const {
    if (auto id = find(term)) return *id;
    throw LookupError("unknown term: " + std::string(term));
}

const std::string& Vocab::term(EntityId id) const {
    if (id >= terms_.size()) throw LookupError("entity id out of range: " + std::to_string(id));
    return terms_[id];
}

namespace {

std::size_t edit_distance(std::string_view a, std::string_view b) {
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    std::iota(prev.begin(), prev.end(), std::size_t{0});
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

}  // namespace

std::vector<std::string> Vocab::nearest(std::string_view query, std::size_t limit) const {
    std::vector<std::pair<std::size_t, EntityId>> scored;
    scored.reserve(terms_.size());
    for (EntityId i = 0; i < terms_.size(); ++i)
        scored.emplace_back(edit_distance(query, terms_[i]), i);
    limit = std::min(limit, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(limit),
                      scored.end(), [this](const auto& a, const auto& b) {
                          if (a.first != b.first) return a.first < b.first;
                          return terms_[a.second] < terms_[b.second];
                      });
    std::vector<std::string> out;
    for (std::size_t k = 0; k < limit; ++k) out.push_back(terms_[scored[k].second]);
    return out;
}

std::uint64_t Vocab::hash() const {
    std::uint64_t h = 1469598103934665603ULL;
    auto mix = [&h](unsigned char c) {
        h ^= c;
        h *= 1099511628211ULL;
    };
    for (const auto& t : terms_) {
        for (unsigned char c : t) mix(c);
        mix(0);
    }
    return h;
}

CoocGraph build_cooc_graph(Vocab vocab,
                           const std::vector<std::tuple<EntityId, EntityId, std::uint64_t>>& raw) {
    CoocGraph g;
    std::map<std::pair<EntityId, EntityId>, std::uint64_t> merged;
    for (auto [a, b, count] : raw) {
        if (a >= vocab.size() || b >= vocab.size())
            throw DataError("edge references an entity outside the vocabulary");
        if (count == 0) throw DataError("co-occurrence counts must be positive");
        if (a == b) {
            ++g.self_loops_dropped;
            continue;
        }
        merged[{std::min(a, b), std::max(a, b)}] += count;
    }
    g.vocab = std::move(vocab);
    g.marginals.assign(g.vocab.size(), 0);
    g.edges.reserve(merged.size());
    for (auto& [key, count] : merged) {
        g.edges.push_back({key.first, key.second, count});
        g.marginals[key.first] += count;
        g.marginals[key.second] += count;
    }
    g.total = std::accumulate(g.marginals.begin(), g.marginals.end(), std::uint64_t{0});
    if (g.self_loops_dropped > 0)
        spdlog::warn("dropped {} self-loop line(s)", g.self_loops_dropped);
    return g;
}

namespace {

struct GraphParser {
    std::string source;
    Vocab vocab;
    std::vector<std::tuple<EntityId, EntityId, std::uint64_t>> raw;

    void line(std::size_t no, std::string_view text) {
        if (detail::skippable(text)) return;
        auto f = detail::split_tabs(text);
        if (f.size() != 3)
            throw ParseError(source, no,
                             "expected 3 tab-separated fields, got " + std::to_string(f.size()));
        if (f[0].empty() || f[1].empty()) throw ParseError(source, no, "empty term");
        std::uint64_t count = 0;
        if (!detail::parse_u64(f[2], count) || count == 0)
            throw ParseError(source, no,
                             "count must be a positive integer, got '" + std::string(f[2]) + "'");
        EntityId a = vocab.add(f[0]);
        EntityId b = vocab.add(f[1]);
        raw.emplace_back(a, b, count);
    }

    CoocGraph finish() {
        if (raw.empty()) throw DataError(source + ": no edges");
        return build_cooc_graph(std::move(vocab), raw);
    }
};

}  // namespace

CoocGraph load_cooc_graph(const std::filesystem::path& path) {
    GraphParser p{path.string(), {}, {}};
    detail::for_each_line(path, [&](std::size_t no, std::string_view l) { p.line(no, l); });
    return p.finish();
}

CoocGraph read_cooc_graph(std::istream& in, const std::string& source) {
    GraphParser p{source, {}, {}};
    std::string l;
    std::size_t no = 0;
    while (std::getline(in, l)) {
        if (!l.empty() && l.back() == '\r') l.pop_back();
        p.line(++no, l);
    }
    return p.finish();
}

void write_cooc_graph(const CoocGraph& graph, std::ostream& out) {
    for (const auto& e : graph.edges)
        out << graph.vocab.term(e.i) << '\t' << graph.vocab.term(e.j) << '\t' << e.count << '\n';
}

void save_cooc_graph(const CoocGraph& graph, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    write_cooc_graph(graph, out);
}

double PpmiMatrix::at(EntityId i, EntityId j) const {
    const auto& row = rows.at(i);
    auto it = std::lower_bound(row.begin(), row.end(), j,
                               [](const PpmiEntry& e, EntityId id) { return e.neighbor < id; });
    return (it != row.end() && it->neighbor == j) ? it->value : 0.0;
}

PpmiMatrix compute_ppmi(const CoocGraph& graph) {
    if (graph.edges.empty() || graph.total == 0) throw DataError("PPMI of an empty graph");
    PpmiMatrix m;
    m.rows.resize(graph.num_entities());
    const double total = static_cast<double>(graph.total);
    for (const auto& e : graph.edges) {
        // Evaluated as a single ratio so that the value is symmetric in (i, j) and
        // invariant (up to rounding) under a common scaling of all counts.
        const double expected = static_cast<double>(graph.marginals[e.i]) *
                                static_cast<double>(graph.marginals[e.j]);
        const double pmi = std::log(static_cast<double>(e.count) * total / expected);
        if (pmi > 0.0) {
            m.rows[e.i].push_back({e.j, pmi});
            m.rows[e.j].push_back({e.i, pmi});
        }
    }
    for (auto& row : m.rows)
        std::sort(row.begin(), row.end(),
                  [](const PpmiEntry& a, const PpmiEntry& b) { return a.neighbor < b.neighbor; });
    return m;
}

std::optional<EmpiricalDist> empirical_context_dist(const PpmiMatrix& ppmi, EntityId e) {
    if (e >= ppmi.num_entities()) throw LookupError("entity id out of range: " + std::to_string(e));
    const auto& row = ppmi.rows[e];
    if (row.empty()) return std::nullopt;
    double sum = 0;
    for (const auto& entry : row) sum += entry.value;
    EmpiricalDist d;
    d.support.reserve(row.size());
    for (const auto& entry : row) d.support.emplace_back(entry.neighbor, entry.value / sum);
    return d;
}

std::vector<std::optional<EmpiricalDist>> empirical_context_dists(const PpmiMatrix& ppmi) {
    std::vector<std::optional<EmpiricalDist>> out;
    out.reserve(ppmi.num_entities());
    for (EntityId e = 0; e < ppmi.num_entities(); ++e) out.push_back(empirical_context_dist(ppmi, e));
    return out;
}

}  // namespace relrec
