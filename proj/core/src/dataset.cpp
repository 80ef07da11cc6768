#include "relrec/dataset.hpp"

#include <algorithm>
#include <ostream>
#include <set>

#include "relrec/errors.hpp"
#include "text_io.hpp"

namespace relrec {

RelationSchema::RelationSchema(std::vector<std::string> names) {
    for (auto& n : names) {
        if (find(n)) throw DataError("duplicate relation name: " + n);
        add(n);
    }
}

RelationId RelationSchema::add(std::string_view name) {
    if (auto id = find(name)) return *id;
    if (name.empty()) throw DataError("empty relation name");
    if (name == kNaName) throw DataError("relation name 'NA' is reserved");
    auto id = static_cast<RelationId>(names_.size());
    names_.emplace_back(name);
    index_.emplace(names_.back(), id);
    return id;
}

std::optional<RelationId> RelationSchema::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

RelationId RelationSchema::id(std::string_view name) const {
    if (auto r = find(name)) return *r;
    throw LookupError("unknown relation: " + std::string(name));
}

std::string RelationSchema::row_name(std::size_t row) const {
    const std::size_t n = names_.size();
    if (row < n) return names_[row];
    if (row < 2 * n) return names_[row - n] + std::string(kReverseSuffix);
    if (row == 2 * n) return std::string(kNaName);
    throw LookupError("relation row out of range: " + std::to_string(row));
}

bool TripleSet::add(const Triple& t) {
    auto& rels = by_pair_[pair_key(t.head, t.tail)];
    if (std::find(rels.begin(), rels.end(), t.relation) != rels.end()) return false;
    rels.insert(std::upper_bound(rels.begin(), rels.end(), t.relation), t.relation);
    triples_.push_back(t);
    return true;
}

bool TripleSet::contains(const Triple& t) const {
    auto it = by_pair_.find(pair_key(t.head, t.tail));
    return it != by_pair_.end() &&
           std::binary_search(it->second.begin(), it->second.end(), t.relation);
}

std::vector<RelationId> TripleSet::relations_between(EntityId head, EntityId tail) const {
    auto it = by_pair_.find(pair_key(head, tail));
    if (it == by_pair_.end()) return {};
    return it->second;
}

std::vector<EntityId> TripleSet::head_pool(RelationId r) const {
    std::set<EntityId> pool;
    for (const auto& t : triples_)
        if (t.relation == r) pool.insert(t.head);
    return {pool.begin(), pool.end()};
}

std::vector<EntityId> TripleSet::tail_pool(RelationId r) const {
    std::set<EntityId> pool;
    for (const auto& t : triples_)
        if (t.relation == r) pool.insert(t.tail);
    return {pool.begin(), pool.end()};
}

TripleSet TripleSet::with_reverse(std::size_t n_rel) const {
    TripleSet out = *this;
    for (const auto& t : triples_)
        if (t.relation < n_rel)
            out.add({t.tail, static_cast<RelationId>(t.relation + n_rel), t.head});
    out.augmented_ = true;
    return out;
}

namespace {

/// Collects unknown names so that one error lists every offender.
struct Offenders {
    std::set<std::string> terms;
    std::set<std::string> relations;

    void throw_if_any(const std::string& source) const {
        if (terms.empty() && relations.empty()) return;
        std::string msg = source + ":";
        auto list = [&msg](const char* label, const std::set<std::string>& names) {
            if (names.empty()) return;
            msg += std::string(" unknown ") + label + " [";
            std::size_t shown = 0;
            for (const auto& n : names) {
                if (shown++ == 20) {
                    msg += ", ... (" + std::to_string(names.size()) + " total)";
                    break;
                }
                msg += (shown > 1 ? ", " : "") + n;
            }
            msg += "]";
        };
        list("terms", terms);
        list("relations", relations);
        throw DataError(msg);
    }
};

std::optional<RelationId> resolve_relation(std::string_view name, RelationSchema& schema,
                                           SchemaPolicy policy, Offenders& bad) {
    if (policy == SchemaPolicy::extend) return schema.add(name);
    if (auto r = schema.find(name)) return r;
    bad.relations.emplace(name);
    return std::nullopt;
}

std::optional<EntityId> resolve_term(std::string_view term, const Vocab& vocab, Offenders& bad) {
    if (auto e = vocab.find(term)) return e;
    bad.terms.emplace(term);
    return std::nullopt;
}

}  // namespace

TripleSet load_triples(const std::filesystem::path& path, const Vocab& vocab,
                       RelationSchema& schema, SchemaPolicy policy) {
    TripleSet set;
    Offenders bad;
    const auto source = path.string();
    detail::for_each_line(path, [&](std::size_t no, std::string_view line) {
        if (detail::skippable(line)) return;
        auto f = detail::split_tabs(line);
        if (f.size() != 3)
            throw ParseError(source, no,
                             "expected head<TAB>relation<TAB>tail, got " +
                                 std::to_string(f.size()) + " field(s)");
        auto h = resolve_term(f[0], vocab, bad);
        auto r = resolve_relation(f[1], schema, policy, bad);
        auto t = resolve_term(f[2], vocab, bad);
        if (h && r && t) set.add({*h, *r, *t});
    });
    bad.throw_if_any(source);
    return set;
}

void write_triples(const TripleSet& triples, const Vocab& vocab, const RelationSchema& schema,
                   std::ostream& out) {
    for (const auto& t : triples.triples())
        out << vocab.term(t.head) << '\t' << schema.row_name(t.relation) << '\t'
            << vocab.term(t.tail) << '\n';
}

std::vector<LabeledPair> load_pairs(const std::filesystem::path& path, const Vocab& vocab,
                                    RelationSchema& schema, SchemaPolicy policy) {
    std::vector<LabeledPair> pairs;
    Offenders bad;
    const auto source = path.string();
    detail::for_each_line(path, [&](std::size_t no, std::string_view line) {
        if (detail::skippable(line)) return;
        auto f = detail::split_tabs(line);
        if (f.size() != 4)
            throw ParseError(source, no,
                             "expected head<TAB>tail<TAB>label<TAB>relation, got " +
                                 std::to_string(f.size()) + " field(s)");
        if (f[2] != "0" && f[2] != "1")
            throw ParseError(source, no, "label must be 0 or 1, got '" + std::string(f[2]) + "'");
        auto h = resolve_term(f[0], vocab, bad);
        auto t = resolve_term(f[1], vocab, bad);
        auto r = resolve_relation(f[3], schema, policy, bad);
        if (h && t && r) pairs.push_back({*h, *t, f[2] == "1" ? 1 : 0, *r});
    });
    bad.throw_if_any(source);
    return pairs;
}

void write_pairs(const std::vector<LabeledPair>& pairs, const Vocab& vocab,
                 const RelationSchema& schema, std::ostream& out) {
    for (const auto& p : pairs)
        out << vocab.term(p.head) << '\t' << vocab.term(p.tail) << '\t' << p.label << '\t'
            << schema.row_name(p.relation) << '\n';
}

}  // namespace relrec
