#include "relrec/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <unordered_map>

#include "relrec/errors.hpp"
#include "text_io.hpp"

namespace relrec {

DatasetSplit split_dataset(std::span<const LabeledPair> pairs, std::array<double, 3> ratios,
                           std::uint64_t seed) {
    if (pairs.empty()) throw DataError("cannot split an empty pair set");
    for (double r : ratios)
        if (r < 0) throw DataError("split ratios must be non-negative");
    if (std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) > 1e-9)
        throw DataError("split ratios must sum to 1");

    std::mt19937_64 rng(seed);
    std::vector<LabeledPair> pos, neg;
    for (const auto& p : pairs) (p.label == 1 ? pos : neg).push_back(p);
    std::shuffle(pos.begin(), pos.end(), rng);
    std::shuffle(neg.begin(), neg.end(), rng);

    auto count = [](double r, std::size_t n) {
        return static_cast<std::size_t>(std::llround(r * static_cast<double>(n)));
    };
    const std::size_t n = pairs.size();
    std::size_t pos_left = pos.size();
    std::size_t neg_left = neg.size();
    std::size_t pos_at = 0, neg_at = 0;
    DatasetSplit out;
    std::array<std::vector<LabeledPair>*, 3> parts = {&out.train, &out.dev, &out.test};
    std::size_t assigned = 0;
    for (std::size_t s = 0; s < 3; ++s) {
        // Totals follow the ratios over the whole set; the class mix follows each class.
        std::size_t total = s < 2 ? std::min(count(ratios[s], n), n - assigned) : n - assigned;
        std::size_t take_pos =
            s < 2 ? std::min({count(ratios[s], pos.size()), total, pos_left}) : pos_left;
        std::size_t take_neg = total - take_pos;
        if (take_neg > neg_left) {
            take_neg = neg_left;
            take_pos = total - take_neg;
        }
        auto& part = *parts[s];
        part.insert(part.end(), pos.begin() + static_cast<std::ptrdiff_t>(pos_at),
                    pos.begin() + static_cast<std::ptrdiff_t>(pos_at + take_pos));
        part.insert(part.end(), neg.begin() + static_cast<std::ptrdiff_t>(neg_at),
                    neg.begin() + static_cast<std::ptrdiff_t>(neg_at + take_neg));
        std::shuffle(part.begin(), part.end(), rng);
        pos_at += take_pos;
        neg_at += take_neg;
        pos_left -= take_pos;
        neg_left -= take_neg;
        assigned += total;
    }
    return out;
}

std::vector<EntityPair> sample_negative_pairs(std::span<const EntityPair> positives,
                                              std::span<const EntityId> head_pool,
                                              std::span<const EntityId> tail_pool,
                                              std::uint64_t seed,
                                              std::span<const EntityPair> exclude) {
    if (head_pool.empty() || tail_pool.empty()) throw DataError("negative sampling needs pools");
    std::set<EntityPair> banned(positives.begin(), positives.end());
    banned.insert(exclude.begin(), exclude.end());
    std::set<EntityPair> taken;

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick_h(0, head_pool.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_t(0, tail_pool.size() - 1);
    std::vector<EntityPair> out;
    out.reserve(positives.size());
    const std::size_t max_attempts = 1000 + 100 * positives.size();
    for (std::size_t attempt = 0; out.size() < positives.size(); ++attempt) {
        if (attempt == max_attempts)
            throw DataError("argument pools too small: sampled " + std::to_string(out.size()) +
                            " of " + std::to_string(positives.size()) + " negative pairs");
        EntityPair cand{head_pool[pick_h(rng)], tail_pool[pick_t(rng)]};
        if (cand.first == cand.second || banned.contains(cand) || taken.contains(cand)) continue;
        taken.insert(cand);
        out.push_back(cand);
    }
    return out;
}

Metrics f1_score(std::span<const double> probabilities, std::span<const int> labels,
                 double threshold) {
    if (probabilities.size() != labels.size())
        throw DataError("f1_score: predictions and labels differ in length");
    Metrics m;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool predicted = probabilities[i] >= threshold;
        const bool actual = labels[i] == 1;
        if (predicted && actual) ++m.tp;
        else if (predicted) ++m.fp;
        else if (actual) ++m.fn;
        else ++m.tn;
    }
    if (m.tp + m.fp > 0) m.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
    if (m.tp + m.fn > 0) m.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    if (m.precision + m.recall > 0)
        m.f1 = 2 * m.precision * m.recall / (m.precision + m.recall);
    return m;
}

bool SyntheticWorld::rule_holds(EntityId head, RelationId relation, EntityId tail) const {
    if (head == tail) return false;
    const RuleEdge e{cluster.at(head), cluster.at(tail), relation};
    return std::find(rule.begin(), rule.end(), e) != rule.end();
}

namespace {

void validate(const SyntheticSpec& s) {
    if (s.n_clusters < 2) throw DataError("synthetic world needs at least two clusters");
    if (s.n_entities < s.n_clusters) throw DataError("fewer entities than clusters");
    if (s.n_rel == 0) throw DataError("synthetic world needs at least one relation");
    if (!(s.density > 0 && s.density <= 1)) throw DataError("density must be in (0, 1]");
    if (!(s.cross_density >= 0 && s.cross_density <= 1))
        throw DataError("cross_density must be in [0, 1]");
    if (!(s.noise >= 0 && s.noise <= 1)) throw DataError("noise must be in [0, 1]");
    if (!(s.triple_density > 0 && s.triple_density <= 1))
        throw DataError("triple_density must be in (0, 1]");
    if (s.signal_count < 0 || s.noise_count < 0) throw DataError("count means must be >= 0");
    if (s.edges_per_relation < 2)
        throw DataError("each relation needs at least two rule edges to admit negatives");
    if (s.n_rel * s.edges_per_relation > s.n_clusters * (s.n_clusters - 1))
        throw DataError("not enough cluster pairs for the requested rule");
}

/// Whether some head-cluster × tail-cluster combination of `target` is not a rule edge.
bool admits_negatives(const std::vector<RuleEdge>& rule, RelationId target) {
    std::set<std::size_t> heads, tails;
    std::set<std::pair<std::size_t, std::size_t>> edges;
    for (const auto& e : rule) {
        if (e.relation != target) continue;
        heads.insert(e.head_cluster);
        tails.insert(e.tail_cluster);
        edges.insert({e.head_cluster, e.tail_cluster});
    }
    for (auto h : heads)
        for (auto t : tails)
            if (!edges.contains({h, t})) return true;
    return false;
}

}  // namespace

SyntheticWorld generate_synthetic(const SyntheticSpec& spec) {
    validate(spec);
    SyntheticWorld w;
    w.spec = spec;
    std::mt19937_64 rng(spec.seed);

    // Balanced random clusters.
    std::vector<EntityId> order(spec.n_entities);
    for (EntityId i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    w.cluster.assign(spec.n_entities, 0);
    for (std::size_t rank = 0; rank < order.size(); ++rank)
        w.cluster[order[rank]] = rank % spec.n_clusters;

    // Rule: distinct ordered cluster pairs, `edges_per_relation` per relation.
    std::vector<std::pair<std::size_t, std::size_t>> cluster_pairs;
    for (std::size_t a = 0; a < spec.n_clusters; ++a)
        for (std::size_t b = 0; b < spec.n_clusters; ++b)
            if (a != b) cluster_pairs.emplace_back(a, b);
    for (int attempt = 0;; ++attempt) {
        if (attempt == 1000) throw DataError("could not draw a rule that admits negatives");
        std::shuffle(cluster_pairs.begin(), cluster_pairs.end(), rng);
        w.rule.clear();
        for (RelationId r = 0; r < spec.n_rel; ++r)
            for (std::size_t k = 0; k < spec.edges_per_relation; ++k) {
                auto [a, b] = cluster_pairs[r * spec.edges_per_relation + k];
                w.rule.push_back({a, b, r});
            }
        if (admits_negatives(w.rule, w.target)) break;
    }

    for (RelationId r = 0; r < spec.n_rel; ++r) w.schema.add("rel_" + std::to_string(r));

    // Co-occurrence counts.
    std::vector<std::string> names;
    names.reserve(spec.n_entities);
    for (std::size_t i = 0; i < spec.n_entities; ++i) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "ent_%04zu", i);
        names.emplace_back(buf);
    }
    std::set<std::pair<std::size_t, std::size_t>> linked;
    for (const auto& e : w.rule) {
        linked.insert({e.head_cluster, e.tail_cluster});
        linked.insert({e.tail_cluster, e.head_cluster});
    }
    std::bernoulli_distribution in_edge(spec.density), cross_edge(spec.cross_density),
        noise_edge(spec.noise);
    std::poisson_distribution<std::uint64_t> signal_extra(spec.signal_count),
        noise_extra(spec.noise_count);
    std::vector<std::tuple<EntityId, EntityId, std::uint64_t>> raw;
    for (EntityId x = 0; x < spec.n_entities; ++x) {
        for (EntityId y = x + 1; y < spec.n_entities; ++y) {
            const auto cx = w.cluster[x], cy = w.cluster[y];
            bool signal = false;
            bool present = false;
            if (cx == cy) {
                present = signal = in_edge(rng);
            } else if (linked.contains({cx, cy})) {
                present = signal = cross_edge(rng);
            } else {
                present = noise_edge(rng);
            }
            if (!present) continue;
            const std::uint64_t extra = signal ? (spec.signal_count > 0 ? signal_extra(rng) : 0)
                                               : (spec.noise_count > 0 ? noise_extra(rng) : 0);
            raw.emplace_back(x, y, 1 + extra);
        }
    }
    std::vector<std::vector<EntityId>> members(spec.n_clusters);
    for (EntityId i = 0; i < spec.n_entities; ++i) members[w.cluster[i]].push_back(i);

    // Every entity gets at least one edge so that the edge list carries the whole vocabulary.
    std::vector<bool> seen(spec.n_entities, false);
    for (const auto& [x, y, c] : raw) seen[x] = seen[y] = true;
    for (EntityId x = 0; x < spec.n_entities; ++x) {
        if (seen[x]) continue;
        const auto& mates = members[w.cluster[x]];
        EntityId y = x;
        if (mates.size() > 1) {
            std::uniform_int_distribution<std::size_t> pick(0, mates.size() - 1);
            while (y == x) y = mates[pick(rng)];
        } else {
            y = x == 0 ? 1 : 0;
        }
        raw.emplace_back(x, y, 1);
        seen[x] = seen[y] = true;
    }
    w.graph = build_cooc_graph(Vocab(names), raw);

    // Triples: a random share of every rule-satisfying pair.
    std::bernoulli_distribution keep(spec.triple_density);
    for (const auto& e : w.rule)
        for (EntityId h : members[e.head_cluster])
            for (EntityId t : members[e.tail_cluster])
                if (keep(rng)) w.triples.add({h, e.relation, t});

    // Balanced labels for the target relation; negatives are typed and violate the rule.
    std::vector<EntityPair> positives;
    for (const auto& t : w.triples.triples())
        if (t.relation == w.target) positives.emplace_back(t.head, t.tail);
    if (positives.empty()) throw DataError("synthetic world produced no positive pairs");
    const auto head_pool = w.triples.head_pool(w.target);
    const auto tail_pool = w.triples.tail_pool(w.target);
    std::vector<EntityPair> rule_true;
    for (EntityId h : head_pool)
        for (EntityId t : tail_pool)
            if (w.rule_holds(h, w.target, t)) rule_true.emplace_back(h, t);
    const auto negatives = sample_negative_pairs(positives, head_pool, tail_pool,
                                                 rng(), rule_true);
    for (auto [h, t] : positives) w.pairs.push_back({h, t, 1, w.target});
    for (auto [h, t] : negatives) w.pairs.push_back({h, t, 0, w.target});
    return w;
}

void write_synthetic(const SyntheticWorld& world, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    auto open = [&dir](const char* name) {
        std::ofstream out(dir / name);
        if (!out) throw DataError("cannot write " + (dir / name).string());
        return out;
    };
    {
        auto out = open("graph.tsv");
        write_cooc_graph(world.graph, out);
    }
    {
        auto out = open("triples.tsv");
        write_triples(world.triples, world.graph.vocab, world.schema, out);
    }
    {
        auto out = open("pairs.tsv");
        write_pairs(world.pairs, world.graph.vocab, world.schema, out);
    }
    {
        auto out = open("clusters.tsv");
        for (EntityId i = 0; i < world.cluster.size(); ++i)
            out << world.graph.vocab.term(i) << '\t' << world.cluster[i] << '\n';
    }
    {
        auto out = open("rule.tsv");
        for (const auto& e : world.rule)
            out << e.head_cluster << '\t' << e.tail_cluster << '\t'
                << world.schema.row_name(e.relation) << '\n';
    }
}

std::size_t check_synthetic_files(const std::filesystem::path& dir) {
    const CoocGraph graph = load_cooc_graph(dir / "graph.tsv");
    std::unordered_map<std::string, std::size_t> cluster_of;
    detail::for_each_line(dir / "clusters.tsv", [&](std::size_t no, std::string_view line) {
        if (detail::skippable(line)) return;
        auto f = detail::split_tabs(line);
        std::uint64_t c = 0;
        if (f.size() != 2 || !detail::parse_u64(f[1], c))
            throw ParseError((dir / "clusters.tsv").string(), no, "expected term<TAB>cluster");
        cluster_of[std::string(f[0])] = c;
    });
    std::set<std::tuple<std::size_t, std::size_t, std::string>> rule;
    detail::for_each_line(dir / "rule.tsv", [&](std::size_t no, std::string_view line) {
        if (detail::skippable(line)) return;
        auto f = detail::split_tabs(line);
        std::uint64_t a = 0, b = 0;
        if (f.size() != 3 || !detail::parse_u64(f[0], a) || !detail::parse_u64(f[1], b))
            throw ParseError((dir / "rule.tsv").string(), no,
                             "expected head_cluster<TAB>tail_cluster<TAB>relation");
        rule.emplace(a, b, std::string(f[2]));
    });

    RelationSchema schema;
    const TripleSet triples = load_triples(dir / "triples.tsv", graph.vocab, schema);
    const auto pairs = load_pairs(dir / "pairs.tsv", graph.vocab, schema);
    auto holds = [&](EntityId h, RelationId r, EntityId t) {
        if (h == t) return false;
        auto ch = cluster_of.find(graph.vocab.term(h));
        auto ct = cluster_of.find(graph.vocab.term(t));
        if (ch == cluster_of.end() || ct == cluster_of.end()) return false;
        return rule.contains({ch->second, ct->second, schema.row_name(r)});
    };
    std::size_t mismatches = 0;
    for (const auto& t : triples.triples())
        if (!holds(t.head, t.relation, t.tail)) ++mismatches;
    for (const auto& p : pairs)
        if (holds(p.head, p.relation, p.tail) != (p.label == 1)) ++mismatches;
    return mismatches;
}

}  // namespace relrec
