#pragma once
// Query grounding and subgraph retrieval: TF-IDF topic scoring over exact
// label matches, k-hop neighborhood expansion under a triple budget, and
// three deterministic traversal serializers (DFS, BFS, random walk).
//
// All operations are pure functions of their inputs; a shared immutable
// KnowledgeGraph can serve concurrent queries.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <queue>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "kglm/kg.hpp"
#include "kglm/rng.hpp"
#include "kglm/text.hpp"

namespace kglm {

struct TopicSet {
    // (entity id, score), sorted score descending, ties by ascending label.
    std::vector<std::pair<EntityId, double>> topics;

    bool empty() const { return topics.empty(); }
    std::size_t size() const { return topics.size(); }
};

// Scores query tokens (and adjacent-token bigrams joined by '_') that
// exact-match an entity label. Score = tf * (ln((1+N)/(1+df)) + 1), the
// smoothed-idf form; df of an unseen term is 0.
inline TopicSet get_topics(const Query& query, const KnowledgeGraph& graph, const DocFreq& corpus,
                           std::size_t max_topics) {
    std::unordered_map<std::string, std::uint32_t> tf;
    for (const auto& tok : query.tokens) ++tf[normalize_label(tok)];
    for (std::size_t i = 0; i + 1 < query.tokens.size(); ++i)
        ++tf[normalize_label(query.tokens[i]) + "_" + normalize_label(query.tokens[i + 1])];

    auto idf = [&](const std::string& term) {
        double n = static_cast<double>(corpus.n_docs);
        double df = static_cast<double>(corpus.count(term));
        return std::log((1.0 + n) / (1.0 + df)) + 1.0;
    };

    std::unordered_map<EntityId, double> best;
    for (const auto& [term, count] : tf) {
        auto id = graph.find(term);
        if (!id) continue;
        double score = static_cast<double>(count) * idf(term);
        auto [it, inserted] = best.emplace(*id, score);
        if (!inserted) it->second = std::max(it->second, score);
    }

    TopicSet out;
    out.topics.assign(best.begin(), best.end());
    std::sort(out.topics.begin(), out.topics.end(),
              [&](const auto& a, const auto& b) {
                  if (a.second != b.second) return a.second > b.second;
                  return graph.entity(a.first).label < graph.entity(b.first).label;
              });
    if (out.topics.size() > max_topics) out.topics.resize(max_topics);
    return out;
}

// A neighborhood extract: its own dense-id graph, the seed ids it grew from
// (in this graph's id space, topic order), and the hop budget used.
struct SubGraph {
    KnowledgeGraph graph;
    std::vector<EntityId> seeds;
    std::size_t hops = 0;

    bool empty() const { return graph.empty(); }
};

// Breadth-first frontier expansion from all seeds over undirected adjacency.
// Triples are admitted in (hop level asc, seed score desc, triple index asc)
// order until max_triples; the result holds exactly the entities incident to
// kept triples plus isolated seeds.
inline SubGraph get_kg(const TopicSet& topics, const KnowledgeGraph& graph, std::size_t hops,
                       std::size_t max_triples) {
    SubGraph out;
    out.hops = hops;
    if (topics.empty()) return out;

    constexpr std::size_t kUnreached = std::numeric_limits<std::size_t>::max();

    struct Candidate {
        std::size_t hop_level;
        double seed_score;
        TripleIndex index;
    };
    std::unordered_map<TripleIndex, Candidate> candidates;

    if (hops == 0) {
        for (const auto& [seed, _] : topics.topics) out.seeds.push_back(out.graph.add_entity(graph.entity(seed).label));
        return out;
    }

    for (const auto& [seed, score] : topics.topics) {
        // Entity levels from this seed, capped at hops-1: a triple at hop h
        // has its nearer endpoint at level h-1, so deeper levels are moot.
        std::vector<std::size_t> level(graph.entity_count(), kUnreached);
        level[seed] = 0;
        std::queue<EntityId> frontier;
        frontier.push(seed);
        while (!frontier.empty()) {
            EntityId u = frontier.front();
            frontier.pop();
            if (level[u] + 1 > hops - 1) continue;
            for (TripleIndex t : graph.incident(u)) {
                EntityId v = graph.other_end(t, u);
                if (level[v] == kUnreached) {
                    level[v] = level[u] + 1;
                    frontier.push(v);
                }
            }
        }
        for (TripleIndex t = 0; t < graph.triple_count(); ++t) {
            const Triple& tr = graph.triple(t);
            std::size_t lo = std::min(level[tr.head], level[tr.tail]);
            if (lo == kUnreached) continue;
            std::size_t hop_level = lo + 1;
            if (hop_level > hops) continue;
            auto it = candidates.find(t);
            if (it == candidates.end()) {
                candidates.emplace(t, Candidate{hop_level, score, t});
            } else if (hop_level < it->second.hop_level) {
                it->second.hop_level = hop_level;
                it->second.seed_score = score;
            } else if (hop_level == it->second.hop_level) {
                it->second.seed_score = std::max(it->second.seed_score, score);
            }
        }
    }

    std::vector<Candidate> ordered;
    ordered.reserve(candidates.size());
    for (const auto& [_, c] : candidates) ordered.push_back(c);
    std::sort(ordered.begin(), ordered.end(), [](const Candidate& a, const Candidate& b) {
        if (a.hop_level != b.hop_level) return a.hop_level < b.hop_level;
        if (a.seed_score != b.seed_score) return a.seed_score > b.seed_score;
        return a.index < b.index;
    });
    if (ordered.size() > max_triples) ordered.resize(max_triples);

    // Seeds first (topic order), then endpoints in kept-triple order.
    for (const auto& [seed, _] : topics.topics) {
        const Entity& e = graph.entity(seed);
        EntityId local = out.graph.add_entity(e.label);
        out.seeds.push_back(local);
    }
    for (const Candidate& c : ordered) {
        const Triple& tr = graph.triple(c.index);
        EntityId h = out.graph.add_entity(graph.entity(tr.head).label);
        EntityId t = out.graph.add_entity(graph.entity(tr.tail).label);
        out.graph.add_triple(h, tr.relation, t, tr.weight);
    }
    return out;
}

enum class TraversalStrategy { Dfs, Bfs, RandomWalk };

inline const char* to_string(TraversalStrategy s) {
    switch (s) {
        case TraversalStrategy::Dfs: return "dfs";
        case TraversalStrategy::Bfs: return "bfs";
        case TraversalStrategy::RandomWalk: return "random_walk";
    }
    return "dfs";
}

enum class ItemKind { Entity, Relation };

struct TraversalItem {
    ItemKind kind;
    std::string label;      // bare label; direction markers live in text form only
    std::uint32_t origin;   // entity id (Entity) or triple index (Relation)
    bool forward = true;    // Relation only: traversed head -> tail
};

struct TraversalSequence {
    std::vector<TraversalItem> items;
    TraversalStrategy strategy = TraversalStrategy::Dfs;
    std::uint64_t seed = 0;

    bool empty() const { return items.empty(); }

    // Canonical text form: one token per item, space-joined; relations carry
    // a '>' (head->tail) or '<' (tail->head) marker.
    std::string text() const {
        std::string out;
        for (const auto& item : items) {
            if (!out.empty()) out.push_back(' ');
            out += item.label;
            if (item.kind == ItemKind::Relation) out.push_back(item.forward ? '>' : '<');
        }
        return out;
    }
};

namespace detail {

// Start node: uniform draw over the seed entities, ordered by label so the
// draw depends only on the rng seed. Falls back to the smallest label when
// the subgraph carries no seeds.
inline EntityId pick_start(const SubGraph& sg, Rng& rng) {
    std::vector<EntityId> pool = sg.seeds;
    std::sort(pool.begin(), pool.end(), [&](EntityId a, EntityId b) {
        return sg.graph.entity(a).label < sg.graph.entity(b).label;
    });
    pool.erase(std::unique(pool.begin(), pool.end()), pool.end());
    if (!pool.empty()) return pool[rng.next_below(pool.size())];

    EntityId best = 0;
    for (EntityId e = 1; e < sg.graph.entity_count(); ++e)
        if (sg.graph.entity(e).label < sg.graph.entity(best).label) best = e;
    return best;
}

// Incident triples of u ordered by (other-endpoint label, triple index).
inline std::vector<TripleIndex> ordered_incident(const KnowledgeGraph& g, EntityId u) {
    std::vector<TripleIndex> inc = g.incident(u);
    std::sort(inc.begin(), inc.end(), [&](TripleIndex a, TripleIndex b) {
        const std::string& la = g.entity(g.other_end(a, u)).label;
        const std::string& lb = g.entity(g.other_end(b, u)).label;
        if (la != lb) return la < lb;
        return a < b;
    });
    return inc;
}

inline EntityId smallest_unvisited(const KnowledgeGraph& g, const std::vector<bool>& visited) {
    EntityId best = static_cast<EntityId>(g.entity_count());
    for (EntityId e = 0; e < g.entity_count(); ++e) {
        if (visited[e]) continue;
        if (best == g.entity_count() || g.entity(e).label < g.entity(best).label) best = e;
    }
    return best;
}

inline void emit_entity(TraversalSequence& seq, const KnowledgeGraph& g, EntityId e) {
    seq.items.push_back(TraversalItem{ItemKind::Entity, g.entity(e).label, e, true});
}

inline void emit_relation(TraversalSequence& seq, const KnowledgeGraph& g, TripleIndex t,
                          EntityId from) {
    const Triple& tr = g.triple(t);
    seq.items.push_back(TraversalItem{ItemKind::Relation, tr.relation, t, tr.head == from});
}

}  // namespace detail

// Depth-first serialization. Entities are emitted on first visit, relations
// on tree edges only (between the entity labels they connect). Neighbor
// expansion is by ascending entity label; exhausted components restart at the
// unvisited entity with the smallest label.
inline TraversalSequence serialize_dfs(const SubGraph& sg, std::uint64_t rng_seed) {
    TraversalSequence seq;
    seq.strategy = TraversalStrategy::Dfs;
    seq.seed = rng_seed;
    const KnowledgeGraph& g = sg.graph;
    if (g.empty()) return seq;

    Rng rng(rng_seed);
    std::vector<bool> visited(g.entity_count(), false);

    EntityId start = detail::pick_start(sg, rng);
    while (true) {
        visited[start] = true;
        detail::emit_entity(seq, g, start);

        // (entity, cursor into its ordered incident list)
        std::vector<std::pair<EntityId, std::size_t>> stack{{start, 0}};
        std::vector<std::vector<TripleIndex>> order{detail::ordered_incident(g, start)};
        while (!stack.empty()) {
            auto& [u, cursor] = stack.back();
            bool advanced = false;
            while (cursor < order.back().size()) {
                TripleIndex t = order.back()[cursor++];
                EntityId v = g.other_end(t, u);
                if (visited[v]) continue;
                detail::emit_relation(seq, g, t, u);
                visited[v] = true;
                detail::emit_entity(seq, g, v);
                stack.emplace_back(v, 0);
                order.push_back(detail::ordered_incident(g, v));
                advanced = true;
                break;
            }
            if (!advanced) {
                stack.pop_back();
                order.pop_back();
            }
        }

        EntityId next = detail::smallest_unvisited(g, visited);
        if (next == g.entity_count()) break;
        start = next;
    }
    return seq;
}

// Breadth-first serialization with the same emission and tie-breaking rules.
inline TraversalSequence serialize_bfs(const SubGraph& sg, std::uint64_t rng_seed) {
    TraversalSequence seq;
    seq.strategy = TraversalStrategy::Bfs;
    seq.seed = rng_seed;
    const KnowledgeGraph& g = sg.graph;
    if (g.empty()) return seq;

    Rng rng(rng_seed);
    std::vector<bool> visited(g.entity_count(), false);

    EntityId start = detail::pick_start(sg, rng);
    while (true) {
        visited[start] = true;
        detail::emit_entity(seq, g, start);

        std::queue<EntityId> frontier;
        frontier.push(start);
        while (!frontier.empty()) {
            EntityId u = frontier.front();
            frontier.pop();
            for (TripleIndex t : detail::ordered_incident(g, u)) {
                EntityId v = g.other_end(t, u);
                if (visited[v]) continue;
                detail::emit_relation(seq, g, t, u);
                visited[v] = true;
                detail::emit_entity(seq, g, v);
                frontier.push(v);
            }
        }

        EntityId next = detail::smallest_unvisited(g, visited);
        if (next == g.entity_count()) break;
        start = next;
    }
    return seq;
}

// Seeded random walk: each step moves along a uniformly chosen incident
// triple. Entities are emitted on first visit, a relation the first time its
// triple is traversed (repeat traversals move without emitting, keeping
// relation items unique per triple). Stops after max_steps or at a degree-0
// node. Unlike DFS/BFS there is no component restart.
inline TraversalSequence serialize_random_walk(const SubGraph& sg, std::uint64_t rng_seed,
                                               std::size_t max_steps) {
    TraversalSequence seq;
    seq.strategy = TraversalStrategy::RandomWalk;
    seq.seed = rng_seed;
    const KnowledgeGraph& g = sg.graph;
    if (g.empty()) return seq;

    Rng rng(rng_seed);
    std::vector<bool> visited(g.entity_count(), false);
    std::vector<bool> traversed(g.triple_count(), false);

    EntityId cur = detail::pick_start(sg, rng);
    visited[cur] = true;
    detail::emit_entity(seq, g, cur);

    for (std::size_t step = 0; step < max_steps; ++step) {
        std::vector<TripleIndex> inc = g.incident(cur);
        std::sort(inc.begin(), inc.end());
        inc.erase(std::unique(inc.begin(), inc.end()), inc.end());  // self-loops listed twice
        if (inc.empty()) break;
        TripleIndex t = inc[rng.next_below(inc.size())];
        EntityId v = g.other_end(t, cur);
        if (!traversed[t]) {
            traversed[t] = true;
            detail::emit_relation(seq, g, t, cur);
        }
        if (!visited[v]) {
            visited[v] = true;
            detail::emit_entity(seq, g, v);
        }
        cur = v;
    }
    return seq;
}

inline TraversalSequence serialize(const SubGraph& sg, TraversalStrategy strategy,
                                   std::uint64_t rng_seed, std::size_t max_steps = 64) {
    switch (strategy) {
        case TraversalStrategy::Bfs: return serialize_bfs(sg, rng_seed);
        case TraversalStrategy::RandomWalk: return serialize_random_walk(sg, rng_seed, max_steps);
        case TraversalStrategy::Dfs: break;
    }
    return serialize_dfs(sg, rng_seed);
}

}  // namespace kglm
