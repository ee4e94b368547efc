#pragma once
// Levi graph transform and relative position matrix. Each triple's relation
// becomes its own node wired head -> relation -> tail with unlabeled directed
// edges; P holds signed, clamped pairwise hop distances between Levi nodes.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <queue>
#include <string>
#include <vector>

#include "kglm/error.hpp"
#include "kglm/retrieval.hpp"

namespace kglm {

enum class LeviKind { Entity, Relation };

struct LeviNode {
    LeviKind kind;
    std::string label;
    std::uint32_t origin;  // entity id or triple index in the source subgraph
};

struct LeviGraph {
    std::vector<LeviNode> nodes;
    std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;  // directed, unlabeled

    std::size_t node_count() const { return nodes.size(); }
    std::size_t edge_count() const { return edges.size(); }
    bool empty() const { return nodes.empty(); }
};

// Builds the Levi graph of `sg`, ordering nodes by first appearance in the
// driving traversal, then any unreached nodes by label. The traversal must
// have been produced from the same subgraph.
inline LeviGraph to_levi(const SubGraph& sg, const TraversalSequence& order) {
    const KnowledgeGraph& g = sg.graph;
    constexpr std::uint32_t kUnplaced = std::numeric_limits<std::uint32_t>::max();

    std::vector<std::uint32_t> entity_node(g.entity_count(), kUnplaced);
    std::vector<std::uint32_t> relation_node(g.triple_count(), kUnplaced);

    LeviGraph levi;
    levi.nodes.reserve(g.entity_count() + g.triple_count());

    for (const auto& item : order.items) {
        if (item.kind == ItemKind::Entity) {
            if (item.origin >= g.entity_count() || g.entity(item.origin).label != item.label)
                throw Error("traversal does not match subgraph: unknown entity '" + item.label + "'");
            if (entity_node[item.origin] != kUnplaced) continue;
            entity_node[item.origin] = static_cast<std::uint32_t>(levi.nodes.size());
            levi.nodes.push_back(LeviNode{LeviKind::Entity, item.label, item.origin});
        } else {
            if (item.origin >= g.triple_count() || g.triple(item.origin).relation != item.label)
                throw Error("traversal does not match subgraph: unknown relation '" + item.label + "'");
            if (relation_node[item.origin] != kUnplaced) continue;
            relation_node[item.origin] = static_cast<std::uint32_t>(levi.nodes.size());
            levi.nodes.push_back(LeviNode{LeviKind::Relation, item.label, item.origin});
        }
    }

    struct Pending {
        LeviKind kind;
        std::string label;
        std::uint32_t origin;
    };
    std::vector<Pending> rest;
    for (EntityId e = 0; e < g.entity_count(); ++e)
        if (entity_node[e] == kUnplaced) rest.push_back({LeviKind::Entity, g.entity(e).label, e});
    for (TripleIndex t = 0; t < g.triple_count(); ++t)
        if (relation_node[t] == kUnplaced) rest.push_back({LeviKind::Relation, g.triple(t).relation, t});
    std::sort(rest.begin(), rest.end(), [](const Pending& a, const Pending& b) {
        if (a.label != b.label) return a.label < b.label;
        if (a.kind != b.kind) return a.kind == LeviKind::Entity;
        return a.origin < b.origin;
    });
    for (const Pending& p : rest) {
        auto& slot = p.kind == LeviKind::Entity ? entity_node[p.origin] : relation_node[p.origin];
        slot = static_cast<std::uint32_t>(levi.nodes.size());
        levi.nodes.push_back(LeviNode{p.kind, p.label, p.origin});
    }

    levi.edges.reserve(2 * g.triple_count());
    for (TripleIndex t = 0; t < g.triple_count(); ++t) {
        const Triple& tr = g.triple(t);
        levi.edges.emplace_back(entity_node[tr.head], relation_node[t]);
        levi.edges.emplace_back(relation_node[t], entity_node[tr.tail]);
    }
    return levi;
}

struct PositionMatrix {
    std::vector<int> data;  // row-major n×n
    std::size_t n = 0;
    int k = 0;

    int at(std::size_t i, std::size_t j) const { return data[i * n + j]; }
    int& at(std::size_t i, std::size_t j) { return data[i * n + j]; }
};

namespace detail {

inline std::vector<std::size_t> bfs_dist(const std::vector<std::vector<std::uint32_t>>& adj,
                                         std::uint32_t src) {
    constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max();
    std::vector<std::size_t> dist(adj.size(), kInf);
    dist[src] = 0;
    std::queue<std::uint32_t> q;
    q.push(src);
    while (!q.empty()) {
        std::uint32_t u = q.front();
        q.pop();
        for (std::uint32_t v : adj[u]) {
            if (dist[v] == kInf) {
                dist[v] = dist[u] + 1;
                q.push(v);
            }
        }
    }
    return dist;
}

}  // namespace detail

// P[i][j] = min(d,k) where d is the undirected hop distance, signed + when
// the shortest connection runs with the edges i -> j and - when it runs
// against them; when both or neither direction realizes d the sign falls back
// to index order, matching the disconnected sentinel's ±(k+1) convention
// (+ above the diagonal, - below). Diagonal is 0.
inline PositionMatrix position_matrix(const LeviGraph& levi, int k) {
    if (k < 1) throw Error("position window must be >= 1");
    const std::size_t n = levi.node_count();
    constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max();

    std::vector<std::vector<std::uint32_t>> fwd(n), und(n);
    for (const auto& [a, b] : levi.edges) {
        fwd[a].push_back(b);
        und[a].push_back(b);
        und[b].push_back(a);
    }

    std::vector<std::vector<std::size_t>> du(n), dd(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        du[i] = detail::bfs_dist(und, i);
        dd[i] = detail::bfs_dist(fwd, i);
    }

    PositionMatrix p;
    p.n = n;
    p.k = k;
    p.data.assign(n * n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            std::size_t d = du[i][j];
            int v;
            if (d == kInf) {
                v = k + 1;
            } else {
                int m = static_cast<int>(std::min<std::size_t>(d, static_cast<std::size_t>(k)));
                bool along = dd[i][j] == d;
                bool against = dd[j][i] == d;
                v = (along == against) ? m : (along ? m : -m);
            }
            p.at(i, j) = v;
            p.at(j, i) = -v;
        }
    }
    return p;
}

inline std::vector<std::string> serialize_levi(const LeviGraph& levi) {
    std::vector<std::string> out;
    out.reserve(levi.nodes.size());
    for (const auto& node : levi.nodes) out.push_back(node.label);
    return out;
}

}  // namespace kglm
