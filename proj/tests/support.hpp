#pragma once

#include "pngnn/kg/graph.hpp"
#include "pngnn/rng.hpp"

#include <vector>

namespace testsupport {

inline pngnn::kg::KnowledgeGraph random_graph(pngnn::Rng& rng, std::size_t n, std::size_t r, std::size_t m) {
    std::vector<pngnn::kg::Triple> t;
    for (std::size_t i = 0; i < m; ++i) {
        t.push_back({static_cast<pngnn::kg::EntityId>(rng.below(n)),
                     static_cast<pngnn::kg::RelationId>(rng.below(r)),
                     static_cast<pngnn::kg::EntityId>(rng.below(n))});
    }
    return pngnn::kg::KnowledgeGraph(n, r, std::move(t));
}

// Relabels entities by perm (old -> new).
inline pngnn::kg::KnowledgeGraph permute(const pngnn::kg::KnowledgeGraph& g,
                                         const std::vector<pngnn::kg::EntityId>& perm) {
    std::vector<pngnn::kg::Triple> t;
    for (const auto& x : g.triples()) {
        t.push_back({perm[x.head], x.relation, perm[x.tail]});
    }
    return pngnn::kg::KnowledgeGraph(g.num_entities(), g.num_relations(), std::move(t));
}

inline std::vector<pngnn::kg::EntityId> random_perm(pngnn::Rng& rng, std::size_t n) {
    std::vector<pngnn::kg::EntityId> p(n);
    for (std::size_t i = 0; i < n; ++i) {
        p[i] = static_cast<pngnn::kg::EntityId>(i);
    }
    rng.shuffle(std::span<pngnn::kg::EntityId>(p));
    return p;
}

// Plain BFS hop distance; UINT32_MAX when unreachable.
inline std::vector<std::vector<std::uint32_t>> all_pairs(const pngnn::kg::KnowledgeGraph& g) {
    const std::size_t n = g.num_entities();
    std::vector<std::vector<std::uint32_t>> d(n, std::vector<std::uint32_t>(n, UINT32_MAX));
    for (std::size_t s = 0; s < n; ++s) {
        d[s][s] = 0;
        bool changed = true;
        for (std::uint32_t k = 0; changed; ++k) {
            changed = false;
            for (const auto& e : g.triples()) {
                if (d[s][e.head] == k && d[s][e.tail] == UINT32_MAX) {
                    d[s][e.tail] = k + 1;
                    changed = true;
                }
            }
        }
    }
    return d;
}

} // namespace testsupport
