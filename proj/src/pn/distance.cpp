#include "pngnn/pn/distance.hpp"

#include "pngnn/error.hpp"

#include <algorithm>
#include <deque>

namespace pngnn::pn {

std::span<const EntityId> DistanceTable::stratum(EntityId v, std::size_t j) const {
    if (!has_target(v)) {
        throw StateError("distance table has no strata for entity " + std::to_string(v));
    }
    if (j < 1 || j > j_max_) {
        throw StateError("distance table holds strata 1.." + std::to_string(j_max_) + ", asked for " +
                         std::to_string(j));
    }
    const std::size_t k = target_slot_[v] * j_max_ + (j - 1);
    return {members_.data() + offsets_[k], offsets_[k + 1] - offsets_[k]};
}

DistanceTable compute_distances(const KnowledgeGraph& graph, EntityId u, std::size_t j_max,
                                std::span<const EntityId> targets, std::span<const kg::Triple> skip) {
    auto skipped = [&](EntityId h, kg::RelationId r, EntityId tail) {
        return !skip.empty() && std::find(skip.begin(), skip.end(), kg::Triple{h, r, tail}) != skip.end();
    };
    graph.check_entity(u);
    if (j_max < 1) {
        throw InvalidArgument("compute_distances: j_max must be >= 1");
    }
    const std::size_t n = graph.num_entities();
    DistanceTable t;
    t.source_ = u;
    t.j_max_ = j_max;
    t.from_source_.assign(n, kUnreachable);
    t.from_source_[u] = 0;
    std::deque<EntityId> queue{u};
    while (!queue.empty()) {
        const EntityId w = queue.front();
        queue.pop_front();
        for (const kg::Edge& e : graph.out_edges(w)) {
            if (t.from_source_[e.neighbor] == kUnreachable && !skipped(w, e.relation, e.neighbor)) {
                t.from_source_[e.neighbor] = t.from_source_[w] + 1;
                queue.push_back(e.neighbor);
            }
        }
    }

    std::vector<EntityId> all;
    if (targets.empty()) {
        all.resize(n);
        for (std::size_t v = 0; v < n; ++v) {
            all[v] = static_cast<EntityId>(v);
        }
        targets = all;
    }
    t.target_slot_.assign(n, DistanceTable::kNoSlot);
    t.offsets_.push_back(0);
    // Reverse BFS with a stamp array so each target costs only its ball.
    std::vector<std::uint32_t> dist(n, kUnreachable);
    std::vector<EntityId> touched;
    std::vector<EntityId> frontier, next;
    std::size_t slot = 0;
    for (EntityId v : targets) {
        graph.check_entity(v);
        if (t.target_slot_[v] != DistanceTable::kNoSlot) {
            continue;
        }
        t.target_slot_[v] = slot++;
        dist[v] = 0;
        touched.assign(1, v);
        frontier.assign(1, v);
        for (std::size_t j = 1; j <= j_max; ++j) {
            next.clear();
            for (EntityId x : frontier) {
                for (const kg::Edge& e : graph.in_edges(x)) {
                    if (dist[e.neighbor] == kUnreachable && !skipped(e.neighbor, e.relation, x)) {
                        dist[e.neighbor] = static_cast<std::uint32_t>(j);
                        touched.push_back(e.neighbor);
                        next.push_back(e.neighbor);
                    }
                }
            }
            std::sort(next.begin(), next.end());
            t.members_.insert(t.members_.end(), next.begin(), next.end());
            t.offsets_.push_back(t.members_.size());
            frontier.swap(next);
        }
        for (EntityId x : touched) {
            dist[x] = kUnreachable;
        }
    }
    return t;
}

std::vector<EntityId> path_neighbors(const DistanceTable& table, EntityId v, std::size_t i, std::size_t j) {
    if (i < 1) {
        throw InvalidArgument("path_neighbors: i must be >= 1");
    }
    std::vector<EntityId> out;
    for (EntityId w : table.stratum(v, j)) {
        if (table.from_source(w) == i) {
            out.push_back(w);
        }
    }
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> khop_slots(std::size_t k) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    for (std::size_t i = 1; i <= k; ++i) {
        for (std::size_t j = 1; i + j <= k + 1; ++j) {
            out.emplace_back(i, j);
        }
    }
    return out;
}

} // namespace pngnn::pn
