#include "pngnn/kg/graph.hpp"

#include "pngnn/error.hpp"

#include <algorithm>

namespace pngnn::kg {

AdjacencyIndex::AdjacencyIndex(std::size_t num_entities, std::span<const Triple> triples,
                               Direction direction)
    : offsets_(num_entities + 1, 0), entries_(triples.size()) {
    for (const Triple& t : triples) {
        ++offsets_[(direction == Direction::kOut ? t.head : t.tail) + 1];
    }
    for (std::size_t v = 0; v < num_entities; ++v) {
        offsets_[v + 1] += offsets_[v];
    }
    std::vector<std::size_t> fill(offsets_.begin(), offsets_.end() - 1);
    for (const Triple& t : triples) {
        const EntityId owner = direction == Direction::kOut ? t.head : t.tail;
        const EntityId other = direction == Direction::kOut ? t.tail : t.head;
        entries_[fill[owner]++] = Edge{other, t.relation};
    }
    for (std::size_t v = 0; v < num_entities; ++v) {
        std::sort(entries_.begin() + static_cast<std::ptrdiff_t>(offsets_[v]),
                  entries_.begin() + static_cast<std::ptrdiff_t>(offsets_[v + 1]),
                  [](const Edge& a, const Edge& b) {
                      return a.relation != b.relation ? a.relation < b.relation : a.neighbor < b.neighbor;
                  });
    }
}

std::span<const Edge> AdjacencyIndex::edges(EntityId v, RelationId r) const {
    const auto all = edges(v);
    auto lo = std::lower_bound(all.begin(), all.end(), r,
                               [](const Edge& e, RelationId rel) { return e.relation < rel; });
    auto hi = std::upper_bound(lo, all.end(), r,
                               [](RelationId rel, const Edge& e) { return rel < e.relation; });
    return {lo, hi};
}

KnowledgeGraph::KnowledgeGraph(std::size_t num_entities, std::size_t num_relations,
                               std::vector<Triple> triples, bool inverse_augmented,
                               std::size_t original_relations)
    : num_entities_(num_entities),
      num_relations_(num_relations),
      original_relations_(inverse_augmented ? original_relations : num_relations),
      inverse_augmented_(inverse_augmented),
      triples_(std::move(triples)) {
    for (const Triple& t : triples_) {
        if (t.head >= num_entities_ || t.tail >= num_entities_) {
            throw RangeError("triple entity index out of range (" + std::to_string(num_entities_) +
                             " entities)");
        }
        if (t.relation >= num_relations_) {
            throw RangeError("triple relation index out of range (" + std::to_string(num_relations_) +
                             " relations)");
        }
    }
    in_ = AdjacencyIndex(num_entities_, triples_, Direction::kIn);
    out_ = AdjacencyIndex(num_entities_, triples_, Direction::kOut);
}

void KnowledgeGraph::check_entity(EntityId v) const {
    if (v >= num_entities_) {
        throw RangeError("entity " + std::to_string(v) + " out of range (" + std::to_string(num_entities_) +
                         " entities)");
    }
}

void KnowledgeGraph::check_relation(RelationId r) const {
    if (r >= num_relations_) {
        throw RangeError("relation " + std::to_string(r) + " out of range (" +
                         std::to_string(num_relations_) + " relations)");
    }
}

std::vector<EntityId> KnowledgeGraph::neighbors(EntityId v, RelationId r, Direction direction) const {
    check_entity(v);
    check_relation(r);
    const auto edges = direction == Direction::kIn ? in_.edges(v, r) : out_.edges(v, r);
    std::vector<EntityId> out;
    out.reserve(edges.size());
    for (const Edge& e : edges) {
        out.push_back(e.neighbor);
    }
    return out;
}

KnowledgeGraph augment_inverses(const KnowledgeGraph& graph) {
    if (graph.inverse_augmented()) {
        throw StateError("augment_inverses: graph is already inverse-augmented");
    }
    const auto r0 = static_cast<RelationId>(graph.num_relations());
    std::vector<Triple> triples(graph.triples().begin(), graph.triples().end());
    triples.reserve(triples.size() * 2);
    for (const Triple& t : graph.triples()) {
        triples.push_back(Triple{t.tail, t.relation + r0, t.head});
    }
    return KnowledgeGraph(graph.num_entities(), 2 * graph.num_relations(), std::move(triples), true,
                          graph.num_relations());
}

KnowledgeGraph strip_inverses(const KnowledgeGraph& graph) {
    if (!graph.inverse_augmented()) {
        return graph;
    }
    std::vector<Triple> kept;
    for (const Triple& t : graph.triples()) {
        if (t.relation < graph.original_relations()) {
            kept.push_back(t);
        }
    }
    return KnowledgeGraph(graph.num_entities(), graph.original_relations(), std::move(kept));
}

} // namespace pngnn::kg
