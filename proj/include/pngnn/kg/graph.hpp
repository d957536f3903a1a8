#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace pngnn::kg {

using EntityId = std::uint32_t;
using RelationId = std::uint32_t;

struct Triple {
    EntityId head = 0;
    RelationId relation = 0;
    EntityId tail = 0;

    auto operator<=>(const Triple&) const = default;
};

enum class Direction { kIn, kOut };

// One adjacency entry: the entity on the far side and the relation label.
struct Edge {
    EntityId neighbor;
    RelationId relation;
};

// Compressed rows for one direction. Entries of row v are sorted by
// (relation, neighbor) so per-relation neighbor lists are contiguous.
class AdjacencyIndex {
public:
    AdjacencyIndex() = default;
    AdjacencyIndex(std::size_t num_entities, std::span<const Triple> triples, Direction direction);

    std::span<const Edge> edges(EntityId v) const {
        return {entries_.data() + offsets_[v], offsets_[v + 1] - offsets_[v]};
    }
    std::span<const Edge> edges(EntityId v, RelationId r) const;
    std::size_t edge_count() const noexcept { return entries_.size(); }

private:
    std::vector<std::size_t> offsets_;
    std::vector<Edge> entries_;
};

// Immutable multigraph of triples with forward and reverse adjacency.
class KnowledgeGraph {
public:
    KnowledgeGraph() : KnowledgeGraph(0, 0, {}) {}
    KnowledgeGraph(std::size_t num_entities, std::size_t num_relations, std::vector<Triple> triples,
                   bool inverse_augmented = false, std::size_t original_relations = 0);

    std::size_t num_entities() const noexcept { return num_entities_; }
    std::size_t num_relations() const noexcept { return num_relations_; }
    // R0: relation count before inverse augmentation.
    std::size_t original_relations() const noexcept { return original_relations_; }
    bool inverse_augmented() const noexcept { return inverse_augmented_; }
    std::span<const Triple> triples() const noexcept { return triples_; }

    // Neighbors of v through relation r; kIn lists heads of edges into v,
    // kOut lists tails of edges out of v. Multiset, sorted.
    std::vector<EntityId> neighbors(EntityId v, RelationId r, Direction direction) const;

    std::span<const Edge> in_edges(EntityId v) const { return in_.edges(v); }
    std::span<const Edge> out_edges(EntityId v) const { return out_.edges(v); }
    std::span<const Edge> in_edges(EntityId v, RelationId r) const { return in_.edges(v, r); }
    std::span<const Edge> out_edges(EntityId v, RelationId r) const { return out_.edges(v, r); }

    void check_entity(EntityId v) const;
    void check_relation(RelationId r) const;

private:
    std::size_t num_entities_;
    std::size_t num_relations_;
    std::size_t original_relations_;
    bool inverse_augmented_;
    std::vector<Triple> triples_;
    AdjacencyIndex in_;
    AdjacencyIndex out_;
};

// Adds (t, r + R0, h) for every (h, r, t); the result has 2 * R0 relations.
KnowledgeGraph augment_inverses(const KnowledgeGraph& graph);

// Drops relations >= R0 from an augmented graph.
KnowledgeGraph strip_inverses(const KnowledgeGraph& graph);

} // namespace pngnn::kg
