#pragma once

#include "pngnn/kg/graph.hpp"

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace pngnn::pn {

using kg::EntityId;
using kg::KnowledgeGraph;

inline constexpr std::uint32_t kUnreachable = std::numeric_limits<std::uint32_t>::max();

// Hop distances along stored edge direction, relation labels ignored.
// Reverse strata {w : d(w, v) = j} are kept for j = 1..j_max for every
// entity v (or only the requested targets).
class DistanceTable {
public:
    DistanceTable() = default;

    EntityId source() const noexcept { return source_; }
    std::size_t j_max() const noexcept { return j_max_; }
    std::uint32_t from_source(EntityId w) const { return from_source_.at(w); }
    const std::vector<std::uint32_t>& from_source() const noexcept { return from_source_; }
    bool has_target(EntityId v) const { return v < target_slot_.size() && target_slot_[v] != kNoSlot; }
    // Sorted entities at exact reverse distance j from v; StateError if v was
    // not tabulated or j is outside 1..j_max.
    std::span<const EntityId> stratum(EntityId v, std::size_t j) const;

private:
    friend DistanceTable compute_distances(const KnowledgeGraph&, EntityId, std::size_t,
                                           std::span<const EntityId>, std::span<const kg::Triple>);
    static constexpr std::size_t kNoSlot = std::numeric_limits<std::size_t>::max();

    EntityId source_ = 0;
    std::size_t j_max_ = 0;
    std::vector<std::uint32_t> from_source_;
    std::vector<std::size_t> target_slot_;
    // Per tabulated target, j_max consecutive strata in CSR form.
    std::vector<std::size_t> offsets_;
    std::vector<EntityId> members_;
};

// Breadth-first distances from u plus bounded reverse expansion to depth
// j_max from each target (all entities when `targets` is empty). Edges in
// `skip` are treated as absent.
DistanceTable compute_distances(const KnowledgeGraph& graph, EntityId u, std::size_t j_max,
                                std::span<const EntityId> targets = {}, std::span<const kg::Triple> skip = {});

// {w : d(u, w) = i and d(w, v) = j}, sorted.
std::vector<EntityId> path_neighbors(const DistanceTable& table, EntityId v, std::size_t i, std::size_t j);

// (i, j) slots with i, j >= 1 and i + j <= k + 1, lexicographic.
std::vector<std::pair<std::size_t, std::size_t>> khop_slots(std::size_t k);

} // namespace pngnn::pn
