#pragma once

#include "pngnn/kg/dataset.hpp"
#include "pngnn/rng.hpp"

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

namespace pngnn::train {

using kg::EntityId;
using kg::RelationId;
using kg::Triple;

// Which end of a triple a query asks for.
enum class Side { kTail, kHead };

// Known-true lookup: tails of (h, r) and heads of (r, t), sorted.
class TripleIndex {
public:
    TripleIndex() = default;
    explicit TripleIndex(std::initializer_list<std::span<const Triple>> parts);

    void add(std::span<const Triple> triples);
    bool contains(const Triple& t) const;
    std::span<const EntityId> tails(EntityId h, RelationId r) const;
    std::span<const EntityId> heads(RelationId r, EntityId t) const;
    // Known answers on `side` for the query formed by the other two fields.
    std::span<const EntityId> answers(const Triple& t, Side side) const {
        return side == Side::kTail ? tails(t.head, t.relation) : heads(t.relation, t.tail);
    }

private:
    static std::uint64_t key(std::uint32_t a, std::uint32_t b) { return (std::uint64_t{a} << 32) | b; }
    std::unordered_map<std::uint64_t, std::vector<EntityId>> tails_;
    std::unordered_map<std::uint64_t, std::vector<EntityId>> heads_;
};

// n corruptions of `positive` on `side`, replacements uniform over the
// entities that do not form a known triple. SamplingError when none exists,
// InvalidArgument for n == 0.
std::vector<Triple> sample_negatives(const TripleIndex& known, std::size_t num_entities, const Triple& positive,
                                     std::size_t n, Rng& rng, Side side);
// Known set = facts plus train.
std::vector<Triple> sample_negatives(const kg::DatasetBundle& bundle, const Triple& positive, std::size_t n, Rng& rng,
                                     Side side);

// 1 + #{candidates scoring higher} + 0.5 * #{other candidates tying}, over
// all entities except `filtered`. InvalidArgument when target is filtered.
double rank_query(std::span<const double> scores, EntityId target, std::span<const EntityId> filtered = {});

struct Metrics {
    double mr = 0, mrr = 0, hits1 = 0, hits3 = 0, hits10 = 0;
    std::size_t num_queries = 0;
};

// InvalidArgument on an empty list.
Metrics metrics(std::span<const double> ranks);

// Keys in record order: split, mr, mrr, hits1, hits3, hits10, num_queries.
nlohmann::ordered_json to_json(const Metrics& m, const std::string& split);

} // namespace pngnn::train
