#pragma once

#include "pngnn/kg/graph.hpp"
#include "pngnn/rng.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace pngnn::logic {

using kg::EntityId;
using kg::KnowledgeGraph;
using kg::RelationId;

enum class Kind { kTop, kPred, kNot, kAnd, kExists };

struct Formula;
using FormulaPtr = std::shared_ptr<const Formula>;

// Counting modal logic node. Not and Exists keep their operand in `left`.
struct Formula {
    Kind kind = Kind::kTop;
    std::uint32_t pred = 0;
    std::uint32_t count = 1;
    RelationId rel = 0;
    FormulaPtr left;
    FormulaPtr right;
};

FormulaPtr top();
FormulaPtr bottom(); // Not(Top)
FormulaPtr pred(std::uint32_t index);
FormulaPtr negate(FormulaPtr f);
FormulaPtr conj(FormulaPtr a, FormulaPtr b);
FormulaPtr disj(FormulaPtr a, FormulaPtr b); // Not(And(Not a, Not b))
// At least n in-neighbors through relation rel satisfy body.
FormulaPtr exists(std::uint32_t n, RelationId rel, FormulaPtr body);

bool same_formula(const Formula& a, const Formula& b);
std::size_t depth(const Formula& f);
std::size_t node_count(const Formula& f);
// Canonical text form, also used as the structural key for sharing.
std::string to_string(const Formula& f);

struct Signature {
    std::size_t num_predicates = 0;
    std::size_t num_relations = 0;
};

// SignatureError for out-of-range predicate/relation indices, ValidationError
// for counts below 1 or missing children.
void validate(const Formula& f, const Signature& sig);

// Predicate index -> satisfying entities.
class Valuation {
public:
    Valuation() = default;
    Valuation& set(std::uint32_t pred, std::vector<EntityId> members);
    bool bound(std::uint32_t pred) const { return sets_.count(pred) != 0; }
    bool holds(std::uint32_t pred, EntityId v) const;
    const std::map<std::uint32_t, std::vector<EntityId>>& sets() const noexcept { return sets_; }
    // Indicator vector over n entities; SignatureError when unbound.
    std::vector<std::uint8_t> bits(std::uint32_t pred, std::size_t n) const;

private:
    std::map<std::uint32_t, std::vector<EntityId>> sets_;
};

// G, v |= f by direct recursion on the definition.
bool check(const KnowledgeGraph& graph, const Formula& f, EntityId v, const Valuation& valuation);

// Satisfaction bit per entity, each distinct subformula evaluated once.
std::vector<std::uint8_t> check_all(const KnowledgeGraph& graph, const Formula& f, const Valuation& valuation);

nlohmann::json formula_to_json(const Formula& f);
// Accepts kinds top/pred/not/and/exists plus the sugar "or" and "bottom".
FormulaPtr formula_from_json(const nlohmann::json& j);

// Leaves only at depth 1; deterministic per seed.
FormulaPtr random_formula(std::uint64_t seed, const Signature& sig, std::size_t max_depth,
                          std::uint32_t max_count);
FormulaPtr random_formula(Rng& rng, const Signature& sig, std::size_t max_depth, std::uint32_t max_count);

} // namespace pngnn::logic
