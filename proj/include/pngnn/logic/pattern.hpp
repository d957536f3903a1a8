#pragma once

#include "pngnn/logic/formula.hpp"

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace pngnn::logic {

// Pattern node: a variable name or a constant bound to an entity.
struct Term {
    std::string var;
    std::optional<EntityId> entity;

    static Term variable(std::string name) { return Term{std::move(name), std::nullopt}; }
    static Term constant(EntityId e) { return Term{{}, e}; }
    bool is_constant() const noexcept { return entity.has_value(); }
    bool operator==(const Term&) const = default;
};

struct PatternEdge {
    Term src;
    RelationId rel = 0;
    Term dst;
};

// At least n incoming rel-edges at `target` (the I_N side condition).
struct CountConstraint {
    Term target;
    RelationId rel = 0;
    std::uint32_t n = 1;
};

// Binary rule R(x, y) as an edge-labelled pattern graph.
struct RulePattern {
    std::string name;
    std::string x = "x";
    std::string y = "y";
    std::vector<PatternEdge> edges;
    std::vector<CountConstraint> counts;

    std::vector<std::string> variables() const;
    RelationId max_relation() const;
};

// Named constructors. Relation ids are supplied in the order r1, r2, ...
RulePattern chain_pattern(std::span<const RelationId> rels); // C_k, k = rels.size()
RulePattern i_pattern(RelationId r1, RelationId r2, RelationId r3, RelationId r4, std::uint32_t n);
RulePattern t_pattern(RelationId r1, RelationId r2, RelationId r3, RelationId r4, RelationId r5);
RulePattern u_pattern(RelationId r1, RelationId r2, RelationId r3, RelationId r4, RelationId r5);

// Connectivity, x/y presence and N >= 1; ValidationError otherwise.
void validate(const RulePattern& pattern);

using CoverageSet = std::set<std::pair<EntityId, EntityId>>;

// All (x, y) with G |= R(x, y), found by backtracking over homomorphisms.
// Optional fixed endpoints restrict the search.
CoverageSet coverage(const KnowledgeGraph& graph, const RulePattern& pattern,
                     std::optional<EntityId> fixed_x = std::nullopt,
                     std::optional<EntityId> fixed_y = std::nullopt);
bool covers(const KnowledgeGraph& graph, const RulePattern& pattern, EntityId x, EntityId y);

// Binds an inner variable to an entity. InvalidArgument for x, y or an
// unknown variable.
RulePattern substitute_constant(const RulePattern& pattern, const std::string& var, EntityId entity);

struct MarkedFormula {
    FormulaPtr formula;
    Valuation valuation;
    std::size_t num_predicates = 0;
};

// Source-conditioned unary formula with P0 = {u} (constants get P1, P2, ...).
// Works for patterns whose inner variables each have exactly one outgoing
// edge and whose edges form a tree towards y (C_k, I_N, T); anything else,
// U in particular, raises UnsupportedError.
MarkedFormula mark_source(const RulePattern& pattern, EntityId u);

nlohmann::json pattern_to_json(const RulePattern& pattern);
RulePattern pattern_from_json(const nlohmann::json& j);

// Random connected pattern over num_relations relations with up to
// max_inner inner variables.
RulePattern random_pattern(Rng& rng, std::size_t num_relations, std::size_t max_inner);

} // namespace pngnn::logic
