#pragma once

#include "pngnn/diff/array.hpp"
#include "pngnn/logic/formula.hpp"
#include "pngnn/pn/distance.hpp"

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace pngnn::logic {

using diff::Array;

// sub(phi) with children before parents; identical subtrees share a slot.
struct SubformulaIndex {
    std::vector<FormulaPtr> slots;
    std::map<std::string, std::size_t> slot_of; // keyed by to_string

    std::size_t size() const noexcept { return slots.size(); }
    std::size_t slot(const Formula& f) const;
    std::size_t root() const { return slots.size() - 1; }
};

SubformulaIndex decompose(const FormulaPtr& f);

using Slot = std::pair<std::size_t, std::size_t>;

struct PnWeights {
    std::size_t hops = 2;            // |d|: slots (i, j) with i + j <= hops + 1
    std::map<Slot, Array> a_pn;     // L x L per (i, j) slot; absent means zero
    std::map<Slot, Array> b_pn;     // 1 x L per (i, j) slot; absent means zero
};

// Discrete GNN h' = clip(h C + sum_r sum_{w -r-> v} h_w A_r + b, 0, 1).
struct CompiledGnn {
    SubformulaIndex index;
    Array c;                        // L x L
    std::map<kg::RelationId, Array> a; // L x L per relation; absent means zero
    Array b;                        // 1 x L
    std::size_t layers = 0;
    Signature signature;
    std::optional<PnWeights> pn;

    std::size_t width() const noexcept { return index.size(); }
};

CompiledGnn compile(const FormulaPtr& f, const Signature& sig);

// Entity x L matrix of bits after `layers` (default g.layers) iterations.
// When `trace` is given it receives h^(0..layers).
Array forward_discrete(const CompiledGnn& g, const KnowledgeGraph& graph, const Valuation& valuation,
                       std::optional<std::size_t> layers = std::nullopt, std::vector<Array>* trace = nullptr);

// Adds (A_pn)_{count_slot, root} = -1 and (b_pn)_root = 1 on the (i, j) slot,
// so the readout at the root slot is clip(h_v - h_ij[count_slot] + 1).
CompiledGnn compile_pn_separator(const CompiledGnn& base, std::size_t count_slot, Slot slot = {1, 2});

// clip(h_v + sum_{(i,j)} (sum-pooled h_ij) A_pn + b_pn), one L-vector. Needs
// the pair's distance table with j_max covering every weighted slot.
std::vector<double> pn_readout(const CompiledGnn& g, const Array& h_final, const pn::DistanceTable& table,
                               EntityId v);
// Root bit of pn_readout.
double separator_bit(const CompiledGnn& g, const Array& h_final, const pn::DistanceTable& table, EntityId v);
// min(base root bit, separator bit): fires only when the base formula holds
// and the counted stratum has at most one member.
double gated_separator_bit(const CompiledGnn& g, const Array& h_final, const pn::DistanceTable& table,
                           EntityId v);

// Two relation-disjoint length-(k+1) chains from source to target whose
// first hop uses relation 0. In `merged` both chains leave the same first
// node; in `split` each has its own. Relations: 0 (first hop), 1..k (chain
// one), k+1..2k (chain two).
struct KhopPair {
    KnowledgeGraph merged;
    KnowledgeGraph split;
    EntityId source = 0;
    EntityId target_merged = 0;
    EntityId target_split = 0;
    std::size_t k = 0;
};
KhopPair khop_counterexample(std::size_t k);

// C_{k+1}(x) and C'_{k+1}(x) conjoined, both anchored at P0 (the source).
struct ChainPairFormula {
    FormulaPtr formula;
    FormulaPtr first_hop; // E>=1 r0.P0, the slot counted by the separator
};
ChainPairFormula chain_pair_formula(std::size_t k);

// Report comparing forward_discrete against check_all slot by slot.
struct VerifyReport {
    std::size_t entities = 0;
    std::vector<std::string> slot_text;
    std::vector<std::size_t> agree; // per slot
    bool passed = false;
};
VerifyReport verify_compiled(const CompiledGnn& g, const KnowledgeGraph& graph, const Valuation& valuation);

nlohmann::json compiled_to_json(const CompiledGnn& g);
// Replaces the weights of `g` by those in `j` (same slot table); used to
// replay dumped or edited weights.
CompiledGnn compiled_with_weights(const CompiledGnn& g, const nlohmann::json& j);

} // namespace pngnn::logic
