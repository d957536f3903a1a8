#pragma once

#include "pngnn/cgnn/engine.hpp"
#include "pngnn/pn/aggregator.hpp"

#include <span>
#include <string>
#include <vector>

namespace pngnn::train {

using diff::Array;
using diff::ParamStore;
using diff::Tape;
using diff::Var;
using kg::EntityId;
using kg::KnowledgeGraph;
using kg::RelationId;
using kg::Triple;

enum class ModelKind { kCgnn, kPngnn };

ModelKind parse_model(const std::string& name);
const char* model_name(ModelKind m);

// C-GNN or PN-GNN over R0 base relations. Query ids run over 2 * R0: q + R0
// is the inverse query of q.
class Model {
public:
    Model(ModelKind kind, cgnn::CgnnConfig cgnn, pn::PnConfig pn, std::size_t base_relations,
          bool inverse_augmentation);

    ModelKind kind() const noexcept { return kind_; }
    const cgnn::Engine& engine() const noexcept { return engine_; }
    const pn::PnConfig& pn_config() const noexcept { return pn_; }
    std::size_t base_relations() const noexcept { return base_relations_; }
    bool inverse_augmentation() const noexcept { return inverse_; }

    // Message-passing graph built from a fact graph over the R0 base relations.
    KnowledgeGraph message_graph(const KnowledgeGraph& facts) const;

    // Edges of `positives` present in `graph`, plus their inverse copies.
    std::vector<Triple> edges_to_remove(const KnowledgeGraph& graph, std::span<const Triple> positives) const;

    std::vector<Var> baseline(Tape& tape, ParamStore& store, const KnowledgeGraph& graph, RelationId q) const;

    // targets x 1 logits for the query (u, q).
    Var logits(Tape& tape, ParamStore& store, const KnowledgeGraph& graph, const std::vector<Var>& base,
               EntityId u, RelationId q, std::span<const EntityId> targets,
               std::span<const Triple> removed = {}) const;

    // Value-only scores of every entity; `base` holds baseline() values.
    // Safe to call concurrently once initialize() has run.
    std::vector<double> score_all(ParamStore& store, const KnowledgeGraph& graph,
                                  const std::vector<Array>& base, EntityId u, RelationId q) const;

    // Creates every parameter in a fixed order so later reads never insert.
    void initialize(ParamStore& store) const;

private:
    ModelKind kind_;
    cgnn::Engine engine_;
    pn::PnConfig pn_;
    std::size_t base_relations_;
    bool inverse_;
};

} // namespace pngnn::train
