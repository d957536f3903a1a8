#pragma once

#include "pngnn/diff/nn.hpp"
#include "pngnn/kg/graph.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace pngnn::cgnn {

using diff::Array;
using diff::ParamStore;
using diff::Tape;
using diff::Var;
using kg::EntityId;
using kg::KnowledgeGraph;
using kg::RelationId;

enum class Message { kTranslate, kMultiply, kRotate };
enum class Aggregator { kSum, kMean, kMax, kPna };

Message parse_message(const std::string& name);
const char* message_name(Message m);
Aggregator parse_aggregator(const std::string& name);
const char* aggregator_name(Aggregator a);

struct CgnnConfig {
    std::size_t layers = 6;
    std::size_t dim = 32;
    Message message = Message::kMultiply;
    Aggregator aggregator = Aggregator::kSum;
    bool layer_norm = false;
    bool share_relations = false;
    // multiply only: messages are additionally scaled by z_q
    bool query_in_message = false;
    diff::Activation activation = diff::Activation::kRelu;
    std::size_t scorer_hidden = 32; // 0 makes the scorer a single linear map

    // ConfigError on L < 1, dim < 2, odd dim with rotate.
    void validate() const;
};

nlohmann::json to_json(const CgnnConfig& c);
// Missing keys keep their defaults; unknown keys are a ConfigError.
CgnnConfig cgnn_config_from_json(const nlohmann::json& j);

// Per-layer entity x dim states for one (u, q) conditioning.
struct PairwiseState {
    EntityId source = 0;
    RelationId query = 0;
    std::vector<Array> h; // h[0..L]
};

// Final-layer rows of a light-cone run. Entities outside the cone share the
// no-source baseline rows.
struct SparseState {
    Var compact;                      // active entities x dim
    Var baseline;                     // all entities x dim
    std::vector<std::int64_t> where;  // >= 0: compact row, < 0: baseline row -(e + 1)
    std::size_t active = 0;

    Var rows(std::span<const EntityId> entities) const;
};

class Engine {
public:
    Engine(CgnnConfig config, std::size_t num_relations);

    const CgnnConfig& config() const noexcept { return config_; }
    std::size_t num_relations() const noexcept { return num_relations_; }

    // 1 x dim query embedding z_q.
    Var query_embedding(Tape& tape, ParamStore& store, RelationId q) const;
    // Entity x dim, row u = z_q, zero elsewhere.
    Var init_state(Tape& tape, ParamStore& store, const KnowledgeGraph& graph, EntityId u, RelationId q) const;
    // h^(t+1) from h^(t) over every entity.
    Var layer_step(Tape& tape, ParamStore& store, const KnowledgeGraph& graph, Var h, RelationId q,
                   std::size_t t) const;
    // h^(0..layers); `layers` defaults to config().layers.
    std::vector<Var> run(Tape& tape, ParamStore& store, const KnowledgeGraph& graph, EntityId u, RelationId q,
                         std::size_t layers) const;
    std::vector<Var> run(Tape& tape, ParamStore& store, const KnowledgeGraph& graph, EntityId u,
                         RelationId q) const {
        return run(tape, store, graph, u, q, config_.layers);
    }

    // Every layer of the run with an all-zero initial state. Depends on q
    // only when multiply messages carry the query.
    std::vector<Var> baseline(Tape& tape, ParamStore& store, const KnowledgeGraph& graph, RelationId q = 0) const;
    bool baseline_depends_on_query() const noexcept {
        return config_.message == Message::kMultiply && config_.query_in_message;
    }
    // Same final rows as run() but only recomputes entities within t hops of
    // u at layer t. Edges listed in `removed` are left out of aggregation;
    // their tails join the recomputed set. `base` must be baseline() on the
    // same graph, store, tape and (if it matters) query.
    SparseState run_sparse(Tape& tape, ParamStore& store, const KnowledgeGraph& graph,
                           const std::vector<Var>& base, EntityId u,
                           RelationId q, std::span<const kg::Triple> removed = {}) const;

    // rows x 1 logits from an MLP over each row.
    Var score(Tape& tape, ParamStore& store, Var rows) const;

    // Value-only convenience wrapper around run().
    PairwiseState evaluate(ParamStore& store, const KnowledgeGraph& graph, EntityId u, RelationId q) const;

private:
    struct Rows {
        Var compact;
        Var fallback; // invalid in dense mode
        std::vector<std::int64_t> where;
    };
    Var pick(const Rows& in, std::span<const std::int64_t> index) const;
    Var step(Tape& tape, ParamStore& store, const KnowledgeGraph& graph, const Rows& in,
             std::span<const EntityId> targets, RelationId q, std::size_t t,
             std::span<const kg::Triple> removed) const;
    void check_query(const KnowledgeGraph& graph, EntityId u, RelationId q) const;

    CgnnConfig config_;
    std::size_t num_relations_;
};

} // namespace pngnn::cgnn
