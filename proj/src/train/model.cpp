#include "pngnn/train/model.hpp"

#include "pngnn/error.hpp"

#include <algorithm>
#include <numeric>

namespace pngnn::train {

ModelKind parse_model(const std::string& name) {
    if (name == "cgnn") {
        return ModelKind::kCgnn;
    }
    if (name == "pngnn") {
        return ModelKind::kPngnn;
    }
    throw ConfigError("unknown model '" + name + "' (cgnn, pngnn)");
}

const char* model_name(ModelKind m) { return m == ModelKind::kCgnn ? "cgnn" : "pngnn"; }

Model::Model(ModelKind kind, cgnn::CgnnConfig cgnn, pn::PnConfig pn, std::size_t base_relations,
             bool inverse_augmentation)
    : kind_(kind), engine_(cgnn, 2 * base_relations), pn_(std::move(pn)), base_relations_(base_relations),
      inverse_(inverse_augmentation) {
    if (base_relations == 0) {
        throw ConfigError("model needs at least one relation");
    }
    pn_.validate();
}

KnowledgeGraph Model::message_graph(const KnowledgeGraph& facts) const {
    if (facts.inverse_augmented() || facts.num_relations() > base_relations_) {
        throw CompatibilityError("message_graph expects a fact graph over the " + std::to_string(base_relations_) +
                                 " base relations");
    }
    if (!inverse_) {
        return facts;
    }
    // Widen to R0 first so inverse ids land at q + R0.
    KnowledgeGraph widened(facts.num_entities(), base_relations_,
                           std::vector<Triple>(facts.triples().begin(), facts.triples().end()));
    return kg::augment_inverses(widened);
}

std::vector<Triple> Model::edges_to_remove(const KnowledgeGraph& graph, std::span<const Triple> positives) const {
    std::vector<Triple> out;
    auto present = [&](const Triple& t) {
        if (t.head >= graph.num_entities() || t.relation >= graph.num_relations()) {
            return false;
        }
        for (const kg::Edge& e : graph.out_edges(t.head, t.relation)) {
            if (e.neighbor == t.tail) {
                return true;
            }
        }
        return false;
    };
    for (const Triple& t : positives) {
        const Triple base{t.head, static_cast<RelationId>(t.relation % base_relations_), t.tail};
        const Triple fwd = t.relation < base_relations_ ? base : Triple{t.tail, base.relation, t.head};
        const Triple inv{fwd.tail, static_cast<RelationId>(fwd.relation + base_relations_), fwd.head};
        for (const Triple& e : {fwd, inv}) {
            if (present(e) && std::find(out.begin(), out.end(), e) == out.end()) {
                out.push_back(e);
            }
        }
    }
    return out;
}

std::vector<Var> Model::baseline(Tape& tape, ParamStore& store, const KnowledgeGraph& graph, RelationId q) const {
    return engine_.baseline(tape, store, graph, q);
}

Var Model::logits(Tape& tape, ParamStore& store, const KnowledgeGraph& graph, const std::vector<Var>& base,
                  EntityId u, RelationId q, std::span<const EntityId> targets,
                  std::span<const Triple> removed) const {
    const cgnn::SparseState state = engine_.run_sparse(tape, store, graph, base, u, q, removed);
    if (kind_ == ModelKind::kCgnn) {
        return engine_.score(tape, store, state.rows(targets));
    }
    std::vector<EntityId> unique(targets.begin(), targets.end());
    std::sort(unique.begin(), unique.end());
    unique.erase(std::unique(unique.begin(), unique.end()), unique.end());
    const pn::DistanceTable table = pn::compute_distances(graph, u, pn_.hops, unique, removed);
    const pn::RowSource rows = [&state](std::span<const EntityId> e) { return state.rows(e); };
    const Var fused = pn::fuse_khop(tape, store, pn_, engine_.config().dim, rows, table, targets);
    return engine_.score(tape, store, fused);
}

std::vector<double> Model::score_all(ParamStore& store, const KnowledgeGraph& graph, const std::vector<Array>& base,
                                     EntityId u, RelationId q) const {
    Tape tape(false);
    std::vector<Var> vars;
    vars.reserve(base.size());
    for (const Array& a : base) {
        vars.push_back(tape.constant(a));
    }
    std::vector<EntityId> all(graph.num_entities());
    std::iota(all.begin(), all.end(), EntityId{0});
    const Var out = logits(tape, store, graph, vars, u, q, all);
    const auto& v = out.value().values();
    return {v.begin(), v.end()};
}

void Model::initialize(ParamStore& store) const {
    const KnowledgeGraph tiny = message_graph(KnowledgeGraph(2, base_relations_, {{0, 0, 1}}));
    Tape tape(false);
    const std::vector<Var> base = baseline(tape, store, tiny, 0);
    const std::vector<EntityId> targets{0, 1};
    logits(tape, store, tiny, base, 0, 0, targets);
}

} // namespace pngnn::train
