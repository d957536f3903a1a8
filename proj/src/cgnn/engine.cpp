#include "pngnn/cgnn/engine.hpp"

#include "pngnn/error.hpp"

#include <algorithm>

namespace pngnn::cgnn {

Message parse_message(const std::string& name) {
    if (name == "translate") {
        return Message::kTranslate;
    }
    if (name == "multiply") {
        return Message::kMultiply;
    }
    if (name == "rotate") {
        return Message::kRotate;
    }
    throw ConfigError("unknown message function '" + name + "' (translate, multiply, rotate)");
}

const char* message_name(Message m) {
    switch (m) {
    case Message::kTranslate:
        return "translate";
    case Message::kMultiply:
        return "multiply";
    case Message::kRotate:
        return "rotate";
    }
    return "?";
}

Aggregator parse_aggregator(const std::string& name) {
    if (name == "sum") {
        return Aggregator::kSum;
    }
    if (name == "mean") {
        return Aggregator::kMean;
    }
    if (name == "max") {
        return Aggregator::kMax;
    }
    if (name == "pna") {
        return Aggregator::kPna;
    }
    throw ConfigError("unknown aggregator '" + name + "' (sum, mean, max, pna)");
}

const char* aggregator_name(Aggregator a) {
    switch (a) {
    case Aggregator::kSum:
        return "sum";
    case Aggregator::kMean:
        return "mean";
    case Aggregator::kMax:
        return "max";
    case Aggregator::kPna:
        return "pna";
    }
    return "?";
}

void CgnnConfig::validate() const {
    if (layers < 1) {
        throw ConfigError("cgnn.layers must be >= 1");
    }
    if (dim < 2) {
        throw ConfigError("cgnn.dim must be >= 2");
    }
    if (message == Message::kRotate && dim % 2 != 0) {
        throw ConfigError("cgnn.dim must be even for the rotate message");
    }
}

nlohmann::json to_json(const CgnnConfig& c) {
    return {{"layers", c.layers},
            {"dim", c.dim},
            {"message", message_name(c.message)},
            {"aggregator", aggregator_name(c.aggregator)},
            {"layer_norm", c.layer_norm},
            {"share_relations", c.share_relations},
            {"query_in_message", c.query_in_message},
            {"activation", diff::activation_name(c.activation)},
            {"scorer_hidden", c.scorer_hidden}};
}

CgnnConfig cgnn_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw ConfigError("cgnn section must be an object");
    }
    CgnnConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "layers") {
                c.layers = value.get<std::size_t>();
            } else if (key == "dim") {
                c.dim = value.get<std::size_t>();
            } else if (key == "message") {
                c.message = parse_message(value.get<std::string>());
            } else if (key == "aggregator") {
                c.aggregator = parse_aggregator(value.get<std::string>());
            } else if (key == "layer_norm") {
                c.layer_norm = value.get<bool>();
            } else if (key == "share_relations") {
                c.share_relations = value.get<bool>();
            } else if (key == "query_in_message") {
                c.query_in_message = value.get<bool>();
            } else if (key == "activation") {
                c.activation = diff::parse_activation(value.get<std::string>());
            } else if (key == "scorer_hidden") {
                c.scorer_hidden = value.get<std::size_t>();
            } else {
                throw ConfigError("unknown key cgnn." + key);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("cgnn section: ") + e.what());
    }
    c.validate();
    return c;
}

Var SparseState::rows(std::span<const EntityId> entities) const {
    std::vector<std::int64_t> idx;
    idx.reserve(entities.size());
    for (EntityId e : entities) {
        idx.push_back(where.at(e));
    }
    return diff::gather_rows_split(compact, baseline, idx);
}

Engine::Engine(CgnnConfig config, std::size_t num_relations)
    : config_(config), num_relations_(num_relations) {
    config_.validate();
    if (num_relations_ == 0) {
        throw ConfigError("engine needs at least one relation");
    }
}

void Engine::check_query(const KnowledgeGraph& graph, EntityId u, RelationId q) const {
    graph.check_entity(u);
    if (q >= num_relations_) {
        throw RangeError("query relation " + std::to_string(q) + " out of range (" +
                         std::to_string(num_relations_) + " relations)");
    }
    if (graph.num_relations() > num_relations_) {
        throw ShapeError("graph has " + std::to_string(graph.num_relations()) + " relations, engine holds " +
                         std::to_string(num_relations_));
    }
}

Var Engine::query_embedding(Tape& tape, ParamStore& store, RelationId q) const {
    if (q >= num_relations_) {
        throw RangeError("query relation " + std::to_string(q) + " out of range");
    }
    Var table = tape.parameter(store.get_or_init("query", num_relations_, config_.dim, 1));
    const std::size_t idx[] = {q};
    return diff::gather_rows(table, idx);
}

Var Engine::init_state(Tape& tape, ParamStore& store, const KnowledgeGraph& graph, EntityId u,
                       RelationId q) const {
    check_query(graph, u, q);
    const std::size_t idx[] = {u};
    return diff::scatter_add_rows(query_embedding(tape, store, q), idx, graph.num_entities());
}

Var Engine::pick(const Rows& in, std::span<const std::int64_t> index) const {
    if (!in.fallback.valid()) {
        std::vector<std::size_t> plain(index.begin(), index.end());
        return diff::gather_rows(in.compact, plain);
    }
    return diff::gather_rows_split(in.compact, in.fallback, index);
}

Var Engine::step(Tape& tape, ParamStore& store, const KnowledgeGraph& graph, const Rows& in,
                 std::span<const EntityId> targets, RelationId q, std::size_t t,
                 std::span<const kg::Triple> removed) const {
    const std::size_t d = config_.dim;
    const std::string layer = "layer" + std::to_string(t);
    const std::size_t rel_cols = config_.message == Message::kRotate ? d / 2 : d;
    Var rel = tape.parameter(
        store.get_or_init(config_.share_relations ? "rel" : layer + ".rel", num_relations_, rel_cols, 1));

    std::vector<std::int64_t> self_idx, src_idx;
    std::vector<std::size_t> rel_idx, offsets{0};
    self_idx.reserve(targets.size());
    for (EntityId v : targets) {
        self_idx.push_back(in.where[v]);
        for (const kg::Edge& e : graph.in_edges(v)) {
            const kg::Triple edge{e.neighbor, e.relation, v};
            if (!removed.empty() && std::find(removed.begin(), removed.end(), edge) != removed.end()) {
                continue;
            }
            src_idx.push_back(in.where[e.neighbor]);
            rel_idx.push_back(e.relation);
        }
        offsets.push_back(src_idx.size());
    }
    if (in.compact.cols() != d) {
        throw ShapeError("layer " + std::to_string(t) + ": state width " + std::to_string(in.compact.cols()) +
                         " != dim " + std::to_string(d));
    }
    Var h_self = pick(in, self_idx);
    Var h_src = pick(in, src_idx);
    Var r = diff::gather_rows(rel, rel_idx);
    Var msg;
    switch (config_.message) {
    case Message::kTranslate:
        msg = diff::add(h_src, r);
        break;
    case Message::kMultiply:
        msg = diff::mul(h_src, r);
        if (config_.query_in_message) {
            std::vector<std::size_t> zeros(rel_idx.size(), 0);
            msg = diff::mul(msg, diff::gather_rows(query_embedding(tape, store, q), zeros));
        }
        break;
    case Message::kRotate:
        msg = diff::rotate_pairs(h_src, r);
        break;
    }

    Var agg;
    switch (config_.aggregator) {
    case Aggregator::kSum:
        agg = diff::segment_reduce(msg, offsets, diff::Reduce::kSum);
        break;
    case Aggregator::kMean:
        agg = diff::segment_reduce(msg, offsets, diff::Reduce::kMean);
        break;
    case Aggregator::kMax:
        agg = diff::segment_reduce(msg, offsets, diff::Reduce::kMax);
        break;
    case Aggregator::kPna: {
        Var mean = diff::segment_reduce(msg, offsets, diff::Reduce::kMean);
        Var sq = diff::segment_reduce(diff::mul(msg, msg), offsets, diff::Reduce::kMean);
        Var std = diff::sqrt_eps(diff::relu(diff::sub(sq, diff::mul(mean, mean))), 1e-6);
        const Var parts[] = {mean, diff::segment_reduce(msg, offsets, diff::Reduce::kMax),
                             diff::segment_reduce(msg, offsets, diff::Reduce::kMin), std};
        agg = diff::linear(tape, store, layer + ".pna", diff::concat_cols(parts), d);
        break;
    }
    }

    const Var both[] = {h_self, agg};
    Var out = diff::activate(diff::linear(tape, store, layer + ".update", diff::concat_cols(both), d),
                             config_.activation);
    if (config_.layer_norm) {
        if (!store.contains(layer + ".ln.gain")) {
            store.set(layer + ".ln.gain", Array(1, d, 1.0));
            store.set(layer + ".ln.bias", Array(1, d, 0.0));
        }
        out = diff::layer_norm(out, tape.parameter(store.at(layer + ".ln.gain")),
                               tape.parameter(store.at(layer + ".ln.bias")));
    }
    return out;
}

Var Engine::layer_step(Tape& tape, ParamStore& store, const KnowledgeGraph& graph, Var h, RelationId q,
                       std::size_t t) const {
    const std::size_t n = graph.num_entities();
    if (h.rows() != n) {
        throw ShapeError("layer_step: state has " + std::to_string(h.rows()) + " rows for " + std::to_string(n) +
                         " entities");
    }
    if (graph.num_relations() > num_relations_) {
        throw ShapeError("layer_step: graph relations exceed the engine's");
    }
    Rows in{h, Var{}, {}};
    in.where.resize(n);
    std::vector<EntityId> all(n);
    for (std::size_t v = 0; v < n; ++v) {
        in.where[v] = static_cast<std::int64_t>(v);
        all[v] = static_cast<EntityId>(v);
    }
    return step(tape, store, graph, in, all, q, t, {});
}

std::vector<Var> Engine::run(Tape& tape, ParamStore& store, const KnowledgeGraph& graph, EntityId u, RelationId q,
                             std::size_t layers) const {
    std::vector<Var> h{init_state(tape, store, graph, u, q)};
    for (std::size_t t = 0; t < layers; ++t) {
        h.push_back(layer_step(tape, store, graph, h.back(), q, t));
    }
    return h;
}

std::vector<Var> Engine::baseline(Tape& tape, ParamStore& store, const KnowledgeGraph& graph, RelationId q) const {
    std::vector<Var> h{tape.constant(Array(graph.num_entities(), config_.dim))};
    for (std::size_t t = 0; t < config_.layers; ++t) {
        h.push_back(layer_step(tape, store, graph, h.back(), q, t));
    }
    return h;
}

SparseState Engine::run_sparse(Tape& tape, ParamStore& store, const KnowledgeGraph& graph,
                               const std::vector<Var>& base, EntityId u, RelationId q,
                               std::span<const kg::Triple> removed) const {
    check_query(graph, u, q);
    const std::size_t n = graph.num_entities();
    if (base.size() != config_.layers + 1 || base.front().rows() != n) {
        throw ShapeError("run_sparse: baseline does not match the graph and layer count");
    }
    Rows in{query_embedding(tape, store, q), base[0], {}};
    in.where.resize(n);
    for (std::size_t v = 0; v < n; ++v) {
        in.where[v] = -static_cast<std::int64_t>(v) - 1;
    }
    in.where[u] = 0;

    std::vector<char> mark(n, 0);
    std::vector<EntityId> active{u};
    mark[u] = 1;
    for (const kg::Triple& e : removed) {
        graph.check_entity(e.tail);
        if (!mark[e.tail]) {
            mark[e.tail] = 1;
            active.push_back(e.tail);
        }
    }
    // Removed tails only differ from layer 1 on; they are recomputed from t = 0.
    std::vector<EntityId> current{u};
    for (std::size_t t = 0; t < config_.layers; ++t) {
        const std::size_t before = active.size();
        for (std::size_t k = 0; k < before; ++k) {
            for (const kg::Edge& e : graph.out_edges(active[k])) {
                if (!mark[e.neighbor]) {
                    mark[e.neighbor] = 1;
                    active.push_back(e.neighbor);
                }
            }
        }
        std::vector<EntityId> targets = active;
        std::sort(targets.begin(), targets.end());
        Var next = step(tape, store, graph, in, targets, q, t, removed);
        for (EntityId v : current) {
            in.where[v] = -static_cast<std::int64_t>(v) - 1;
        }
        for (std::size_t k = 0; k < targets.size(); ++k) {
            in.where[targets[k]] = static_cast<std::int64_t>(k);
        }
        in.compact = next;
        in.fallback = base[t + 1];
        current = std::move(targets);
    }
    SparseState out;
    out.compact = in.compact;
    out.baseline = base.back();
    out.where = std::move(in.where);
    out.active = current.size();
    return out;
}

Var Engine::score(Tape& tape, ParamStore& store, Var rows) const {
    std::vector<std::size_t> dims{rows.cols()};
    if (config_.scorer_hidden > 0) {
        dims.push_back(config_.scorer_hidden);
    }
    dims.push_back(1);
    return diff::mlp_forward(tape, store, "score", rows, dims, diff::Activation::kRelu);
}

PairwiseState Engine::evaluate(ParamStore& store, const KnowledgeGraph& graph, EntityId u, RelationId q) const {
    Tape tape(false);
    PairwiseState s;
    s.source = u;
    s.query = q;
    for (const Var& h : run(tape, store, graph, u, q)) {
        s.h.push_back(h.value());
    }
    return s;
}

} // namespace pngnn::cgnn
