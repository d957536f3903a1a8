#include "pngnn/logic/compiler.hpp"

#include "pngnn/error.hpp"

#include <algorithm>
#include <functional>

namespace pngnn::logic {

std::size_t SubformulaIndex::slot(const Formula& f) const {
    auto it = slot_of.find(to_string(f));
    if (it == slot_of.end()) {
        throw InvalidArgument("subformula '" + to_string(f) + "' has no slot");
    }
    return it->second;
}

SubformulaIndex decompose(const FormulaPtr& f) {
    SubformulaIndex index;
    std::function<std::size_t(const FormulaPtr&)> visit = [&](const FormulaPtr& node) -> std::size_t {
        const std::string key = to_string(*node);
        if (auto it = index.slot_of.find(key); it != index.slot_of.end()) {
            return it->second;
        }
        if (node->left) {
            visit(node->left);
        }
        if (node->right) {
            visit(node->right);
        }
        const std::size_t s = index.slots.size();
        index.slots.push_back(node);
        index.slot_of.emplace(key, s);
        return s;
    };
    visit(f);
    return index;
}

namespace {

double clip(double x) { return std::min(std::max(x, 0.0), 1.0); }

} // namespace

CompiledGnn compile(const FormulaPtr& f, const Signature& sig) {
    validate(*f, sig);
    CompiledGnn g;
    g.index = decompose(f);
    g.signature = sig;
    const std::size_t L = g.index.size();
    g.c = Array(L, L);
    g.b = Array(1, L);
    g.layers = L;
    for (std::size_t l = 0; l < L; ++l) {
        const Formula& node = *g.index.slots[l];
        switch (node.kind) {
        case Kind::kTop:
            g.b(0, l) = 1.0;
            break;
        case Kind::kPred:
            g.c(l, l) = 1.0;
            break;
        case Kind::kNot:
            g.c(g.index.slot(*node.left), l) = -1.0;
            g.b(0, l) = 1.0;
            break;
        case Kind::kAnd: {
            const std::size_t j = g.index.slot(*node.left);
            const std::size_t k = g.index.slot(*node.right);
            g.c(j, l) = 1.0;
            g.c(k, l) = 1.0;
            // And(p, p) collapses to p; a -1 bias there would need weight 2.
            g.b(0, l) = j == k ? 0.0 : -1.0;
            break;
        }
        case Kind::kExists: {
            auto [it, fresh] = g.a.try_emplace(node.rel, L, L);
            it->second(g.index.slot(*node.left), l) = 1.0;
            g.b(0, l) = 1.0 - static_cast<double>(node.count);
            break;
        }
        }
    }
    return g;
}

Array forward_discrete(const CompiledGnn& g, const KnowledgeGraph& graph, const Valuation& valuation,
                       std::optional<std::size_t> layers, std::vector<Array>* trace) {
    const std::size_t L = g.width();
    const std::size_t n = graph.num_entities();
    if (g.c.rows() != L || g.c.cols() != L || g.b.cols() != L) {
        throw ShapeError("forward_discrete: weight shapes do not match the slot table");
    }
    for (const auto& [r, m] : g.a) {
        if (m.rows() != L || m.cols() != L) {
            throw ShapeError("forward_discrete: A_r" + std::to_string(r) + " shape mismatch");
        }
        if (r >= graph.num_relations()) {
            throw ShapeError("forward_discrete: weights use relation " + std::to_string(r) + " but graph has " +
                             std::to_string(graph.num_relations()));
        }
    }
    Array h(n, L);
    for (std::size_t l = 0; l < L; ++l) {
        const Formula& node = *g.index.slots[l];
        if (node.kind == Kind::kPred) {
            const auto bits = valuation.bits(node.pred, n);
            for (std::size_t v = 0; v < n; ++v) {
                h(v, l) = bits[v];
            }
        }
    }
    if (trace) {
        trace->assign(1, h);
    }
    const std::size_t steps = layers.value_or(g.layers);
    for (std::size_t t = 0; t < steps; ++t) {
        Array next(n, L);
        for (std::size_t v = 0; v < n; ++v) {
            for (std::size_t l = 0; l < L; ++l) {
                double acc = g.b(0, l);
                for (std::size_t k = 0; k < L; ++k) {
                    acc += h(v, k) * g.c(k, l);
                }
                next(v, l) = acc;
            }
        }
        for (const auto& [r, a] : g.a) {
            for (std::size_t v = 0; v < n; ++v) {
                for (const kg::Edge& e : graph.in_edges(static_cast<EntityId>(v), r)) {
                    for (std::size_t k = 0; k < L; ++k) {
                        const double hw = h(e.neighbor, k);
                        if (hw == 0.0) {
                            continue;
                        }
                        for (std::size_t l = 0; l < L; ++l) {
                            next(v, l) += hw * a(k, l);
                        }
                    }
                }
            }
        }
        for (double& x : next.values()) {
            x = clip(x);
        }
        h = std::move(next);
        if (trace) {
            trace->push_back(h);
        }
    }
    return h;
}

CompiledGnn compile_pn_separator(const CompiledGnn& base, std::size_t count_slot, Slot slot) {
    const std::size_t L = base.width();
    if (count_slot >= L) {
        throw RangeError("compile_pn_separator: count slot " + std::to_string(count_slot) + " out of range");
    }
    if (slot.first < 1 || slot.second < 1) {
        throw InvalidArgument("compile_pn_separator: (i, j) must both be >= 1");
    }
    CompiledGnn g = base;
    PnWeights pn;
    pn.hops = slot.first + slot.second - 1;
    Array a(L, L);
    a(count_slot, base.index.root()) = -1.0;
    Array b(1, L);
    b(0, base.index.root()) = 1.0;
    pn.a_pn.emplace(slot, std::move(a));
    pn.b_pn.emplace(slot, std::move(b));
    g.pn = std::move(pn);
    return g;
}

std::vector<double> pn_readout(const CompiledGnn& g, const Array& h_final, const pn::DistanceTable& table,
                               EntityId v) {
    const std::size_t L = g.width();
    if (h_final.cols() != L || v >= h_final.rows()) {
        throw ShapeError("pn_readout: state does not match the compiled width");
    }
    if (!g.pn) {
        throw StateError("pn_readout: network has no path-neighbor weights");
    }
    std::vector<double> out(L);
    for (std::size_t l = 0; l < L; ++l) {
        out[l] = h_final(v, l);
    }
    std::vector<Slot> slots;
    for (const auto& [s, m] : g.pn->a_pn) {
        slots.push_back(s);
    }
    for (const auto& [s, m] : g.pn->b_pn) {
        if (!g.pn->a_pn.count(s)) {
            slots.push_back(s);
        }
    }
    for (const Slot& s : slots) {
        if (s.second > table.j_max()) {
            throw StateError("pn_readout: slot (" + std::to_string(s.first) + "," + std::to_string(s.second) +
                             ") needs reverse strata to depth " + std::to_string(s.second) + ", table has " +
                             std::to_string(table.j_max()));
        }
        std::vector<double> pooled(L, 0.0);
        for (EntityId w : pn::path_neighbors(table, v, s.first, s.second)) {
            for (std::size_t k = 0; k < L; ++k) {
                pooled[k] += h_final(w, k);
            }
        }
        if (auto it = g.pn->a_pn.find(s); it != g.pn->a_pn.end()) {
            for (std::size_t k = 0; k < L; ++k) {
                for (std::size_t l = 0; l < L; ++l) {
                    out[l] += pooled[k] * it->second(k, l);
                }
            }
        }
        if (auto it = g.pn->b_pn.find(s); it != g.pn->b_pn.end()) {
            for (std::size_t l = 0; l < L; ++l) {
                out[l] += it->second(0, l);
            }
        }
    }
    for (double& x : out) {
        x = clip(x);
    }
    return out;
}

double separator_bit(const CompiledGnn& g, const Array& h_final, const pn::DistanceTable& table, EntityId v) {
    return pn_readout(g, h_final, table, v)[g.index.root()];
}

double gated_separator_bit(const CompiledGnn& g, const Array& h_final, const pn::DistanceTable& table,
                           EntityId v) {
    return std::min(h_final(v, g.index.root()), separator_bit(g, h_final, table, v));
}

KhopPair khop_counterexample(std::size_t k) {
    if (k < 2) {
        throw InvalidArgument("khop_counterexample: k must be >= 2");
    }
    const auto R = static_cast<kg::RelationId>(2 * k + 1);
    auto chain = [&](std::vector<kg::Triple>& t, EntityId start, kg::RelationId first_rel, EntityId first_mid,
                     EntityId target) {
        EntityId prev = start;
        for (std::size_t s = 1; s <= k; ++s) {
            const EntityId next = s < k ? static_cast<EntityId>(first_mid + s - 1) : target;
            t.push_back({prev, static_cast<kg::RelationId>(first_rel + s - 1), next});
            prev = next;
        }
    };
    KhopPair out;
    out.k = k;
    out.source = 0;
    {
        // u=0, a=1, chain one 2..k, chain two k+1..2k-1, v=2k
        const auto v = static_cast<EntityId>(2 * k);
        std::vector<kg::Triple> t{{0, 0, 1}};
        chain(t, 1, 1, 2, v);
        chain(t, 1, static_cast<kg::RelationId>(k + 1), static_cast<EntityId>(k + 1), v);
        out.merged = KnowledgeGraph(2 * k + 1, R, std::move(t));
        out.target_merged = v;
    }
    {
        // u=0, a=1, b=2, chain one 3..k+1, chain two k+2..2k, v=2k+1
        const auto v = static_cast<EntityId>(2 * k + 1);
        std::vector<kg::Triple> t{{0, 0, 1}, {0, 0, 2}};
        chain(t, 1, 1, 3, v);
        chain(t, 2, static_cast<kg::RelationId>(k + 1), static_cast<EntityId>(k + 2), v);
        out.split = KnowledgeGraph(2 * k + 2, R, std::move(t));
        out.target_split = v;
    }
    return out;
}

ChainPairFormula chain_pair_formula(std::size_t k) {
    if (k < 1) {
        throw InvalidArgument("chain_pair_formula: k must be >= 1");
    }
    ChainPairFormula out;
    out.first_hop = exists(1, 0, pred(0));
    FormulaPtr one = out.first_hop;
    FormulaPtr two = out.first_hop;
    for (std::size_t s = 1; s <= k; ++s) {
        one = exists(1, static_cast<kg::RelationId>(s), one);
        two = exists(1, static_cast<kg::RelationId>(k + s), two);
    }
    out.formula = conj(one, two);
    return out;
}

VerifyReport verify_compiled(const CompiledGnn& g, const KnowledgeGraph& graph, const Valuation& valuation) {
    VerifyReport rep;
    rep.entities = graph.num_entities();
    const Array h = forward_discrete(g, graph, valuation);
    rep.passed = true;
    for (std::size_t l = 0; l < g.width(); ++l) {
        const auto bits = check_all(graph, *g.index.slots[l], valuation);
        std::size_t agree = 0;
        for (std::size_t v = 0; v < rep.entities; ++v) {
            agree += h(v, l) == static_cast<double>(bits[v]);
        }
        rep.slot_text.push_back(to_string(*g.index.slots[l]));
        rep.agree.push_back(agree);
        rep.passed = rep.passed && agree == rep.entities;
    }
    return rep;
}

namespace {

nlohmann::json matrix_json(const Array& a) {
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < a.rows(); ++i) {
        rows.push_back(std::vector<double>(a.row(i).begin(), a.row(i).end()));
    }
    return rows;
}

Array matrix_from(const nlohmann::json& j, std::size_t rows, std::size_t cols, const std::string& what) {
    if (!j.is_array() || j.size() != rows) {
        throw ShapeError(what + ": expected " + std::to_string(rows) + " rows");
    }
    Array out(rows, cols);
    for (std::size_t i = 0; i < rows; ++i) {
        const auto& row = j.at(i);
        if (!row.is_array() || row.size() != cols) {
            throw ShapeError(what + ": row " + std::to_string(i) + " must have " + std::to_string(cols) + " values");
        }
        for (std::size_t c = 0; c < cols; ++c) {
            out(i, c) = row.at(c).get<double>();
        }
    }
    return out;
}

std::string slot_key(const Slot& s) { return std::to_string(s.first) + "," + std::to_string(s.second); }

} // namespace

nlohmann::json compiled_to_json(const CompiledGnn& g) {
    nlohmann::json j;
    nlohmann::json slots = nlohmann::json::array();
    for (const auto& f : g.index.slots) {
        slots.push_back(to_string(*f));
    }
    j["slots"] = slots;
    j["layers"] = g.layers;
    j["c"] = matrix_json(g.c);
    j["b"] = matrix_json(g.b)[0];
    nlohmann::json a = nlohmann::json::object();
    for (const auto& [r, m] : g.a) {
        a[std::to_string(r)] = matrix_json(m);
    }
    j["a"] = a;
    if (g.pn) {
        nlohmann::json pn;
        pn["hops"] = g.pn->hops;
        nlohmann::json ap = nlohmann::json::object(), bp = nlohmann::json::object();
        for (const auto& [s, m] : g.pn->a_pn) {
            ap[slot_key(s)] = matrix_json(m);
        }
        for (const auto& [s, m] : g.pn->b_pn) {
            bp[slot_key(s)] = matrix_json(m)[0];
        }
        pn["a_pn"] = ap;
        pn["b_pn"] = bp;
        j["pn"] = pn;
    }
    return j;
}

CompiledGnn compiled_with_weights(const CompiledGnn& g, const nlohmann::json& j) {
    try {
        const std::size_t L = g.width();
        CompiledGnn out = g;
        if (j.contains("slots")) {
            const auto slots = j.at("slots").get<std::vector<std::string>>();
            if (slots.size() != L) {
                throw ShapeError("weights: slot table has " + std::to_string(slots.size()) + " entries, expected " +
                                 std::to_string(L));
            }
        }
        out.layers = j.value("layers", g.layers);
        out.c = matrix_from(j.at("c"), L, L, "weights.c");
        out.b = matrix_from(nlohmann::json::array({j.at("b")}), 1, L, "weights.b");
        out.a.clear();
        for (const auto& [key, m] : j.at("a").items()) {
            out.a.emplace(static_cast<kg::RelationId>(std::stoul(key)), matrix_from(m, L, L, "weights.a." + key));
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("weights: ") + e.what());
    }
}

} // namespace pngnn::logic
