#include "pngnn/logic/pattern.hpp"

#include "pngnn/error.hpp"

#include <algorithm>
#include <functional>
#include <map>

namespace pngnn::logic {

std::vector<std::string> RulePattern::variables() const {
    std::vector<std::string> out{x, y};
    auto add = [&](const Term& t) {
        if (!t.is_constant() && std::find(out.begin(), out.end(), t.var) == out.end()) {
            out.push_back(t.var);
        }
    };
    for (const PatternEdge& e : edges) {
        add(e.src);
        add(e.dst);
    }
    for (const CountConstraint& c : counts) {
        add(c.target);
    }
    return out;
}

RelationId RulePattern::max_relation() const {
    RelationId m = 0;
    for (const PatternEdge& e : edges) {
        m = std::max(m, e.rel);
    }
    for (const CountConstraint& c : counts) {
        m = std::max(m, c.rel);
    }
    return m;
}

RulePattern chain_pattern(std::span<const RelationId> rels) {
    if (rels.empty()) {
        throw InvalidArgument("chain_pattern: needs at least one relation");
    }
    RulePattern p;
    p.name = "C" + std::to_string(rels.size());
    std::string prev = p.x;
    for (std::size_t i = 0; i < rels.size(); ++i) {
        const std::string next = i + 1 == rels.size() ? p.y : "z" + std::to_string(i + 1);
        p.edges.push_back({Term::variable(prev), rels[i], Term::variable(next)});
        prev = next;
    }
    return p;
}

RulePattern i_pattern(RelationId r1, RelationId r2, RelationId r3, RelationId r4, std::uint32_t n) {
    const RelationId rels[] = {r1, r2, r3};
    RulePattern p = chain_pattern(rels);
    p.name = "I" + std::to_string(n);
    p.counts.push_back({Term::variable("z2"), r4, n});
    return p;
}

RulePattern t_pattern(RelationId r1, RelationId r2, RelationId r3, RelationId r4, RelationId r5) {
    RulePattern p;
    p.name = "T";
    auto v = Term::variable;
    p.edges = {{v("x"), r1, v("z1")}, {v("z1"), r2, v("z2")}, {v("z2"), r3, v("y")},
               {v("x"), r1, v("w1")}, {v("w1"), r4, v("w2")}, {v("w2"), r5, v("y")}};
    return p;
}

RulePattern u_pattern(RelationId r1, RelationId r2, RelationId r3, RelationId r4, RelationId r5) {
    RulePattern p;
    p.name = "U";
    auto v = Term::variable;
    p.edges = {{v("x"), r1, v("z1")}, {v("z1"), r2, v("z2")}, {v("z2"), r3, v("y")},
               {v("z1"), r4, v("z3")}, {v("z3"), r5, v("y")}};
    return p;
}

void validate(const RulePattern& pattern) {
    if (pattern.x.empty() || pattern.y.empty() || pattern.x == pattern.y) {
        throw ValidationError("pattern needs distinct variables x and y");
    }
    for (const CountConstraint& c : pattern.counts) {
        if (c.n < 1) {
            throw ValidationError("pattern count constraint needs n >= 1");
        }
    }
    // Undirected connectivity over variables and constants.
    std::map<std::string, std::string> parent;
    auto key = [](const Term& t) { return t.is_constant() ? "#" + std::to_string(*t.entity) : t.var; };
    std::function<std::string(const std::string&)> find = [&](const std::string& k) -> std::string {
        auto it = parent.find(k);
        if (it == parent.end()) {
            parent[k] = k;
            return k;
        }
        if (it->second == k) {
            return k;
        }
        const std::string root = find(it->second);
        parent[k] = root;
        return root;
    };
    find(pattern.x);
    find(pattern.y);
    for (const PatternEdge& e : pattern.edges) {
        parent[find(key(e.src))] = find(key(e.dst));
    }
    for (const CountConstraint& c : pattern.counts) {
        find(key(c.target));
    }
    const std::string root = find(pattern.x);
    for (auto& [k, p] : parent) {
        if (find(k) != root) {
            throw ValidationError("pattern '" + pattern.name + "' is not connected ('" + k + "')");
        }
    }
}

namespace {

bool has_edge(const KnowledgeGraph& g, EntityId s, RelationId r, EntityId d) {
    const auto edges = g.out_edges(s, r);
    auto it = std::lower_bound(edges.begin(), edges.end(), d,
                               [](const kg::Edge& e, EntityId target) { return e.neighbor < target; });
    return it != edges.end() && it->neighbor == d;
}

class Matcher {
public:
    Matcher(const KnowledgeGraph& g, const RulePattern& p, std::optional<EntityId> fx, std::optional<EntityId> fy)
        : g_(g), p_(p) {
        vars_ = p.variables();
        for (std::size_t i = 0; i < vars_.size(); ++i) {
            index_[vars_[i]] = i;
        }
        assign_.assign(vars_.size(), std::nullopt);
        fixed_.assign(vars_.size(), std::nullopt);
        fixed_[0] = fx;
        fixed_[1] = fy;
        order_variables();
    }

    CoverageSet run() {
        CoverageSet out;
        if (p_.max_relation() >= g_.num_relations() && !(p_.edges.empty() && p_.counts.empty())) {
            return out; // a relation the graph lacks can never match
        }
        for (const CountConstraint& c : p_.counts) {
            if (c.target.is_constant() && !count_ok(c, *c.target.entity)) {
                return out;
            }
        }
        for (const PatternEdge& e : p_.edges) {
            if (e.src.is_constant() && e.dst.is_constant() && !has_edge(g_, *e.src.entity, e.rel, *e.dst.entity)) {
                return out;
            }
        }
        out_ = &out;
        search(0);
        return out;
    }

private:
    std::size_t var_index(const Term& t) const { return index_.at(t.var); }

    std::optional<EntityId> value(const Term& t) const {
        if (t.is_constant()) {
            return t.entity;
        }
        return assign_[var_index(t)];
    }

    bool count_ok(const CountConstraint& c, EntityId v) const {
        return g_.in_edges(v, c.rel).size() >= c.n;
    }

    void order_variables() {
        std::vector<bool> placed(vars_.size(), false);
        auto connections = [&](std::size_t v) {
            std::size_t n = 0;
            for (const PatternEdge& e : p_.edges) {
                const bool s = !e.src.is_constant() && var_index(e.src) == v;
                const bool d = !e.dst.is_constant() && var_index(e.dst) == v;
                if (s && (e.dst.is_constant() || placed[var_index(e.dst)])) {
                    ++n;
                }
                if (d && (e.src.is_constant() || placed[var_index(e.src)])) {
                    ++n;
                }
            }
            return n;
        };
        for (std::size_t step = 0; step < vars_.size(); ++step) {
            std::size_t best = vars_.size();
            std::size_t best_score = 0;
            for (std::size_t v = 0; v < vars_.size(); ++v) {
                if (placed[v]) {
                    continue;
                }
                // Fixed endpoints first, then the most constrained variable.
                const std::size_t score = (fixed_[v] ? 1000 : 0) + connections(v) * 2 + (v == 0 ? 1 : 0);
                if (best == vars_.size() || score > best_score) {
                    best = v;
                    best_score = score;
                }
            }
            placed[best] = true;
            order_.push_back(best);
        }
    }

    std::vector<EntityId> candidates(std::size_t v) const {
        if (fixed_[v]) {
            return {*fixed_[v]};
        }
        const std::vector<EntityId>* best = nullptr;
        std::vector<EntityId> scratch, chosen;
        for (const PatternEdge& e : p_.edges) {
            const bool s = !e.src.is_constant() && var_index(e.src) == v;
            const bool d = !e.dst.is_constant() && var_index(e.dst) == v;
            scratch.clear();
            if (s && value(e.dst)) {
                for (const kg::Edge& x : g_.in_edges(*value(e.dst), e.rel)) {
                    scratch.push_back(x.neighbor);
                }
            } else if (d && value(e.src)) {
                for (const kg::Edge& x : g_.out_edges(*value(e.src), e.rel)) {
                    scratch.push_back(x.neighbor);
                }
            } else {
                continue;
            }
            if (!best || scratch.size() < chosen.size()) {
                chosen = scratch;
                best = &chosen;
            }
        }
        if (!best) {
            std::vector<EntityId> all(g_.num_entities());
            for (std::size_t i = 0; i < all.size(); ++i) {
                all[i] = static_cast<EntityId>(i);
            }
            return all;
        }
        std::sort(chosen.begin(), chosen.end());
        chosen.erase(std::unique(chosen.begin(), chosen.end()), chosen.end());
        return chosen;
    }

    bool consistent(std::size_t v) const {
        for (const PatternEdge& e : p_.edges) {
            const bool touches = (!e.src.is_constant() && var_index(e.src) == v) ||
                                 (!e.dst.is_constant() && var_index(e.dst) == v);
            if (!touches) {
                continue;
            }
            const auto s = value(e.src);
            const auto d = value(e.dst);
            if (s && d && !has_edge(g_, *s, e.rel, *d)) {
                return false;
            }
        }
        for (const CountConstraint& c : p_.counts) {
            if (!c.target.is_constant() && var_index(c.target) == v && !count_ok(c, *assign_[v])) {
                return false;
            }
        }
        return true;
    }

    bool search(std::size_t level) {
        if (level == order_.size()) {
            out_->insert({*assign_[0], *assign_[1]});
            return true;
        }
        const std::size_t v = order_[level];
        const bool endpoints_set = assign_[0].has_value() && assign_[1].has_value();
        if (endpoints_set && out_->count({*assign_[0], *assign_[1]})) {
            return true;
        }
        bool found = false;
        for (EntityId c : candidates(v)) {
            assign_[v] = c;
            if (consistent(v) && search(level + 1)) {
                found = true;
                if (endpoints_set) {
                    break;
                }
            }
        }
        assign_[v].reset();
        return found;
    }

    const KnowledgeGraph& g_;
    const RulePattern& p_;
    std::vector<std::string> vars_;
    std::map<std::string, std::size_t> index_;
    std::vector<std::optional<EntityId>> assign_;
    std::vector<std::optional<EntityId>> fixed_;
    std::vector<std::size_t> order_;
    CoverageSet* out_ = nullptr;
};

} // namespace

CoverageSet coverage(const KnowledgeGraph& graph, const RulePattern& pattern, std::optional<EntityId> fixed_x,
                     std::optional<EntityId> fixed_y) {
    validate(pattern);
    if (fixed_x) {
        graph.check_entity(*fixed_x);
    }
    if (fixed_y) {
        graph.check_entity(*fixed_y);
    }
    if (graph.num_entities() == 0) {
        return {};
    }
    return Matcher(graph, pattern, fixed_x, fixed_y).run();
}

bool covers(const KnowledgeGraph& graph, const RulePattern& pattern, EntityId x, EntityId y) {
    return !coverage(graph, pattern, x, y).empty();
}

RulePattern substitute_constant(const RulePattern& pattern, const std::string& var, EntityId entity) {
    if (var == pattern.x || var == pattern.y) {
        throw InvalidArgument("cannot bind distinguished variable '" + var + "' to a constant");
    }
    const auto vars = pattern.variables();
    if (std::find(vars.begin(), vars.end(), var) == vars.end()) {
        throw InvalidArgument("pattern '" + pattern.name + "' has no variable '" + var + "'");
    }
    RulePattern out = pattern;
    auto bind = [&](Term& t) {
        if (!t.is_constant() && t.var == var) {
            t = Term::constant(entity);
        }
    };
    for (PatternEdge& e : out.edges) {
        bind(e.src);
        bind(e.dst);
    }
    for (CountConstraint& c : out.counts) {
        bind(c.target);
    }
    out.name = pattern.name + "[" + var + ":=" + std::to_string(entity) + "]";
    return out;
}

MarkedFormula mark_source(const RulePattern& pattern, EntityId u) {
    validate(pattern);
    const std::string why = "pattern '" + pattern.name + "' is not expressible in CML from a marked source";
    std::map<std::string, std::vector<const PatternEdge*>> incoming;
    std::map<std::string, std::size_t> out_degree;
    for (const PatternEdge& e : pattern.edges) {
        if (e.dst.is_constant()) {
            throw UnsupportedError(why + ": edge into a constant");
        }
        if (!e.src.is_constant()) {
            ++out_degree[e.src.var];
        }
        incoming[e.dst.var].push_back(&e);
    }
    if (!incoming[pattern.x].empty()) {
        throw UnsupportedError(why + ": edge into the source variable");
    }
    if (out_degree[pattern.y] != 0) {
        throw UnsupportedError(why + ": edge out of the target variable");
    }
    for (const std::string& v : pattern.variables()) {
        if (v != pattern.x && v != pattern.y && out_degree[v] != 1) {
            throw UnsupportedError(why + ": variable '" + v + "' has " + std::to_string(out_degree[v]) +
                                   " outgoing edges (shared intermediate node)");
        }
    }
    for (const CountConstraint& c : pattern.counts) {
        if (c.target.is_constant()) {
            throw UnsupportedError(why + ": count constraint on a constant");
        }
    }

    MarkedFormula result;
    result.valuation.set(0, {u});
    std::map<EntityId, std::uint32_t> constant_pred;
    std::uint32_t next_pred = 1;
    std::vector<std::string> stack;

    std::function<FormulaPtr(const Term&)> build = [&](const Term& t) -> FormulaPtr {
        if (t.is_constant()) {
            auto [it, fresh] = constant_pred.emplace(*t.entity, next_pred);
            if (fresh) {
                result.valuation.set(next_pred++, {*t.entity});
            }
            return pred(it->second);
        }
        if (std::find(stack.begin(), stack.end(), t.var) != stack.end()) {
            throw UnsupportedError(why + ": cycle through '" + t.var + "'");
        }
        stack.push_back(t.var);
        std::vector<FormulaPtr> parts;
        if (t.var == pattern.x) {
            parts.push_back(pred(0));
        }
        for (const PatternEdge* e : incoming[t.var]) {
            parts.push_back(exists(1, e->rel, build(e->src)));
        }
        for (const CountConstraint& c : pattern.counts) {
            if (c.target.var == t.var) {
                parts.push_back(exists(c.n, c.rel, top()));
            }
        }
        stack.pop_back();
        if (parts.empty()) {
            return top();
        }
        FormulaPtr f = parts.front();
        for (std::size_t i = 1; i < parts.size(); ++i) {
            f = conj(f, parts[i]);
        }
        return f;
    };
    result.formula = build(Term::variable(pattern.y));
    result.num_predicates = next_pred;
    return result;
}

namespace {

nlohmann::json term_to_json(const Term& t) {
    if (t.is_constant()) {
        return *t.entity;
    }
    return t.var;
}

Term term_from_json(const nlohmann::json& j) {
    if (j.is_string()) {
        return Term::variable(j.get<std::string>());
    }
    if (j.is_number_integer() && j.get<std::int64_t>() >= 0) {
        return Term::constant(j.get<EntityId>());
    }
    throw ParseError("pattern term must be a variable name or an entity index");
}

} // namespace

nlohmann::json pattern_to_json(const RulePattern& pattern) {
    nlohmann::json edges = nlohmann::json::array();
    for (const PatternEdge& e : pattern.edges) {
        edges.push_back({{"src", term_to_json(e.src)}, {"rel", e.rel}, {"dst", term_to_json(e.dst)}});
    }
    nlohmann::json counts = nlohmann::json::array();
    for (const CountConstraint& c : pattern.counts) {
        counts.push_back({{"target", term_to_json(c.target)}, {"rel", c.rel}, {"n", c.n}});
    }
    return {{"name", pattern.name}, {"x", pattern.x}, {"y", pattern.y}, {"edges", edges}, {"counts", counts}};
}

RulePattern pattern_from_json(const nlohmann::json& j) {
    try {
        RulePattern p;
        p.name = j.value("name", std::string("pattern"));
        p.x = j.value("x", std::string("x"));
        p.y = j.value("y", std::string("y"));
        for (const auto& e : j.at("edges")) {
            p.edges.push_back({term_from_json(e.at("src")), e.at("rel").get<RelationId>(), term_from_json(e.at("dst"))});
        }
        if (j.contains("counts")) {
            for (const auto& c : j.at("counts")) {
                p.counts.push_back({term_from_json(c.at("target")), c.at("rel").get<RelationId>(),
                                    c.value("n", std::uint32_t{1})});
            }
        }
        validate(p);
        return p;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("pattern: ") + e.what());
    }
}

RulePattern random_pattern(Rng& rng, std::size_t num_relations, std::size_t max_inner) {
    if (num_relations == 0) {
        throw InvalidArgument("random_pattern: needs at least one relation");
    }
    RulePattern p;
    p.name = "random";
    std::vector<std::string> nodes{"x", "y"};
    const std::size_t inner = static_cast<std::size_t>(rng.below(max_inner + 1));
    for (std::size_t i = 0; i < inner; ++i) {
        nodes.push_back("z" + std::to_string(i + 1));
    }
    auto rel = [&] { return static_cast<RelationId>(rng.below(num_relations)); };
    auto add_edge = [&](std::size_t a, std::size_t b) {
        if (rng.bernoulli(0.5)) {
            std::swap(a, b);
        }
        p.edges.push_back({Term::variable(nodes[a]), rel(), Term::variable(nodes[b])});
    };
    // Random spanning tree, then a few extra edges.
    for (std::size_t i = 1; i < nodes.size(); ++i) {
        add_edge(i, static_cast<std::size_t>(rng.below(i)));
    }
    const std::size_t extra = static_cast<std::size_t>(rng.below(3));
    for (std::size_t k = 0; k < extra; ++k) {
        add_edge(static_cast<std::size_t>(rng.below(nodes.size())), static_cast<std::size_t>(rng.below(nodes.size())));
    }
    if (inner > 0 && rng.bernoulli(0.3)) {
        p.counts.push_back({Term::variable(nodes[2 + rng.below(inner)]), rel(),
                            static_cast<std::uint32_t>(1 + rng.below(2))});
    }
    return p;
}

} // namespace pngnn::logic
