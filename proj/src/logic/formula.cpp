#include "pngnn/logic/formula.hpp"

#include "pngnn/error.hpp"

#include <algorithm>
#include <functional>
#include <unordered_map>

namespace pngnn::logic {

FormulaPtr top() {
    auto f = std::make_shared<Formula>();
    f->kind = Kind::kTop;
    return f;
}

FormulaPtr bottom() { return negate(top()); }

FormulaPtr pred(std::uint32_t index) {
    auto f = std::make_shared<Formula>();
    f->kind = Kind::kPred;
    f->pred = index;
    return f;
}

FormulaPtr negate(FormulaPtr child) {
    auto f = std::make_shared<Formula>();
    f->kind = Kind::kNot;
    f->left = std::move(child);
    return f;
}

FormulaPtr conj(FormulaPtr a, FormulaPtr b) {
    auto f = std::make_shared<Formula>();
    f->kind = Kind::kAnd;
    f->left = std::move(a);
    f->right = std::move(b);
    return f;
}

FormulaPtr disj(FormulaPtr a, FormulaPtr b) { return negate(conj(negate(std::move(a)), negate(std::move(b)))); }

FormulaPtr exists(std::uint32_t n, RelationId rel, FormulaPtr body) {
    auto f = std::make_shared<Formula>();
    f->kind = Kind::kExists;
    f->count = n;
    f->rel = rel;
    f->left = std::move(body);
    return f;
}

bool same_formula(const Formula& a, const Formula& b) {
    if (a.kind != b.kind) {
        return false;
    }
    switch (a.kind) {
    case Kind::kTop:
        return true;
    case Kind::kPred:
        return a.pred == b.pred;
    case Kind::kNot:
        return same_formula(*a.left, *b.left);
    case Kind::kAnd:
        return same_formula(*a.left, *b.left) && same_formula(*a.right, *b.right);
    case Kind::kExists:
        return a.count == b.count && a.rel == b.rel && same_formula(*a.left, *b.left);
    }
    return false;
}

std::size_t depth(const Formula& f) {
    switch (f.kind) {
    case Kind::kTop:
    case Kind::kPred:
        return 1;
    case Kind::kNot:
    case Kind::kExists:
        return 1 + depth(*f.left);
    case Kind::kAnd:
        return 1 + std::max(depth(*f.left), depth(*f.right));
    }
    return 1;
}

std::size_t node_count(const Formula& f) {
    switch (f.kind) {
    case Kind::kTop:
    case Kind::kPred:
        return 1;
    case Kind::kNot:
    case Kind::kExists:
        return 1 + node_count(*f.left);
    case Kind::kAnd:
        return 1 + node_count(*f.left) + node_count(*f.right);
    }
    return 1;
}

std::string to_string(const Formula& f) {
    switch (f.kind) {
    case Kind::kTop:
        return "T";
    case Kind::kPred:
        return "P" + std::to_string(f.pred);
    case Kind::kNot:
        return "~" + to_string(*f.left);
    case Kind::kAnd:
        return "(" + to_string(*f.left) + " & " + to_string(*f.right) + ")";
    case Kind::kExists:
        return "E>=" + std::to_string(f.count) + " r" + std::to_string(f.rel) + "." + to_string(*f.left);
    }
    return "?";
}

void validate(const Formula& f, const Signature& sig) {
    switch (f.kind) {
    case Kind::kTop:
        return;
    case Kind::kPred:
        if (f.pred >= sig.num_predicates) {
            throw SignatureError("predicate P" + std::to_string(f.pred) + " outside signature (" +
                                 std::to_string(sig.num_predicates) + " predicates)");
        }
        return;
    case Kind::kAnd:
        if (!f.left || !f.right) {
            throw ValidationError("conjunction is missing an operand");
        }
        validate(*f.left, sig);
        validate(*f.right, sig);
        return;
    case Kind::kExists:
        if (f.count < 1) {
            throw ValidationError("counting quantifier needs N >= 1");
        }
        if (f.rel >= sig.num_relations) {
            throw SignatureError("relation r" + std::to_string(f.rel) + " outside signature (" +
                                 std::to_string(sig.num_relations) + " relations)");
        }
        [[fallthrough]];
    case Kind::kNot:
        if (!f.left) {
            throw ValidationError("unary node is missing its operand");
        }
        validate(*f.left, sig);
        return;
    }
}

Valuation& Valuation::set(std::uint32_t p, std::vector<EntityId> members) {
    std::sort(members.begin(), members.end());
    members.erase(std::unique(members.begin(), members.end()), members.end());
    sets_[p] = std::move(members);
    return *this;
}

bool Valuation::holds(std::uint32_t p, EntityId v) const {
    auto it = sets_.find(p);
    if (it == sets_.end()) {
        throw SignatureError("predicate P" + std::to_string(p) + " has no valuation");
    }
    return std::binary_search(it->second.begin(), it->second.end(), v);
}

std::vector<std::uint8_t> Valuation::bits(std::uint32_t p, std::size_t n) const {
    auto it = sets_.find(p);
    if (it == sets_.end()) {
        throw SignatureError("predicate P" + std::to_string(p) + " has no valuation");
    }
    std::vector<std::uint8_t> out(n, 0);
    for (EntityId v : it->second) {
        if (v < n) {
            out[v] = 1;
        }
    }
    return out;
}

namespace {

void check_signature(const KnowledgeGraph& graph, const Formula& f, const Valuation& valuation) {
    switch (f.kind) {
    case Kind::kTop:
        return;
    case Kind::kPred:
        if (!valuation.bound(f.pred)) {
            throw SignatureError("predicate P" + std::to_string(f.pred) + " has no valuation");
        }
        return;
    case Kind::kAnd:
        check_signature(graph, *f.left, valuation);
        check_signature(graph, *f.right, valuation);
        return;
    case Kind::kExists:
        if (f.count < 1) {
            throw ValidationError("counting quantifier needs N >= 1");
        }
        if (f.rel >= graph.num_relations()) {
            throw SignatureError("relation r" + std::to_string(f.rel) + " not in graph (" +
                                 std::to_string(graph.num_relations()) + " relations)");
        }
        [[fallthrough]];
    case Kind::kNot:
        check_signature(graph, *f.left, valuation);
        return;
    }
}

bool check_rec(const KnowledgeGraph& graph, const Formula& f, EntityId v, const Valuation& valuation) {
    switch (f.kind) {
    case Kind::kTop:
        return true;
    case Kind::kPred:
        return valuation.holds(f.pred, v);
    case Kind::kNot:
        return !check_rec(graph, *f.left, v, valuation);
    case Kind::kAnd:
        return check_rec(graph, *f.left, v, valuation) && check_rec(graph, *f.right, v, valuation);
    case Kind::kExists: {
        std::uint32_t hits = 0;
        for (const kg::Edge& e : graph.in_edges(v, f.rel)) {
            if (check_rec(graph, *f.left, e.neighbor, valuation) && ++hits >= f.count) {
                return true;
            }
        }
        return false;
    }
    }
    return false;
}

} // namespace

bool check(const KnowledgeGraph& graph, const Formula& f, EntityId v, const Valuation& valuation) {
    graph.check_entity(v);
    check_signature(graph, f, valuation);
    return check_rec(graph, f, v, valuation);
}

std::vector<std::uint8_t> check_all(const KnowledgeGraph& graph, const Formula& f, const Valuation& valuation) {
    check_signature(graph, f, valuation);
    const std::size_t n = graph.num_entities();
    std::unordered_map<std::string, std::vector<std::uint8_t>> memo;
    std::function<const std::vector<std::uint8_t>&(const Formula&)> eval =
        [&](const Formula& node) -> const std::vector<std::uint8_t>& {
        const std::string key = to_string(node);
        if (auto it = memo.find(key); it != memo.end()) {
            return it->second;
        }
        std::vector<std::uint8_t> out(n, 0);
        switch (node.kind) {
        case Kind::kTop:
            std::fill(out.begin(), out.end(), 1);
            break;
        case Kind::kPred:
            out = valuation.bits(node.pred, n);
            break;
        case Kind::kNot: {
            const auto& c = eval(*node.left);
            for (std::size_t v = 0; v < n; ++v) {
                out[v] = c[v] ? 0 : 1;
            }
            break;
        }
        case Kind::kAnd: {
            const auto a = eval(*node.left);
            const auto& b = eval(*node.right);
            for (std::size_t v = 0; v < n; ++v) {
                out[v] = a[v] && b[v];
            }
            break;
        }
        case Kind::kExists: {
            const auto& c = eval(*node.left);
            for (std::size_t v = 0; v < n; ++v) {
                std::uint32_t hits = 0;
                for (const kg::Edge& e : graph.in_edges(static_cast<EntityId>(v), node.rel)) {
                    hits += c[e.neighbor];
                }
                out[v] = hits >= node.count;
            }
            break;
        }
        }
        return memo.emplace(key, std::move(out)).first->second;
    };
    return eval(f);
}

nlohmann::json formula_to_json(const Formula& f) {
    switch (f.kind) {
    case Kind::kTop:
        return {{"kind", "top"}};
    case Kind::kPred:
        return {{"kind", "pred"}, {"pred", f.pred}};
    case Kind::kNot:
        return {{"kind", "not"}, {"body", formula_to_json(*f.left)}};
    case Kind::kAnd:
        return {{"kind", "and"}, {"left", formula_to_json(*f.left)}, {"right", formula_to_json(*f.right)}};
    case Kind::kExists:
        return {{"kind", "exists"}, {"n", f.count}, {"rel", f.rel}, {"body", formula_to_json(*f.left)}};
    }
    return {};
}

namespace {

std::uint32_t read_index(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) {
        throw ParseError(where + ": missing field '" + key + "'");
    }
    const auto& v = j.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        throw ParseError(where + ": field '" + key + "' must be a non-negative integer");
    }
    return v.get<std::uint32_t>();
}

const nlohmann::json& child(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_object()) {
        throw ParseError(where + ": missing child '" + key + "'");
    }
    return j.at(key);
}

FormulaPtr parse(const nlohmann::json& j, const std::string& where) {
    if (!j.is_object() || !j.contains("kind") || !j.at("kind").is_string()) {
        throw ParseError(where + ": expected an object with a string 'kind'");
    }
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "top") {
        return top();
    }
    if (kind == "bottom") {
        return bottom();
    }
    if (kind == "pred") {
        return pred(read_index(j, "pred", where));
    }
    if (kind == "not") {
        return negate(parse(child(j, "body", where), where + ".body"));
    }
    if (kind == "and" || kind == "or") {
        auto l = parse(child(j, "left", where), where + ".left");
        auto r = parse(child(j, "right", where), where + ".right");
        return kind == "and" ? conj(std::move(l), std::move(r)) : disj(std::move(l), std::move(r));
    }
    if (kind == "exists") {
        const std::uint32_t n = j.contains("n") ? read_index(j, "n", where) : 1;
        if (n < 1) {
            throw ParseError(where + ": 'n' must be >= 1");
        }
        return exists(n, read_index(j, "rel", where), parse(child(j, "body", where), where + ".body"));
    }
    throw ParseError(where + ": unknown kind '" + kind + "'");
}

} // namespace

FormulaPtr formula_from_json(const nlohmann::json& j) { return parse(j, "$"); }

FormulaPtr random_formula(Rng& rng, const Signature& sig, std::size_t max_depth, std::uint32_t max_count) {
    const bool has_pred = sig.num_predicates > 0;
    auto leaf = [&]() -> FormulaPtr {
        if (has_pred && rng.below(3) != 0) {
            return pred(static_cast<std::uint32_t>(rng.below(sig.num_predicates)));
        }
        return top();
    };
    if (max_depth <= 1) {
        return leaf();
    }
    // Weights: leaf 2, not 2, and 3, exists 3 (exists only with relations).
    const std::uint64_t exists_w = sig.num_relations > 0 ? 3 : 0;
    const std::uint64_t pick = rng.below(7 + exists_w);
    if (pick < 2) {
        return leaf();
    }
    if (pick < 4) {
        return negate(random_formula(rng, sig, max_depth - 1, max_count));
    }
    if (pick < 7) {
        auto a = random_formula(rng, sig, max_depth - 1, max_count);
        auto b = random_formula(rng, sig, max_depth - 1, max_count);
        return conj(std::move(a), std::move(b));
    }
    const auto n = static_cast<std::uint32_t>(1 + rng.below(std::max<std::uint32_t>(max_count, 1)));
    const auto rel = static_cast<RelationId>(rng.below(sig.num_relations));
    return exists(n, rel, random_formula(rng, sig, max_depth - 1, max_count));
}

FormulaPtr random_formula(std::uint64_t seed, const Signature& sig, std::size_t max_depth, std::uint32_t max_count) {
    Rng rng(seed);
    return random_formula(rng, sig, max_depth, max_count);
}

} // namespace pngnn::logic
