#include "pngnn/suite/expressivity.hpp"

#include "pngnn/diff/ops.hpp"
#include "pngnn/error.hpp"
#include "pngnn/logic/compiler.hpp"
#include "pngnn/pn/aggregator.hpp"

#include <algorithm>
#include <cmath>

namespace pngnn::suite {

namespace {

using kg::EntityId;
using kg::KnowledgeGraph;
using kg::RelationId;

double row_delta(const diff::Array& a, EntityId ra, const diff::Array& b, EntityId rb) {
    double m = 0.0;
    for (std::size_t c = 0; c < a.cols(); ++c) {
        m = std::max(m, std::abs(a(ra, c) - b(rb, c)));
    }
    return m;
}

std::vector<cgnn::Aggregator> aggregators_of(const SuiteOptions& o) {
    if (!o.aggregators.empty()) {
        return o.aggregators;
    }
    return {cgnn::Aggregator::kSum, cgnn::Aggregator::kMean, cgnn::Aggregator::kMax};
}

constexpr cgnn::Message kMessages[] = {cgnn::Message::kTranslate, cgnn::Message::kMultiply, cgnn::Message::kRotate};

CheckResult skipped(std::string name, std::string why) {
    CheckResult r;
    r.name = std::move(name);
    r.status = Status::kSkipped;
    r.detail = std::move(why);
    return r;
}

const char* kInverseSkip =
    "inverse augmentation adds backward edges, so the merged node is visible from the target side and the "
    "pair is no longer indistinguishable";

// Compiled (1,k) separator bits on the k-hop pair: {merged, split}.
std::pair<double, double> separator_bits(std::size_t k) {
    const auto p = logic::khop_counterexample(k);
    const auto cp = logic::chain_pair_formula(k);
    const auto base = logic::compile(cp.formula, logic::Signature{1, 2 * k + 1});
    const auto sep = logic::compile_pn_separator(base, base.index.slot(*cp.first_hop), {1, k});
    logic::Valuation val;
    val.set(0, {p.source});
    auto bit = [&](const KnowledgeGraph& g, EntityId v) {
        const diff::Array h = logic::forward_discrete(sep, g, val);
        return logic::separator_bit(sep, h, pn::compute_distances(g, p.source, k), v);
    };
    return {bit(p.merged, p.target_merged), bit(p.split, p.target_split)};
}

} // namespace

const char* status_name(Status s) {
    switch (s) {
    case Status::kPass:
        return "PASS";
    case Status::kFail:
        return "FAIL";
    case Status::kSkipped:
        return "SKIPPED";
    }
    return "?";
}

SuiteOptions suite_options_from_json(const nlohmann::json& j) {
    SuiteOptions o;
    if (j.is_null()) {
        return o;
    }
    if (!j.is_object()) {
        throw ConfigError("suite options must be a JSON object");
    }
    for (const auto& [key, value] : j.items()) {
        try {
            if (key == "seed") {
                o.seed = value.get<std::uint64_t>();
            } else if (key == "inverse") {
                o.inverse_augmentation = value.get<bool>();
            } else if (key == "aggregator") {
                const auto name = value.get<std::string>();
                o.aggregators.clear();
                if (name != "all") {
                    o.aggregators.push_back(cgnn::parse_aggregator(name));
                }
            } else if (key == "draws") {
                o.draws = value.get<std::size_t>();
            } else if (key == "fuzz_trials") {
                o.fuzz_trials = value.get<std::size_t>();
            } else {
                throw ConfigError("unknown suite option '" + key + "'");
            }
        } catch (const nlohmann::json::exception& e) {
            throw ConfigError("suite option '" + key + "': " + e.what());
        }
    }
    if (o.draws == 0) {
        throw ConfigError("suite option draws must be >= 1");
    }
    return o;
}

std::size_t SuiteReport::count(Status s) const {
    return static_cast<std::size_t>(
        std::count_if(checks.begin(), checks.end(), [s](const CheckResult& c) { return c.status == s; }));
}

CheckResult ut_invariance(const SuiteOptions& o) {
    const char* name = "ut_invariance";
    if (o.inverse_augmentation) {
        return skipped(name, kInverseSkip);
    }
    const auto aggs = aggregators_of(o);
    if (std::find(aggs.begin(), aggs.end(), cgnn::Aggregator::kPna) != aggs.end()) {
        return skipped(name, "the PNA aggregator carries degree features outside the counting logic");
    }
    const auto p = logic::khop_counterexample(2);
    const std::size_t rels = p.merged.num_relations();
    double worst = 0.0;
    std::size_t runs = 0;
    Rng rng(o.seed);
    for (cgnn::Aggregator a : aggs) {
        for (std::size_t d = 0; d < o.draws; ++d) {
            cgnn::CgnnConfig c;
            c.layers = 4;
            c.dim = 8;
            c.aggregator = a;
            c.message = kMessages[d % 3];
            cgnn::Engine e(c, rels);
            diff::ParamStore store(rng.next());
            const auto q = static_cast<RelationId>(rng.below(rels));
            const auto hm = e.evaluate(store, p.merged, p.source, q);
            const auto hs = e.evaluate(store, p.split, p.source, q);
            for (std::size_t t = 0; t <= c.layers; ++t) {
                worst = std::max(worst, row_delta(hm.h[t], p.target_merged, hs.h[t], p.target_split));
            }
            ++runs;
        }
    }
    CheckResult r;
    r.name = name;
    r.status = worst < 1e-12 ? Status::kPass : Status::kFail;
    r.detail = "target rows of every layer, merged vs split, max |delta| < 1e-12";
    r.data["runs"] = runs;
    r.data["max_abs_delta"] = worst;
    return r;
}

CheckResult compiled_invariance() {
    const auto p = logic::khop_counterexample(2);
    const auto cp = logic::chain_pair_formula(2);
    const auto g = logic::compile(cp.formula, logic::Signature{1, 5});
    logic::Valuation val;
    val.set(0, {p.source});
    const double m = logic::forward_discrete(g, p.merged, val)(p.target_merged, g.index.root());
    const double s = logic::forward_discrete(g, p.split, val)(p.target_split, g.index.root());
    CheckResult r;
    r.name = "compiled_invariance";
    r.status = m == 1.0 && s == 1.0 ? Status::kPass : Status::kFail;
    r.detail = "chain-pair formula bit at both targets is 1";
    r.data["merged"] = m;
    r.data["split"] = s;
    return r;
}

CheckResult pn_separation() {
    const auto [m, s] = separator_bits(2);
    CheckResult r;
    r.name = "pn_separation";
    r.status = m == 1.0 && s == 0.0 ? Status::kPass : Status::kFail;
    r.detail = "separator readout 1 on the merged target and 0 on the split target";
    r.data["merged"] = m;
    r.data["split"] = s;
    return r;
}

CheckResult khop(std::size_t k, const SuiteOptions& o) {
    const std::string name = "khop_" + std::to_string(k);
    if (o.inverse_augmentation) {
        return skipped(name, kInverseSkip);
    }
    const auto p = logic::khop_counterexample(k);
    const std::size_t rels = p.merged.num_relations();
    const auto aggs = aggregators_of(o);
    Rng rng(o.seed + k);
    double same_worst = 0.0;
    double deeper_least = INFINITY;
    for (std::size_t d = 0; d < o.draws; ++d) {
        cgnn::CgnnConfig cc;
        cc.dim = 4;
        cc.layers = k + 2;
        cc.activation = diff::Activation::kTanh;
        cc.aggregator = aggs[d % aggs.size()];
        cc.message = kMessages[d % 3];
        cgnn::Engine e(cc, rels);
        diff::ParamStore store(rng.next());
        const auto q = static_cast<RelationId>(rng.below(rels));
        auto fused = [&](const KnowledgeGraph& g, EntityId v, std::size_t hops) {
            diff::Tape tape(false);
            const auto h = e.run(tape, store, g, p.source, q);
            const auto table = pn::compute_distances(g, p.source, hops);
            pn::PnConfig c;
            c.hops = hops;
            c.pool = diff::Reduce::kSum;
            pn::RowSource rows = [&](std::span<const EntityId> which) {
                std::vector<std::size_t> idx(which.begin(), which.end());
                return diff::gather_rows(h.back(), idx);
            };
            const EntityId t[] = {v};
            return pn::fuse_khop(tape, store, c, cc.dim, rows, table, t).value();
        };
        same_worst = std::max(same_worst, diff::max_abs_diff(fused(p.merged, p.target_merged, k - 1),
                                                             fused(p.split, p.target_split, k - 1)));
        deeper_least = std::min(deeper_least, diff::max_abs_diff(fused(p.merged, p.target_merged, k),
                                                                 fused(p.split, p.target_split, k)));
    }
    const auto [m, s] = separator_bits(k);
    CheckResult r;
    r.name = name;
    const bool ok = same_worst < 1e-12 && deeper_least > 1e-6 && m == 1.0 && s == 0.0;
    r.status = ok ? Status::kPass : Status::kFail;
    r.detail = std::to_string(k - 1) + "-hop fusion equal (< 1e-12), " + std::to_string(k) +
               "-hop fusion differs (> 1e-6) in every draw, (1," + std::to_string(k) + ") separator reads 1/0";
    r.data["draws"] = o.draws;
    r.data["shallow_max_delta"] = same_worst;
    r.data["deep_min_delta"] = deeper_least;
    r.data["separator_merged"] = m;
    r.data["separator_split"] = s;
    return r;
}

CheckResult compiler_fuzz(const SuiteOptions& o) {
    Rng rng(o.seed);
    std::size_t mismatched_bits = 0, fractional = 0, failed_trials = 0, bits = 0;
    for (std::size_t trial = 0; trial < o.fuzz_trials; ++trial) {
        const std::size_t n = 1 + rng.below(25);
        const std::size_t nr = 1 + rng.below(4);
        std::vector<kg::Triple> edges(rng.below(3 * n + 1));
        for (auto& t : edges) {
            t = {static_cast<EntityId>(rng.below(n)), static_cast<RelationId>(rng.below(nr)),
                 static_cast<EntityId>(rng.below(n))};
        }
        const KnowledgeGraph graph(n, nr, std::move(edges));
        const logic::Signature sig{3, nr};
        logic::Valuation val;
        for (std::uint32_t pr = 0; pr < sig.num_predicates; ++pr) {
            std::vector<EntityId> members;
            for (EntityId v = 0; v < n; ++v) {
                if (rng.bernoulli(0.4)) {
                    members.push_back(v);
                }
            }
            val.set(pr, std::move(members));
        }
        const auto f = logic::random_formula(rng, sig, 1 + rng.below(4), 3);
        const auto g = logic::compile(f, sig);
        std::vector<diff::Array> trace;
        const diff::Array h = logic::forward_discrete(g, graph, val, std::nullopt, &trace);
        const std::size_t before = mismatched_bits + fractional;
        for (const auto& layer : trace) {
            for (double x : layer.values()) {
                fractional += x != 0.0 && x != 1.0;
            }
        }
        for (std::size_t l = 0; l < g.width(); ++l) {
            const auto truth = logic::check_all(graph, *g.index.slots[l], val);
            for (EntityId v = 0; v < n; ++v) {
                mismatched_bits += h(v, l) != static_cast<double>(truth[v]);
                ++bits;
            }
        }
        failed_trials += mismatched_bits + fractional != before;
    }
    CheckResult r;
    r.name = "compiler_fuzz";
    r.status = failed_trials == 0 ? Status::kPass : Status::kFail;
    r.detail = "forward bits equal the model checker at every entity and slot; activations stay in {0,1}";
    r.data["trials"] = o.fuzz_trials;
    r.data["bits"] = bits;
    r.data["mismatched_bits"] = mismatched_bits;
    r.data["fractional_activations"] = fractional;
    r.data["failed_trials"] = failed_trials;
    return r;
}

SuiteReport run_suite(const SuiteOptions& o) {
    SuiteReport rep;
    rep.checks.push_back(ut_invariance(o));
    rep.checks.push_back(compiled_invariance());
    rep.checks.push_back(pn_separation());
    rep.checks.push_back(khop(2, o));
    rep.checks.push_back(khop(3, o));
    rep.checks.push_back(compiler_fuzz(o));
    return rep;
}

nlohmann::ordered_json to_json(const CheckResult& c) {
    nlohmann::ordered_json j;
    j["check"] = c.name;
    j["status"] = status_name(c.status);
    j["detail"] = c.detail;
    for (const auto& [k, v] : c.data.items()) {
        j[k] = v;
    }
    return j;
}

nlohmann::ordered_json summary_json(const SuiteReport& r) {
    nlohmann::ordered_json j;
    j["summary"] = "expressivity-suite";
    j["passed"] = r.count(Status::kPass);
    j["failed"] = r.count(Status::kFail);
    j["skipped"] = r.count(Status::kSkipped);
    j["ok"] = r.passed();
    return j;
}

} // namespace pngnn::suite
