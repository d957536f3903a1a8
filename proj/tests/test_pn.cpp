#include "doctest.h"

#include "pngnn/cgnn/engine.hpp"
#include "pngnn/error.hpp"
#include "pngnn/logic/compiler.hpp"
#include "pngnn/pn/aggregator.hpp"
#include "support.hpp"

#include <algorithm>
#include <cmath>

using namespace pngnn;
using namespace pngnn::pn;
using testsupport::random_graph;

namespace {

Array identity(std::size_t d) {
    Array a(d, d);
    for (std::size_t i = 0; i < d; ++i) {
        a(i, i) = 1.0;
    }
    return a;
}

std::vector<EntityId> all_entities(std::size_t n) {
    std::vector<EntityId> v(n);
    for (std::size_t i = 0; i < n; ++i) {
        v[i] = static_cast<EntityId>(i);
    }
    return v;
}

void set_identity_slots(ParamStore& store, std::size_t hops, std::size_t d) {
    for (const Slot& s : khop_slots(hops)) {
        const std::string name = "pn." + std::to_string(s.first) + "_" + std::to_string(s.second) + ".l0";
        store.set(name + ".w", identity(d));
        store.set(name + ".b", Array(1, d));
    }
}

} // namespace

TEST_SUITE("pn-aggregator") {

TEST_CASE("distances on small fixtures") {
    KnowledgeGraph chain(5, 1, {{0, 0, 1}, {1, 0, 2}, {2, 0, 3}});
    auto t = compute_distances(chain, 0, 2);
    CHECK(t.from_source(0) == 0);
    CHECK(t.from_source(1) == 1);
    CHECK(t.from_source(2) == 2);
    CHECK(t.from_source(3) == 3);
    CHECK(t.from_source(4) == kUnreachable);
    CHECK(std::vector<EntityId>(t.stratum(3, 2).begin(), t.stratum(3, 2).end()) == std::vector<EntityId>{1});
    CHECK_THROWS_AS(compute_distances(chain, 0, 0), InvalidArgument);
    CHECK_THROWS_AS(compute_distances(chain, 9, 1), RangeError);
    CHECK_THROWS_AS(t.stratum(3, 3), StateError);
    const EntityId only[] = {3};
    auto partial = compute_distances(chain, 0, 2, only);
    CHECK(partial.has_target(3));
    CHECK_FALSE(partial.has_target(2));
    CHECK_THROWS_AS(partial.stratum(2, 1), StateError);
    CHECK_THROWS_AS(path_neighbors(t, 3, 0, 1), InvalidArgument);
    for (std::size_t i = 1; i <= 2; ++i) {
        for (std::size_t j = 1; j <= 2; ++j) {
            CHECK(path_neighbors(t, 4, i, j).empty());
        }
    }
    const kg::Triple cut[] = {{1, 0, 2}};
    auto skipped = compute_distances(chain, 0, 2, {}, cut);
    CHECK(skipped.from_source(2) == kUnreachable);
    CHECK(skipped.stratum(3, 2).empty());
}

TEST_CASE("distances match an all-pairs oracle") {
    Rng rng(11);
    for (int trial = 0; trial < 60; ++trial) {
        const std::size_t n = 1 + rng.below(50);
        KnowledgeGraph g = random_graph(rng, n, 3, rng.below(3 * n));
        const auto d = testsupport::all_pairs(g);
        const EntityId u = static_cast<EntityId>(rng.below(n));
        const std::size_t jmax = 1 + rng.below(4);
        auto t = compute_distances(g, u, jmax);
        for (std::size_t v = 0; v < n; ++v) {
            REQUIRE(t.from_source(static_cast<EntityId>(v)) == d[u][v]);
            for (std::size_t j = 1; j <= jmax; ++j) {
                std::vector<EntityId> expect;
                for (std::size_t w = 0; w < n; ++w) {
                    if (d[w][v] == j) {
                        expect.push_back(static_cast<EntityId>(w));
                    }
                }
                auto got = t.stratum(static_cast<EntityId>(v), j);
                REQUIRE(std::vector<EntityId>(got.begin(), got.end()) == expect);
                for (EntityId w : got) {
                    if (d[u][w] != UINT32_MAX && d[u][v] != UINT32_MAX) {
                        REQUIRE(d[u][v] <= d[u][w] + j); // triangle bound
                    }
                }
            }
        }
    }
}

TEST_CASE("path-neighbor slots on the canonical pair") {
    auto p = logic::khop_counterexample(2);
    auto u = compute_distances(p.merged, 0, 2);
    auto t = compute_distances(p.split, 0, 2);
    CHECK(path_neighbors(u, p.target_merged, 1, 2) == std::vector<EntityId>{1});
    CHECK(path_neighbors(t, p.target_split, 1, 2) == std::vector<EntityId>{1, 2});
    CHECK(path_neighbors(u, p.target_merged, 1, 1).empty());
    CHECK(path_neighbors(u, p.target_merged, 2, 1).size() == 2);
    CHECK(path_neighbors(t, p.target_split, 1, 1).empty());
    CHECK(path_neighbors(t, p.target_split, 2, 1).size() == 2);
    CHECK(khop_slots(1) == std::vector<Slot>{{1, 1}});
    CHECK(khop_slots(2) == std::vector<Slot>{{1, 1}, {1, 2}, {2, 1}});
    CHECK(khop_slots(3).size() == 6);
}

TEST_CASE("strata are permutation equivariant") {
    Rng rng(12);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t n = 2 + rng.below(25);
        KnowledgeGraph g = random_graph(rng, n, 2, rng.below(3 * n));
        auto perm = testsupport::random_perm(rng, n);
        KnowledgeGraph pg = testsupport::permute(g, perm);
        const EntityId u = static_cast<EntityId>(rng.below(n));
        auto a = compute_distances(g, u, 3);
        auto b = compute_distances(pg, perm[u], 3);
        for (std::size_t v = 0; v < n; ++v) {
            REQUIRE(a.from_source(static_cast<EntityId>(v)) == b.from_source(perm[v]));
            for (std::size_t j = 1; j <= 3; ++j) {
                std::vector<EntityId> mapped;
                for (EntityId w : a.stratum(static_cast<EntityId>(v), j)) {
                    mapped.push_back(perm[w]);
                }
                std::sort(mapped.begin(), mapped.end());
                auto other = b.stratum(perm[v], j);
                REQUIRE(mapped == std::vector<EntityId>(other.begin(), other.end()));
            }
        }
    }
}

TEST_CASE("pool") {
    Array h = Array::from_rows({{1, 0}, {0, 1}, {3, -2}});
    const EntityId one[] = {2};
    const EntityId two[] = {0, 1};
    auto single = pool(h, one, Reduce::kMean);
    CHECK(single.count == 1);
    CHECK(single.vector == Array::from_rows({{3, -2}}));
    auto empty = pool(h, {}, Reduce::kMax);
    CHECK(empty.count == 0);
    CHECK(empty.vector == Array(1, 2));
    CHECK(pool(h, two, Reduce::kMean).vector == Array::from_rows({{0.5, 0.5}}));
    CHECK(pool(h, two, Reduce::kMin).vector == Array::from_rows({{0, 0}}));

    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 3 + rng.below(20);
        KnowledgeGraph g = random_graph(rng, n, 2, 2 * n);
        Array x(n, 3);
        for (double& v : x.values()) {
            v = rng.uniform(-1, 1);
        }
        auto t = compute_distances(g, 0, 2);
        for (std::size_t v = 0; v < n; ++v) {
            auto s = summarize(x, t, static_cast<EntityId>(v), 2, Reduce::kSum);
            auto m = summarize(x, t, static_cast<EntityId>(v), 2, Reduce::kMean);
            for (const auto& [slot, pooled] : s.slots) {
                for (std::size_t c = 0; c < 3; ++c) {
                    REQUIRE(pooled.vector(0, c) ==
                            doctest::Approx(static_cast<double>(pooled.count) * m.slots[slot].vector(0, c)));
                }
            }
        }
    }
}

TEST_CASE("config json") {
    PnConfig c;
    c.hops = 3;
    c.slots = {{1, 2}, {2, 1}};
    c.fuse = Fuse::kAdd;
    c.pool = Reduce::kSum;
    CHECK(to_json(pn_config_from_json(to_json(c))) == to_json(c));
    CHECK_THROWS_AS(pn_config_from_json({{"slots", {"3,1"}}}), ConfigError);
    CHECK_THROWS_AS(pn_config_from_json({{"slots", {"1;1"}}}), ConfigError);
    CHECK_THROWS_AS(pn_config_from_json({{"hops", 0}}), ConfigError);
    CHECK_THROWS_AS(pn_config_from_json({{"fuse", "mix"}}), ConfigError);
    CHECK(parse_slot("2,1") == Slot{2, 1});
}

TEST_CASE("fuse_2hop degenerate and literal cases") {
    const std::size_t d = 2;
    PnConfig c;
    PathNeighborSummary s;
    s.hops = 2;
    for (const Slot& slot : khop_slots(2)) {
        s.slots[slot] = Pooled{Array(1, d), 0};
    }
    const double hv[] = {7, 8};
    ParamStore store(1);
    for (const Slot& slot : khop_slots(2)) {
        const std::string name = "pn." + std::to_string(slot.first) + "_" + std::to_string(slot.second) + ".l0";
        store.set(name + ".w", Array(d, d));
        store.set(name + ".b", Array::from_rows({{double(slot.first), double(slot.second)}}));
    }
    CHECK(fuse_2hop(store, c, s, hv) == Array::from_rows({{1, 1, 1, 2, 2, 1, 7, 8}}));

    set_identity_slots(store, 2, d);
    s.slots[{1, 1}] = Pooled{Array::from_rows({{1, 2}}), 1};
    s.slots[{1, 2}] = Pooled{Array::from_rows({{3, 4}}), 1};
    s.slots[{2, 1}] = Pooled{Array::from_rows({{5, 6}}), 1};
    CHECK(fuse_2hop(store, c, s, hv) == Array::from_rows({{1, 2, 3, 4, 5, 6, 7, 8}}));
    c.hops = 2;
    CHECK(fuse_khop(store, c, s, hv) == fuse_2hop(store, c, s, hv));
    PnConfig one;
    one.hops = 1;
    CHECK(fuse_khop(store, one, s, hv) == Array::from_rows({{1, 2, 7, 8}}));
    c.fuse = Fuse::kAdd;
    CHECK(fuse_2hop(store, c, s, hv) == Array::from_rows({{16, 20}}));
    const double wide[] = {1, 2, 3};
    CHECK_THROWS_AS(fuse_2hop(store, c, s, wide), ShapeError);
}

TEST_CASE("tape fusion matches the summary form and masks") {
    Rng rng(14);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 3 + rng.below(15);
        KnowledgeGraph g = random_graph(rng, n, 2, 2 * n);
        cgnn::CgnnConfig cc;
        cc.dim = 4;
        cc.layers = 3;
        cgnn::Engine e(cc, 2);
        ParamStore store(trial);
        PnConfig c;
        c.hops = 2 + rng.below(2);
        c.pool = static_cast<Reduce>(rng.below(4));
        c.mlp_layers = 1 + rng.below(2);
        Tape tape(false);
        auto h = e.run(tape, store, g, 0, 1);
        auto table = compute_distances(g, 0, c.hops);
        auto targets = all_entities(n);
        RowSource rows = [&](std::span<const EntityId> which) {
            std::vector<std::size_t> idx(which.begin(), which.end());
            return diff::gather_rows(h.back(), idx);
        };
        Array fused = fuse_khop(tape, store, c, cc.dim, rows, table, targets).value();
        REQUIRE(fused.cols() == fused_width(c, cc.dim));
        for (EntityId v : targets) {
            auto s = summarize(h.back().value(), table, v, c.hops, c.pool);
            Array one = fuse_khop(store, c, s, h.back().value().row(v));
            for (std::size_t k = 0; k < fused.cols(); ++k) {
                REQUIRE(fused(v, k) == doctest::Approx(one(0, k)).epsilon(1e-12));
            }
            // Masking a slot with an empty stratum leaves the output alone.
            for (const auto& [slot, pooled] : s.slots) {
                if (pooled.count != 0) {
                    continue;
                }
                PnConfig masked = c;
                for (const Slot& other : khop_slots(c.hops)) {
                    if (other != slot) {
                        masked.slots.push_back(other);
                    }
                }
                REQUIRE(fuse_khop(store, masked, s, h.back().value().row(v)) == one);
            }
        }
    }
}

TEST_CASE("two-hop fusion cannot split the three-hop pair; three-hop fusion can") {
    auto p = logic::khop_counterexample(3);
    const std::size_t rels = 7;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        cgnn::CgnnConfig cc;
        cc.dim = 4;
        cc.layers = 4;
        cc.activation = diff::Activation::kTanh;
        cgnn::Engine e(cc, rels);
        ParamStore store(seed);
        auto fused = [&](const KnowledgeGraph& g, EntityId v, std::size_t hops) {
            Tape tape(false);
            auto h = e.run(tape, store, g, 0, 0);
            auto table = compute_distances(g, 0, hops);
            PnConfig c;
            c.hops = hops;
            c.pool = Reduce::kSum;
            RowSource rows = [&](std::span<const EntityId> which) {
                std::vector<std::size_t> idx(which.begin(), which.end());
                return diff::gather_rows(h.back(), idx);
            };
            const EntityId t[] = {v};
            return fuse_khop(tape, store, c, cc.dim, rows, table, t).value();
        };
        CHECK(diff::max_abs_diff(fused(p.merged, p.target_merged, 2), fused(p.split, p.target_split, 2)) < 1e-12);
        CHECK(diff::max_abs_diff(fused(p.merged, p.target_merged, 3), fused(p.split, p.target_split, 3)) > 1e-6);
    }
}

TEST_CASE("fusion with compiled separator weights reproduces the readout") {
    for (std::size_t k : {2, 3}) {
        auto p = logic::khop_counterexample(k);
        auto cp = logic::chain_pair_formula(k);
        auto base = logic::compile(cp.formula, logic::Signature{1, 2 * k + 1});
        auto sep = logic::compile_pn_separator(base, base.index.slot(*cp.first_hop), {1, k});
        const std::size_t L = sep.width();
        ParamStore store(0);
        PnConfig c;
        c.hops = k;
        c.pool = Reduce::kSum;
        c.fuse = Fuse::kAdd;
        for (const Slot& s : khop_slots(k)) {
            const std::string name = "pn." + std::to_string(s.first) + "_" + std::to_string(s.second) + ".l0";
            auto a = sep.pn->a_pn.find(s);
            auto b = sep.pn->b_pn.find(s);
            store.set(name + ".w", a == sep.pn->a_pn.end() ? Array(L, L) : a->second);
            store.set(name + ".b", b == sep.pn->b_pn.end() ? Array(1, L) : b->second);
        }
        logic::Valuation val;
        val.set(0, {0});
        auto readout = [&](const KnowledgeGraph& g, EntityId v) {
            Array h = logic::forward_discrete(sep, g, val);
            auto table = compute_distances(g, 0, k);
            auto s = summarize(h, table, v, k, Reduce::kSum);
            Array f = fuse_khop(store, c, s, h.row(v));
            const double root = std::clamp(f(0, sep.index.root()), 0.0, 1.0);
            CHECK(root == logic::separator_bit(sep, h, table, v));
            return root;
        };
        CHECK(readout(p.merged, p.target_merged) == 1.0);
        CHECK(readout(p.split, p.target_split) == 0.0);
    }
}

} // TEST_SUITE
