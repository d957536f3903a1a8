#include "doctest.h"

#include "pngnn/error.hpp"
#include "pngnn/synth/generator.hpp"
#include "pngnn/train/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>

#include <unistd.h>

using namespace pngnn;
using namespace pngnn::train;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& tag) {
        path = fs::temp_directory_path() / ("pngnn_train_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

kg::DatasetBundle small_synth(synth::Structure s, std::size_t groups, std::uint64_t seed = 0) {
    synth::SynthConfig c = synth::default_config(s);
    c.groups = groups;
    if (synth::is_label_variant(s)) {
        c.test_groups = 3;
        c.valid_ratio = 0.1;
    }
    c.seed = seed;
    return synth::generate(c).bundle;
}

TrainConfig small_config(ModelKind m) {
    TrainConfig c;
    c.model = m;
    c.cgnn.layers = 4;
    c.cgnn.dim = 8;
    c.cgnn.scorer_hidden = 8;
    c.pn.pool = diff::Reduce::kSum;
    c.negatives = 8;
    c.batch_size = 8;
    c.epochs = 3;
    c.seed = 5;
    return c;
}

// Transductive toy bundle whose train triples double as the graph.
kg::DatasetBundle toy_transductive() {
    kg::DatasetBundle b;
    b.layout = kg::Layout::kTransductive;
    for (int i = 0; i < 6; ++i) {
        b.entities.intern("n" + std::to_string(i));
    }
    b.relations.intern("p");
    b.relations.intern("s");
    b.train = {{0, 0, 1}, {1, 0, 2}, {2, 0, 3}, {3, 1, 4}, {4, 1, 5}, {0, 1, 5}};
    b.valid = {{1, 1, 3}};
    b.test = {{2, 1, 4}, {0, 0, 2}};
    b.fact_graph = kg::KnowledgeGraph(6, 2, b.train);
    return b;
}

} // namespace

TEST_SUITE("train-eval") {

TEST_CASE("negatives on a three-entity graph avoid the known triple") {
    // a = 0, b = 1, c = 2.
    const TripleIndex known{std::vector<Triple>{{0, 0, 1}}};
    Rng rng(3);
    std::map<EntityId, int> seen;
    for (const Triple& t : sample_negatives(known, 3, {0, 0, 1}, 200, rng, Side::kTail)) {
        CHECK(t.head == 0);
        CHECK(t.relation == 0);
        CHECK(t.tail != 1);
        ++seen[t.tail];
    }
    CHECK(seen.size() == 2);
    CHECK(seen[0] > 0);
    CHECK(seen[2] > 0);
    CHECK_THROWS_AS(sample_negatives(known, 3, {0, 0, 1}, 0, rng, Side::kTail), InvalidArgument);
}

TEST_CASE("no valid replacement is a sampling error") {
    const TripleIndex known{std::vector<Triple>{{0, 0, 0}, {0, 0, 1}}};
    Rng rng(1);
    CHECK_THROWS_AS(sample_negatives(known, 2, {0, 0, 1}, 4, rng, Side::kTail), SamplingError);
    // Head side still has a free replacement: (1, 0, 1).
    const auto heads = sample_negatives(known, 2, {0, 0, 1}, 4, rng, Side::kHead);
    for (const Triple& t : heads) {
        CHECK(t.head == 1);
    }
}

TEST_CASE("bundle overload treats facts and train as known") {
    kg::DatasetBundle b = toy_transductive();
    Rng rng(2);
    for (const Triple& t : sample_negatives(b, {0, 0, 1}, 100, rng, Side::kTail)) {
        CHECK(t.tail != 1);
    }
    for (const Triple& t : sample_negatives(b, {0, 1, 5}, 100, rng, Side::kHead)) {
        CHECK(t.head != 0);
        CHECK(t.head != 4); // (4, s, 5) is a train triple
    }
}

TEST_CASE("negative tails are uniform over the valid replacements") {
    // Chi-square goodness of fit; the 0.999 quantile bounds a correct sampler.
    auto chi_square = [](const std::map<EntityId, int>& counts, std::size_t cells, int draws) {
        const double expect = static_cast<double>(draws) / static_cast<double>(cells);
        double x2 = 0;
        for (const auto& [e, c] : counts) {
            x2 += (c - expect) * (c - expect) / expect;
        }
        x2 += static_cast<double>(cells - counts.size()) * expect;
        return x2;
    };
    SUBCASE("rejection path on 50 entities") {
        std::vector<Triple> facts;
        for (EntityId t = 1; t < 10; ++t) {
            facts.push_back({0, 0, t});
        }
        const TripleIndex known{facts};
        Rng rng(17);
        std::map<EntityId, int> counts;
        for (const Triple& t : sample_negatives(known, 50, {0, 0, 5}, 1000, rng, Side::kTail)) {
            CHECK((t.tail == 0 || t.tail >= 10));
            ++counts[t.tail];
        }
        CHECK(counts.size() <= 41);
        CHECK(chi_square(counts, 41, 1000) < 73.40); // 40 dof
    }
    SUBCASE("enumeration path when most entities are blocked") {
        std::vector<Triple> facts;
        for (EntityId t = 0; t < 7; ++t) {
            facts.push_back({0, 0, t});
        }
        const TripleIndex known{facts};
        Rng rng(23);
        std::map<EntityId, int> counts;
        for (const Triple& t : sample_negatives(known, 10, {0, 0, 3}, 1000, rng, Side::kTail)) {
            CHECK(t.tail >= 7);
            ++counts[t.tail];
        }
        CHECK(counts.size() == 3);
        CHECK(chi_square(counts, 3, 1000) < 13.82); // 2 dof
    }
}

TEST_CASE("nll loss values and gradient") {
    Tape tape;
    auto loss = [&](double pos, std::vector<double> neg) {
        const Var p = tape.constant(diff::Array(1, 1, pos));
        diff::Array n(neg.size(), 1);
        for (std::size_t i = 0; i < neg.size(); ++i) {
            n(i, 0) = neg[i];
        }
        return diff::nll_loss(p, tape.constant(n)).value()[0];
    };
    CHECK(loss(40, {-40, -40, -40}) < 1e-15);
    CHECK(loss(0, {0}) == doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));
    CHECK(loss(0, {0, 0, 0, 0}) == doctest::Approx(2 * std::log(2.0)).epsilon(1e-12));
    CHECK(std::isfinite(loss(-800, {800})));

    diff::ParamStore store(4);
    store.set("pos", diff::Array(1, 1, 0.3));
    diff::Array neg(5, 1);
    for (std::size_t i = 0; i < 5; ++i) {
        neg(i, 0) = -1.0 + 0.45 * static_cast<double>(i);
    }
    store.set("neg", neg);
    diff::GradCheckOptions o;
    o.samples = 200;
    const auto report = diff::finite_diff_check(
        [&](Tape& t) { return diff::nll_loss(t.parameter(store.at("pos")), t.parameter(store.at("neg"))); }, store,
        o);
    CHECK(report.passed);
    CHECK(report.max_rel_error < 1e-4);
}

TEST_CASE("rank_query follows the tie convention and filter") {
    const std::vector<double> s{3, 2, 1};
    CHECK(rank_query(s, 1) == 2.0);
    CHECK(rank_query(s, 0) == 1.0);
    const std::vector<double> flat(5, 0.7);
    for (EntityId t = 0; t < 5; ++t) {
        CHECK(rank_query(flat, t) == 3.0);
    }
    const std::vector<EntityId> top{0};
    CHECK(rank_query(s, 1, top) == rank_query(s, 1) - 1.0);
    const std::vector<EntityId> self{1};
    CHECK_THROWS_AS(rank_query(s, 1, self), InvalidArgument);
    CHECK_THROWS_AS(rank_query(s, 3), RangeError);
}

TEST_CASE("filtered rank by enumeration and never above raw rank") {
    Rng rng(8);
    for (int q = 0; q < 20; ++q) {
        std::vector<double> scores(30);
        for (double& x : scores) {
            x = std::floor(rng.uniform(0, 6)); // coarse values force ties
        }
        const auto target = static_cast<EntityId>(rng.below(30));
        std::vector<EntityId> filter;
        for (EntityId e = 0; e < 30; ++e) {
            if (e != target && rng.bernoulli(0.2)) {
                filter.push_back(e);
            }
        }
        double expect = 1.0;
        for (EntityId e = 0; e < 30; ++e) {
            if (e == target || std::find(filter.begin(), filter.end(), e) != filter.end()) {
                continue;
            }
            expect += scores[e] > scores[target] ? 1.0 : scores[e] == scores[target] ? 0.5 : 0.0;
        }
        const double filtered = rank_query(scores, target, filter);
        CHECK(filtered == expect);
        CHECK(filtered <= rank_query(scores, target));
    }
}

TEST_CASE("metrics arithmetic") {
    const std::vector<double> r{1, 2, 4};
    const Metrics m = metrics(r);
    CHECK(std::fabs(m.mrr - 0.5833333333333333) < 1e-9);
    CHECK(m.hits3 == 2.0 / 3.0);
    CHECK(m.hits1 == 1.0 / 3.0);
    CHECK(m.mr == doctest::Approx(7.0 / 3.0));
    CHECK(m.num_queries == 3);
    const std::vector<double> ones(7, 1.0);
    CHECK(metrics(ones).mrr == 1.0);
    CHECK(metrics(ones).hits1 == 1.0);
    CHECK_THROWS_AS(metrics(std::vector<double>{}), InvalidArgument);
    CHECK_THROWS_AS(metrics(std::vector<double>{0.5}), InvalidArgument);

    // Independent recomputation over a 20-query fixture.
    std::vector<double> ranks;
    for (int i = 0; i < 20; ++i) {
        ranks.push_back(1.0 + 0.5 * ((i * 7) % 29));
    }
    const Metrics f = metrics(ranks);
    double mrr = 0, mr = 0;
    int h1 = 0, h3 = 0, h10 = 0;
    for (double x : ranks) {
        mrr += 1 / x;
        mr += x;
        h1 += x <= 1;
        h3 += x <= 3;
        h10 += x <= 10;
    }
    CHECK(f.mrr == doctest::Approx(mrr / 20).epsilon(1e-12));
    CHECK(f.mr == doctest::Approx(mr / 20).epsilon(1e-12));
    CHECK(f.hits1 == h1 / 20.0);
    CHECK(f.hits3 == h3 / 20.0);
    CHECK(f.hits10 == h10 / 20.0);
    CHECK(f.hits1 <= f.hits3);
    CHECK(f.hits3 <= f.hits10);
    CHECK(f.mrr > 0);
    CHECK(f.mrr <= 1);

    const auto j = to_json(f, "test");
    CHECK(j.begin().key() == "split");
    CHECK(j.at("num_queries") == 20);
}

TEST_CASE("queries come in both directions") {
    const std::vector<Triple> t{{0, 1, 2}, {0, 1, 3}, {4, 0, 2}};
    const auto q = make_queries(t, 2);
    REQUIRE(q.size() == 5);
    CHECK(q[0].source == 0);
    CHECK(q[0].relation == 1);
    CHECK(q[0].answers == std::vector<EntityId>{2, 3});
    CHECK(q[1].source == 2);
    CHECK(q[1].relation == 3);
    CHECK(q[1].answers == std::vector<EntityId>{0});
    CHECK(q[4].source == 2);
    CHECK(q[4].relation == 2);
    std::size_t answers = 0;
    for (const Query& x : q) {
        answers += x.answers.size();
    }
    CHECK(answers == 2 * t.size());
    const TripleIndex idx = query_index({t}, 2);
    CHECK(idx.contains({0, 1, 3}));
    CHECK(idx.contains({2, 3, 0}));
    CHECK(idx.contains({2, 2, 4}));
    CHECK_FALSE(idx.contains({2, 2, 0}));
    CHECK_THROWS_AS(make_queries(std::vector<Triple>{{0, 2, 1}}, 2), RangeError);
}

TEST_CASE("config json round trip and validation") {
    TrainConfig c = small_config(ModelKind::kCgnn);
    c.pn.slots = {{1, 2}, {2, 1}};
    c.dataset = "/data/x";
    const TrainConfig back = train_config_from_json(to_json(c));
    CHECK(to_json(back) == to_json(c));
    CHECK_THROWS_AS(train_config_from_json({{"modle", "cgnn"}}), ConfigError);
    CHECK_THROWS_AS(train_config_from_json({{"train", {{"lr", 0.1}}}}), ConfigError);
    CHECK_THROWS_AS(train_config_from_json({{"model", "gnn"}}), ConfigError);
    for (auto broken : {nlohmann::json{{"train", {{"negatives", 0}}}}, nlohmann::json{{"train", {{"batch_size", 0}}}},
                        nlohmann::json{{"train", {{"learning_rate", 0.0}}}}}) {
        CHECK_THROWS_AS(train_config_from_json(broken).validate(), ConfigError);
    }
}

TEST_CASE("training edges are hidden from their own queries") {
    const kg::DatasetBundle b = toy_transductive();
    const Model m = make_model(small_config(ModelKind::kCgnn), 2);
    const KnowledgeGraph g = m.message_graph(b.fact_graph);
    CHECK(g.num_relations() == 4);
    const std::vector<Triple> pos{{0, 0, 1}};
    const auto removed = m.edges_to_remove(g, pos);
    CHECK(removed == std::vector<Triple>{{0, 0, 1}, {1, 2, 0}});
    // Inverse query form maps to the same pair of edges.
    const std::vector<Triple> inv{{1, 2, 0}};
    CHECK(m.edges_to_remove(g, inv) == removed);
    const std::vector<Triple> absent{{0, 0, 4}};
    CHECK(m.edges_to_remove(g, absent).empty());
}

TEST_CASE("score_all agrees with recorded logits") {
    for (ModelKind kind : {ModelKind::kCgnn, ModelKind::kPngnn}) {
        const kg::DatasetBundle b = small_synth(synth::Structure::kU, 6);
        const TrainConfig c = small_config(kind);
        const Model m = make_model(c, b.relations.size());
        ParamStore store(c.seed);
        m.initialize(store);
        const KnowledgeGraph g = m.message_graph(b.fact_graph);
        Tape tape(false);
        const auto base = m.baseline(tape, store, g, 0);
        std::vector<diff::Array> values;
        for (const Var& v : base) {
            values.push_back(v.value());
        }
        const Triple t = b.train.front();
        const auto all = m.score_all(store, g, values, t.head, t.relation);
        const std::vector<EntityId> some{t.tail, 0, 3, t.tail};
        const Var l = m.logits(tape, store, g, base, t.head, t.relation, some);
        for (std::size_t i = 0; i < some.size(); ++i) {
            CHECK(l.value()(i, 0) == doctest::Approx(all[some[i]]).epsilon(1e-12));
        }
    }
}

TEST_CASE("zero learning rate leaves parameters untouched") {
    const kg::DatasetBundle b = small_synth(synth::Structure::kC3, 8);
    const TrainConfig c = small_config(ModelKind::kPngnn);
    const Model m = make_model(c, b.relations.size());
    ParamStore store(c.seed);
    m.initialize(store);
    std::map<std::string, diff::Array> before;
    for (const auto& [name, p] : store.parameters()) {
        before.emplace(name, p.value);
    }
    const TrainData data = prepare_training(m, b);
    diff::AdamOptions adam;
    adam.learning_rate = 0.0;
    Rng rng(1);
    const double loss = train_epoch(m, store, data, adam, c.negatives, c.batch_size, rng);
    CHECK(std::isfinite(loss));
    for (const auto& [name, p] : store.parameters()) {
        CHECK(p.value.values().size() == before.at(name).values().size());
        CHECK(std::equal(p.value.values().begin(), p.value.values().end(), before.at(name).values().begin()));
    }
}

TEST_CASE("loss decreases over the first five epochs on every synthetic structure") {
    using S = synth::Structure;
    for (S s : {S::kC3, S::kC4, S::kI1, S::kI2, S::kT, S::kU, S::kTLabel, S::kULabel}) {
        const kg::DatasetBundle b = small_synth(s, 12, 2);
        for (ModelKind kind : {ModelKind::kCgnn, ModelKind::kPngnn}) {
            TrainConfig c = small_config(kind);
            c.cgnn.dim = 16;
            c.cgnn.scorer_hidden = 16;
            const Model m = make_model(c, b.relations.size());
            ParamStore store(c.seed);
            m.initialize(store);
            const TrainData data = prepare_training(m, b);
            diff::AdamOptions adam;
            Rng rng(c.seed);
            std::vector<double> losses;
            for (int e = 0; e < 5; ++e) {
                losses.push_back(train_epoch(m, store, data, adam, c.negatives, c.batch_size, rng));
            }
            INFO(synth::structure_name(s) << " " << model_name(kind) << " first " << losses.front() << " fifth "
                                          << losses.back());
            CHECK(losses.back() < losses.front());
        }
    }
}

#ifdef NDEBUG
TEST_CASE("a non-finite loss aborts training") {
    const kg::DatasetBundle b = small_synth(synth::Structure::kC3, 4);
    const TrainConfig c = small_config(ModelKind::kCgnn);
    const Model m = make_model(c, b.relations.size());
    ParamStore store(c.seed);
    m.initialize(store);
    auto& w = store.at("score.l1.b");
    w.value(0, 0) = std::numeric_limits<double>::quiet_NaN();
    const TrainData data = prepare_training(m, b);
    Rng rng(1);
    CHECK_THROWS_AS(train_epoch(m, store, data, diff::AdamOptions{}, 4, 4, rng), NumericError);
}
#endif

TEST_CASE("evaluation doubles the query count and ignores the thread count") {
    const kg::DatasetBundle b = small_synth(synth::Structure::kI1, 10);
    const TrainConfig c = small_config(ModelKind::kPngnn);
    const Model m = make_model(c, b.relations.size());
    ParamStore store(c.seed);
    const EvalResult one = evaluate(m, store, b, "test", 1);
    const EvalResult three = evaluate(m, store, b, "test", 3);
    CHECK(one.metrics.num_queries == 2 * b.test.size());
    REQUIRE(one.ranks.size() == three.ranks.size());
    for (std::size_t i = 0; i < one.ranks.size(); ++i) {
        CHECK(one.ranks[i].rank == three.ranks[i].rank);
        CHECK(one.ranks[i].rank <= one.ranks[i].raw_rank);
        CHECK(one.ranks[i].inverse == (i % 2 == 1));
    }
    CHECK_THROWS_AS(evaluate(m, store, b, "dev"), InvalidArgument);
    kg::DatasetBundle empty = b;
    empty.test.clear();
    CHECK_THROWS_AS(evaluate(m, store, empty, "test"), InvalidArgument);
}

TEST_CASE("an untrained model ranks near the random baseline") {
    const kg::DatasetBundle b = small_synth(synth::Structure::kC3, 40);
    const TrainConfig c = small_config(ModelKind::kCgnn);
    const Model m = make_model(c, b.relations.size());
    ParamStore store(c.seed);
    const EvalResult r = evaluate(m, store, b, "test");
    // Random ranking over n candidates: E[MRR] = H_n / n.
    const double n = static_cast<double>(b.entities.size());
    double harmonic = 0;
    for (double k = 1; k <= n; ++k) {
        harmonic += 1 / k;
    }
    CHECK(r.metrics.mrr < 10 * harmonic / n);
    CHECK(r.metrics.hits1 < 0.2);
}

TEST_CASE("training is deterministic and checkpoints evaluate identically") {
    TempDir a("det_a"), b2("det_b");
    const kg::DatasetBundle b = small_synth(synth::Structure::kC3, 12);
    const TrainConfig c = small_config(ModelKind::kPngnn);
    const TrainResult r1 = train::train(c, b, a.path);
    const TrainResult r2 = train::train(c, b, b2.path);
    REQUIRE(r1.history.size() == r2.history.size());
    CHECK(r1.best_epoch == r2.best_epoch);
    CHECK(r1.best_valid.mrr == r2.best_valid.mrr);
    for (std::size_t i = 0; i < r1.history.size(); ++i) {
        CHECK(r1.history[i].loss == r2.history[i].loss);
    }
    std::ifstream f1(r1.checkpoint), f2(r2.checkpoint);
    std::string h1, h2;
    std::getline(f1, h1);
    std::getline(f2, h2);
    CHECK(h1 == diff::kCheckpointHeader);
    CHECK(h1 == h2);

    const Checkpoint ck = load_checkpoint(r1.checkpoint);
    CHECK(to_json(ck.config) == to_json(c));
    CHECK(ck.meta.at("best_epoch") == r1.best_epoch);
    const EvalResult valid = evaluate_checkpoint(r1.checkpoint, b, "valid");
    CHECK(valid.metrics.mrr == doctest::Approx(r1.best_valid.mrr).epsilon(1e-12));

    write_ranks(a.path / "ranks.tsv", valid, b);
    std::ifstream ranks(a.path / "ranks.tsv");
    std::size_t lines = 0;
    for (std::string line; std::getline(ranks, line);) {
        ++lines;
    }
    CHECK(lines == 2 * b.valid.size());

    kg::DatasetBundle renamed = b;
    kg::Vocabulary rel;
    for (std::size_t i = 0; i < b.relations.size(); ++i) {
        rel.intern(i == 0 ? "other" : b.relations.name(static_cast<RelationId>(i)));
    }
    renamed.relations = rel;
    CHECK_THROWS_AS(evaluate_checkpoint(r1.checkpoint, renamed, "test"), CompatibilityError);
    const kg::DatasetBundle other = small_synth(synth::Structure::kC3, 12, 99);
    CHECK_THROWS_AS(evaluate_checkpoint(r1.checkpoint, other, "test"), CompatibilityError);
    CHECK_THROWS_AS(load_checkpoint(a.path / "missing.ckpt"), IoError);
}

TEST_CASE("C3 reaches perfect validation Hits@1") {
    TempDir dir("c3");
    synth::SynthConfig s = synth::default_config(synth::Structure::kC3);
    const kg::DatasetBundle b = synth::generate(s).bundle;
    TrainConfig c;
    c.model = ModelKind::kPngnn;
    c.cgnn.layers = 4;
    c.pn.pool = diff::Reduce::kSum;
    c.negatives = 64;
    c.epochs = 50;
    c.patience = 3;
    const TrainResult r = train::train(c, b, dir.path);
    CHECK(r.best_valid.hits1 == 1.0);
    CHECK(r.history.size() <= 50);
}

} // TEST_SUITE
