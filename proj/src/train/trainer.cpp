#include "pngnn/train/trainer.hpp"

#include "pngnn/error.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <thread>

namespace pngnn::train {

namespace fs = std::filesystem;

void TrainConfig::validate() const {
    if (negatives < 1) {
        throw ConfigError("train.negatives must be >= 1");
    }
    if (batch_size < 1) {
        throw ConfigError("train.batch_size must be >= 1");
    }
    if (!(learning_rate > 0) || !std::isfinite(learning_rate)) {
        throw ConfigError("train.learning_rate must be a positive number");
    }
    if (epochs < 1) {
        throw ConfigError("train.epochs must be >= 1");
    }
    cgnn.validate();
    pn.validate();
}

nlohmann::json to_json(const TrainConfig& c) {
    return {{"model", model_name(c.model)},
            {"dataset", c.dataset},
            {"layout", kg::layout_name(c.layout)},
            {"cgnn", cgnn::to_json(c.cgnn)},
            {"pn", pn::to_json(c.pn)},
            {"train",
             {{"negatives", c.negatives},
              {"batch_size", c.batch_size},
              {"learning_rate", c.learning_rate},
              {"epochs", c.epochs},
              {"patience", c.patience},
              {"seed", c.seed},
              {"inverse_augmentation", c.inverse_augmentation}}}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw ConfigError("training config must be a JSON object");
    }
    TrainConfig c;
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "model") {
                c.model = parse_model(v.get<std::string>());
            } else if (key == "dataset") {
                c.dataset = v.get<std::string>();
            } else if (key == "layout") {
                c.layout = kg::parse_layout(v.get<std::string>());
            } else if (key == "cgnn") {
                c.cgnn = cgnn::cgnn_config_from_json(v);
            } else if (key == "pn") {
                c.pn = pn::pn_config_from_json(v);
            } else if (key == "train") {
                if (!v.is_object()) {
                    throw ConfigError("'train' section must be an object");
                }
                for (const auto& [k, x] : v.items()) {
                    if (k == "negatives") {
                        c.negatives = x.get<std::size_t>();
                    } else if (k == "batch_size") {
                        c.batch_size = x.get<std::size_t>();
                    } else if (k == "learning_rate") {
                        c.learning_rate = x.get<double>();
                    } else if (k == "epochs") {
                        c.epochs = x.get<std::size_t>();
                    } else if (k == "patience") {
                        c.patience = x.get<std::size_t>();
                    } else if (k == "seed") {
                        c.seed = x.get<std::uint64_t>();
                    } else if (k == "inverse_augmentation") {
                        c.inverse_augmentation = x.get<bool>();
                    } else {
                        throw ConfigError("unknown key 'train." + k + "'");
                    }
                }
            } else {
                throw ConfigError("unknown config section '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("training config: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw ConfigError(e.what());
    }
    return c;
}

TrainConfig read_train_config(const fs::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw IoError("cannot read config '" + file.string() + "'");
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
    TrainConfig c = train_config_from_json(j);
    if (!c.dataset.empty() && fs::path(c.dataset).is_relative()) {
        c.dataset = (file.parent_path() / c.dataset).lexically_normal().string();
    }
    return c;
}

Model make_model(const TrainConfig& c, std::size_t base_relations) {
    return Model(c.model, c.cgnn, c.pn, base_relations, c.inverse_augmentation);
}

std::vector<Query> make_queries(std::span<const Triple> triples, std::size_t base_relations) {
    std::vector<Query> out;
    std::map<std::pair<EntityId, RelationId>, std::size_t> slot;
    auto add = [&](EntityId u, RelationId q, EntityId v) {
        auto [it, fresh] = slot.emplace(std::make_pair(u, q), out.size());
        if (fresh) {
            out.push_back({u, q, {}});
        }
        auto& a = out[it->second].answers;
        if (std::find(a.begin(), a.end(), v) == a.end()) {
            a.push_back(v);
        }
    };
    for (const Triple& t : triples) {
        if (t.relation >= base_relations) {
            throw RangeError("relation " + std::to_string(t.relation) + " outside the base relations");
        }
        add(t.head, t.relation, t.tail);
        add(t.tail, static_cast<RelationId>(t.relation + base_relations), t.head);
    }
    return out;
}

TripleIndex query_index(std::initializer_list<std::span<const Triple>> parts, std::size_t base_relations) {
    TripleIndex index;
    for (auto p : parts) {
        index.add(p);
        std::vector<Triple> inv;
        inv.reserve(p.size());
        for (const Triple& t : p) {
            inv.push_back({t.tail, static_cast<RelationId>(t.relation + base_relations), t.head});
        }
        index.add(inv);
    }
    return index;
}

TrainData prepare_training(const Model& model, const kg::DatasetBundle& bundle) {
    if (bundle.train.empty()) {
        throw InvalidArgument("training split is empty");
    }
    const std::size_t r0 = model.base_relations();
    TrainData d{model.message_graph(bundle.fact_graph), query_index({bundle.fact_graph.triples(), bundle.train}, r0),
                make_queries(bundle.train, r0)};
    return d;
}

BatchItem draw_negatives(const TripleIndex& known, std::size_t num_entities, const Query& query,
                         std::size_t negatives, Rng& rng) {
    BatchItem item{&query, {}};
    item.negatives.reserve(query.answers.size() * negatives);
    for (EntityId v : query.answers) {
        for (const Triple& neg :
             sample_negatives(known, num_entities, {query.source, query.relation, v}, negatives, rng, Side::kTail)) {
            item.negatives.push_back(neg.tail);
        }
    }
    return item;
}

Var batch_loss(Tape& tape, const Model& model, ParamStore& store, const KnowledgeGraph& graph,
               std::span<const BatchItem> items, std::size_t negatives) {
    if (items.empty() || negatives < 1) {
        throw InvalidArgument("batch_loss: empty batch or zero negatives");
    }
    const bool per_query = model.engine().baseline_depends_on_query();
    std::map<RelationId, std::vector<Var>> bases;
    std::vector<Var> parts;
    std::size_t positives = 0;
    for (const BatchItem& item : items) {
        const Query& query = *item.query;
        const RelationId key = per_query ? query.relation : 0;
        auto it = bases.find(key);
        if (it == bases.end()) {
            it = bases.emplace(key, model.baseline(tape, store, graph, key)).first;
        }
        const std::size_t p = query.answers.size();
        std::vector<EntityId> targets = query.answers;
        targets.insert(targets.end(), item.negatives.begin(), item.negatives.end());
        std::vector<Triple> supervised;
        for (EntityId v : query.answers) {
            supervised.push_back({query.source, query.relation, v});
        }
        const std::vector<Triple> removed = model.edges_to_remove(graph, supervised);
        const Var logits = model.logits(tape, store, graph, it->second, query.source, query.relation, targets, removed);
        std::vector<std::size_t> pos(p), neg(targets.size() - p);
        std::iota(pos.begin(), pos.end(), std::size_t{0});
        std::iota(neg.begin(), neg.end(), p);
        const Var pos_term = diff::sum(diff::softplus(diff::scale(diff::gather_rows(logits, pos), -1.0)));
        const Var neg_term = diff::scale(diff::sum(diff::softplus(diff::gather_rows(logits, neg))),
                                         1.0 / static_cast<double>(negatives));
        parts.push_back(diff::add(pos_term, neg_term));
        positives += p;
    }
    return diff::scale(diff::sum(diff::concat_rows(parts)), 1.0 / static_cast<double>(positives));
}

double train_epoch(const Model& model, ParamStore& store, const TrainData& data, const diff::AdamOptions& adam,
                   std::size_t negatives, std::size_t batch_size, Rng& rng) {
    if (negatives < 1 || batch_size < 1) {
        throw InvalidArgument("train_epoch: negatives and batch size must be >= 1");
    }
    std::vector<std::size_t> order(data.queries.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(order));
    const std::size_t n = data.graph.num_entities();

    double loss_sum = 0;
    std::size_t positives_seen = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
        const std::size_t stop = std::min(order.size(), start + batch_size);
        std::vector<BatchItem> items;
        std::size_t positives = 0;
        for (std::size_t k = start; k < stop; ++k) {
            items.push_back(draw_negatives(data.known, n, data.queries[order[k]], negatives, rng));
            positives += data.queries[order[k]].answers.size();
        }
        Tape tape;
        const Var total = batch_loss(tape, model, store, data.graph, items, negatives);
        const double value = total.value()[0];
        if (!std::isfinite(value)) {
            throw NumericError("training loss became non-finite after " + std::to_string(positives_seen) +
                               " positives this epoch; lower the learning rate or check the data");
        }
        tape.backward(total);
        diff::adam_step(store, adam);
        loss_sum += value * static_cast<double>(positives);
        positives_seen += positives;
    }
    return positives_seen == 0 ? 0.0 : loss_sum / static_cast<double>(positives_seen);
}

namespace {

struct SplitView {
    const KnowledgeGraph* facts = nullptr;
    const kg::Vocabulary* entities = nullptr;
    std::span<const Triple> triples;
    std::vector<std::span<const Triple>> filter;
};

SplitView split_view(const kg::DatasetBundle& b, const std::string& split) {
    SplitView v;
    if (split == "test" && b.inductive) {
        const kg::InductiveGraph& g = *b.inductive;
        v.facts = &g.fact_graph;
        v.entities = &g.entities;
        v.triples = g.test;
        v.filter = {g.fact_graph.triples(), g.valid, g.test};
        return v;
    }
    v.facts = &b.fact_graph;
    v.entities = &b.entities;
    if (split == "train") {
        v.triples = b.train;
    } else if (split == "valid") {
        v.triples = b.valid;
    } else if (split == "test") {
        v.triples = b.test;
    } else {
        throw InvalidArgument("unknown split '" + split + "' (train, valid, test)");
    }
    v.filter = {b.fact_graph.triples(), b.train, b.valid, b.test};
    return v;
}

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn fn) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) {
            fn(i);
        }
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex guard;
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < count; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(guard);
                    if (!failure) {
                        failure = std::current_exception();
                    }
                }
            }
        });
    }
    for (auto& th : pool) {
        th.join();
    }
    if (failure) {
        std::rethrow_exception(failure);
    }
}

} // namespace

EvalResult evaluate(const Model& model, ParamStore& store, const kg::DatasetBundle& bundle, const std::string& split,
                    std::size_t threads) {
    const SplitView view = split_view(bundle, split);
    if (view.triples.empty()) {
        throw InvalidArgument("split '" + split + "' is empty");
    }
    const std::size_t r0 = model.base_relations();
    if (bundle.relations.size() != r0) {
        throw CompatibilityError("model expects " + std::to_string(r0) + " relations, dataset has " +
                                 std::to_string(bundle.relations.size()));
    }
    const KnowledgeGraph graph = model.message_graph(*view.facts);
    std::vector<Triple> known;
    for (auto part : view.filter) {
        known.insert(known.end(), part.begin(), part.end());
    }
    const TripleIndex index = query_index({known}, r0);

    EvalResult result;
    result.split = split;
    result.ranks.resize(2 * view.triples.size());
    struct Group {
        EntityId u;
        RelationId q;
        std::vector<std::size_t> slots;
    };
    std::vector<Group> groups;
    std::map<std::pair<EntityId, RelationId>, std::size_t> where;
    for (std::size_t i = 0; i < view.triples.size(); ++i) {
        const Triple& t = view.triples[i];
        graph.check_entity(t.head);
        graph.check_entity(t.tail);
        for (int dir = 0; dir < 2; ++dir) {
            const std::size_t slot = 2 * i + dir;
            result.ranks[slot].triple = t;
            result.ranks[slot].inverse = dir == 1;
            const EntityId u = dir == 0 ? t.head : t.tail;
            const auto q = static_cast<RelationId>(dir == 0 ? t.relation : t.relation + r0);
            auto [it, fresh] = where.emplace(std::make_pair(u, q), groups.size());
            if (fresh) {
                groups.push_back({u, q, {}});
            }
            groups[it->second].slots.push_back(slot);
        }
    }

    model.initialize(store);
    std::map<RelationId, std::vector<Array>> bases;
    const bool per_query = model.engine().baseline_depends_on_query();
    for (const Group& g : groups) {
        const RelationId key = per_query ? g.q : 0;
        if (!bases.count(key)) {
            Tape tape(false);
            std::vector<Array> values;
            for (const Var& v : model.baseline(tape, store, graph, key)) {
                values.push_back(v.value());
            }
            bases.emplace(key, std::move(values));
        }
    }

    parallel_for(groups.size(), threads, [&](std::size_t gi) {
        const Group& g = groups[gi];
        const std::vector<double> scores =
            model.score_all(store, graph, bases.at(per_query ? g.q : 0), g.u, g.q);
        const auto known = index.tails(g.u, g.q);
        for (std::size_t slot : g.slots) {
            QueryRank& r = result.ranks[slot];
            const EntityId target = r.inverse ? r.triple.head : r.triple.tail;
            std::vector<EntityId> filtered;
            for (EntityId e : known) {
                if (e != target) {
                    filtered.push_back(e);
                }
            }
            r.rank = rank_query(scores, target, filtered);
            r.raw_rank = rank_query(scores, target);
        }
    });

    std::vector<double> ranks;
    ranks.reserve(result.ranks.size());
    for (const QueryRank& r : result.ranks) {
        ranks.push_back(r.rank);
    }
    result.metrics = metrics(ranks);
    return result;
}

namespace {

nlohmann::json metrics_json(const Metrics& m) {
    return {{"mr", m.mr}, {"mrr", m.mrr}, {"hits1", m.hits1}, {"hits3", m.hits3}, {"hits10", m.hits10},
            {"num_queries", m.num_queries}};
}

} // namespace

TrainResult train(const TrainConfig& config, const kg::DatasetBundle& bundle, const fs::path& out_dir,
                  const TrainOptions& options) {
    config.validate();
    const Model model = make_model(config, bundle.relations.size());
    ParamStore store(config.seed);
    model.initialize(store);
    const TrainData data = prepare_training(model, bundle);
    Rng rng(config.seed ^ 0x5DEECE66DULL);
    diff::AdamOptions adam;
    adam.learning_rate = config.learning_rate;

    TrainResult result;
    double best = -1.0;
    std::map<std::string, Array> snapshot;
    std::size_t stale = 0;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        EpochRecord rec;
        rec.epoch = epoch;
        rec.loss = train_epoch(model, store, data, adam, config.negatives, config.batch_size, rng);
        rec.valid = evaluate(model, store, bundle, "valid", options.threads).metrics;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.push_back(rec);
        if (options.on_epoch) {
            options.on_epoch(rec);
        }
        // Ties keep the later, longer-trained parameters; only strict gains
        // reset patience.
        const bool improved = rec.valid.mrr > best + 1e-12;
        if (improved || rec.valid.mrr >= best - 1e-12) {
            best = std::max(best, rec.valid.mrr);
            result.best_epoch = epoch;
            result.best_valid = rec.valid;
            snapshot.clear();
            for (const auto& [name, p] : store.parameters()) {
                snapshot.emplace(name, p.value);
            }
        }
        stale = improved ? 0 : stale + 1;
        if (stale >= config.patience) {
            break;
        }
    }
    for (const auto& [name, value] : snapshot) {
        store.at(name).value = value;
    }

    nlohmann::json history = nlohmann::json::array();
    for (const EpochRecord& r : result.history) {
        history.push_back({{"epoch", r.epoch}, {"loss", r.loss}, {"valid", metrics_json(r.valid)},
                           {"seconds", r.seconds}});
    }
    nlohmann::json meta = {{"config", to_json(config)},
                           {"layout", kg::layout_name(bundle.layout)},
                           {"relations", bundle.relations.names()},
                           {"best_epoch", result.best_epoch},
                           {"valid", metrics_json(result.best_valid)},
                           {"history", history}};
    if (bundle.layout != kg::Layout::kInductive) {
        meta["entities"] = bundle.entities.names();
    }
    std::error_code ec;
    fs::create_directories(out_dir, ec);
    result.checkpoint = out_dir / "model.ckpt";
    std::ofstream out(result.checkpoint, std::ios::binary);
    if (!out) {
        throw IoError("cannot write checkpoint '" + result.checkpoint.string() + "'");
    }
    diff::write_checkpoint(out, store, meta);
    out.close();
    if (!out) {
        throw IoError("checkpoint write failed: " + result.checkpoint.string());
    }
    return result;
}

TrainResult train(const TrainConfig& config, const fs::path& out_dir, const TrainOptions& options) {
    if (config.dataset.empty()) {
        throw ConfigError("config names no dataset");
    }
    return train(config, kg::load_dataset(config.dataset, config.layout), out_dir, options);
}

Checkpoint load_checkpoint(const fs::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw IoError("cannot read checkpoint '" + file.string() + "'");
    }
    Checkpoint c;
    c.meta = diff::read_checkpoint(in, c.store);
    if (!c.meta.contains("config") || !c.meta.contains("relations")) {
        throw ParseError("checkpoint '" + file.string() + "' carries no model metadata");
    }
    c.config = train_config_from_json(c.meta.at("config"));
    return c;
}

void check_compatible(const nlohmann::json& meta, const kg::DatasetBundle& bundle) {
    auto compare = [](const std::vector<std::string>& want, const std::vector<std::string>& got, const char* what) {
        if (want.size() != got.size()) {
            throw CompatibilityError(std::string(what) + " vocabulary size differs: checkpoint " +
                                     std::to_string(want.size()) + ", dataset " + std::to_string(got.size()));
        }
        for (std::size_t i = 0; i < want.size(); ++i) {
            if (want[i] != got[i]) {
                throw CompatibilityError(std::string(what) + " " + std::to_string(i) + " is '" + got[i] +
                                         "' in the dataset but '" + want[i] + "' in the checkpoint");
            }
        }
    };
    compare(meta.at("relations").get<std::vector<std::string>>(), bundle.relations.names(), "relation");
    if (bundle.layout != kg::Layout::kInductive && meta.contains("entities")) {
        compare(meta.at("entities").get<std::vector<std::string>>(), bundle.entities.names(), "entity");
    }
}

EvalResult evaluate_checkpoint(const fs::path& file, const kg::DatasetBundle& bundle, const std::string& split,
                               std::size_t threads) {
    Checkpoint c = load_checkpoint(file);
    check_compatible(c.meta, bundle);
    const Model model = make_model(c.config, bundle.relations.size());
    return evaluate(model, c.store, bundle, split, threads);
}

void write_ranks(const fs::path& file, const EvalResult& result, const kg::DatasetBundle& bundle) {
    const SplitView view = split_view(bundle, result.split);
    std::ofstream out(file);
    if (!out) {
        throw IoError("cannot write ranks file '" + file.string() + "'");
    }
    for (const QueryRank& r : result.ranks) {
        out << view.entities->name(r.triple.head) << '\t' << bundle.relations.name(r.triple.relation) << '\t'
            << view.entities->name(r.triple.tail) << '\t' << (r.inverse ? "head" : "tail") << '\t' << r.rank
            << '\n';
    }
    if (!out) {
        throw IoError("write failed: " + file.string());
    }
}

} // namespace pngnn::train
