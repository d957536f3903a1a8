#pragma once

#include "pngnn/diff/params.hpp"
#include "pngnn/kg/dataset.hpp"
#include "pngnn/train/model.hpp"
#include "pngnn/train/ranking.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace pngnn::train {

struct TrainConfig {
    ModelKind model = ModelKind::kPngnn;
    cgnn::CgnnConfig cgnn;
    pn::PnConfig pn;
    std::size_t negatives = 32;   // per positive
    std::size_t batch_size = 32;  // queries per optimizer step
    double learning_rate = 0.005;
    std::size_t epochs = 50;
    std::size_t patience = 10;
    std::uint64_t seed = 0;
    std::string dataset;
    kg::Layout layout = kg::Layout::kSynthetic;
    bool inverse_augmentation = true;

    // ConfigError unless n >= 1, batch >= 1, lr > 0, epochs >= 1.
    void validate() const;
};

// Sections: model, dataset, layout, cgnn, pn, train. Unknown keys are a
// ConfigError; missing keys keep their defaults.
nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
TrainConfig read_train_config(const std::filesystem::path& file);

Model make_model(const TrainConfig& c, std::size_t base_relations);

// One (u, q) query with every supervised answer; q >= R0 asks for heads.
struct Query {
    EntityId source = 0;
    RelationId relation = 0;
    std::vector<EntityId> answers;
};

// Groups triples into tail queries (h, r, ?) and head queries (t, r + R0, ?),
// in first-appearance order.
std::vector<Query> make_queries(std::span<const Triple> triples, std::size_t base_relations);

// Known-true index over `triples` and their inverse copies (t, r + R0, h).
TripleIndex query_index(std::initializer_list<std::span<const Triple>> parts, std::size_t base_relations);

struct TrainData {
    KnowledgeGraph graph;      // message-passing graph
    TripleIndex known;         // facts and train, both directions
    std::vector<Query> queries;
};

TrainData prepare_training(const Model& model, const kg::DatasetBundle& bundle);

// A query with its tail corruptions, `negatives` per answer in answer order.
struct BatchItem {
    const Query* query = nullptr;
    std::vector<EntityId> negatives;
};

BatchItem draw_negatives(const TripleIndex& known, std::size_t num_entities, const Query& query,
                         std::size_t negatives, Rng& rng);

// (sum softplus(-pos) + sum softplus(neg) / negatives) / positives over the
// batch, with each query's supervised edges left out of message passing.
Var batch_loss(Tape& tape, const Model& model, ParamStore& store, const KnowledgeGraph& graph,
               std::span<const BatchItem> items, std::size_t negatives);

// One shuffled pass over data.queries; returns the mean loss per positive.
// NumericError when the loss turns non-finite.
double train_epoch(const Model& model, ParamStore& store, const TrainData& data, const diff::AdamOptions& adam,
                   std::size_t negatives, std::size_t batch_size, Rng& rng);

struct QueryRank {
    Triple triple;        // as listed in the split
    bool inverse = false; // ranks the head
    double rank = 0;      // filtered
    double raw_rank = 0;
};

struct EvalResult {
    std::string split;
    Metrics metrics;
    std::vector<QueryRank> ranks; // two per triple: tail then head
};

// Filtered ranking in both directions over every entity of the split's
// graph. Filter sets hold facts and all splits. Deterministic for any
// thread count.
EvalResult evaluate(const Model& model, ParamStore& store, const kg::DatasetBundle& bundle, const std::string& split,
                    std::size_t threads = 1);

struct EpochRecord {
    std::size_t epoch = 0;
    double loss = 0;
    Metrics valid;
    double seconds = 0;
};

struct TrainResult {
    std::filesystem::path checkpoint;
    std::size_t best_epoch = 0;
    Metrics best_valid;
    std::vector<EpochRecord> history;
};

struct TrainOptions {
    std::size_t threads = 1; // validation workers
    std::function<void(const EpochRecord&)> on_epoch;
};

// Trains, keeps the best validation-MRR parameters and writes
// `out_dir/model.ckpt` with the config embedded.
TrainResult train(const TrainConfig& config, const kg::DatasetBundle& bundle, const std::filesystem::path& out_dir,
                  const TrainOptions& options = {});
// Loads config.dataset with config.layout first.
TrainResult train(const TrainConfig& config, const std::filesystem::path& out_dir, const TrainOptions& options = {});

struct Checkpoint {
    TrainConfig config;
    ParamStore store;
    nlohmann::json meta;
};

Checkpoint load_checkpoint(const std::filesystem::path& file);
// CompatibilityError when relation (and, outside the inductive layout,
// entity) vocabularies differ from the ones recorded at training time.
void check_compatible(const nlohmann::json& meta, const kg::DatasetBundle& bundle);
EvalResult evaluate_checkpoint(const std::filesystem::path& file, const kg::DatasetBundle& bundle,
                               const std::string& split, std::size_t threads = 1);

// One line per query: head, relation, tail, direction, rank.
void write_ranks(const std::filesystem::path& file, const EvalResult& result, const kg::DatasetBundle& bundle);

} // namespace pngnn::train
