#include "pngnn/pngnn.h"

#include "pngnn/error.hpp"
#include "pngnn/kg/dataset.hpp"
#include "pngnn/logic/compiler.hpp"
#include "pngnn/suite/expressivity.hpp"
#include "pngnn/synth/generator.hpp"
#include "pngnn/train/trainer.hpp"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <string>

namespace fs = std::filesystem;
using namespace pngnn;

struct pngnn_dataset {
    kg::DatasetBundle bundle;
};

struct pngnn_model {
    fs::path path;
    train::Checkpoint checkpoint;
};

namespace {

thread_local std::string g_last_error;

char* copy_out(const std::string& s) {
    char* p = static_cast<char*>(std::malloc(s.size() + 1));
    if (p == nullptr) {
        throw std::bad_alloc();
    }
    std::memcpy(p, s.c_str(), s.size() + 1);
    return p;
}

template <class F>
pngnn_status guarded(F&& body) {
    try {
        body();
        g_last_error.clear();
        return PNGNN_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return static_cast<pngnn_status>(e.code());
    } catch (const nlohmann::json::parse_error& e) {
        g_last_error = e.what();
        return PNGNN_ERR_PARSE;
    } catch (const nlohmann::json::exception& e) {
        g_last_error = e.what();
        return PNGNN_ERR_PARSE;
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return PNGNN_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return PNGNN_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown failure";
        return PNGNN_ERR_INTERNAL;
    }
}

void require(const void* p, const char* what) {
    if (p == nullptr) {
        throw InvalidArgument(std::string(what) + " must not be NULL");
    }
}

nlohmann::json read_json_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw IoError("cannot open '" + file.string() + "'");
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(file.string() + ": " + e.what());
    }
}

// Relation fields may name a relation instead of giving its index.
void resolve_relations(nlohmann::json& node, const kg::Vocabulary& relations) {
    if (!node.is_object()) {
        return;
    }
    if (auto it = node.find("rel"); it != node.end() && it->is_string()) {
        const auto id = relations.find(it->get<std::string>());
        if (!id) {
            throw SignatureError("formula names unknown relation '" + it->get<std::string>() + "'");
        }
        *it = *id;
    }
    for (const char* child : {"body", "left", "right"}) {
        if (auto it = node.find(child); it != node.end()) {
            resolve_relations(*it, relations);
        }
    }
}

std::uint32_t predicate_bound(const logic::Formula& f) {
    std::uint32_t n = f.kind == logic::Kind::kPred ? f.pred + 1 : 0;
    for (const auto& c : {f.left, f.right}) {
        if (c) {
            n = std::max(n, predicate_bound(*c));
        }
    }
    return n;
}

struct FormulaInput {
    kg::NamedGraph graph;
    logic::FormulaPtr formula;
    logic::Valuation valuation;
    logic::Signature signature;
};

// A formula file holds a bare formula tree or {"formula": ..., "valuation":
// {"<pred>": [entity, ...]}} with entities given by name or index.
FormulaInput read_formula_input(const char* formula_path, const char* kg_path) {
    require(formula_path, "formula path");
    require(kg_path, "graph path");
    FormulaInput in;
    in.graph = kg::load_graph(kg_path);
    nlohmann::json doc = read_json_file(formula_path);
    nlohmann::json tree = doc.is_object() && doc.contains("formula") ? doc.at("formula") : doc;
    resolve_relations(tree, in.graph.relations);
    in.formula = logic::formula_from_json(tree);
    std::uint32_t preds = predicate_bound(*in.formula);
    if (doc.is_object() && doc.contains("valuation")) {
        for (const auto& [key, members] : doc.at("valuation").items()) {
            std::uint32_t p = 0;
            try {
                p = static_cast<std::uint32_t>(std::stoul(key));
            } catch (const std::exception&) {
                throw ParseError(std::string(formula_path) + ": valuation key '" + key + "' is not an index");
            }
            std::vector<kg::EntityId> ids;
            for (const auto& m : members) {
                if (m.is_string()) {
                    const auto id = in.graph.entities.find(m.get<std::string>());
                    if (!id) {
                        throw SignatureError("valuation names unknown entity '" + m.get<std::string>() + "'");
                    }
                    ids.push_back(*id);
                } else {
                    const auto id = m.get<std::uint64_t>();
                    if (id >= in.graph.graph.num_entities()) {
                        throw RangeError("valuation entity " + std::to_string(id) + " out of range");
                    }
                    ids.push_back(static_cast<kg::EntityId>(id));
                }
            }
            in.valuation.set(p, std::move(ids));
            preds = std::max(preds, p + 1);
        }
    }
    in.signature = {preds, in.graph.graph.num_relations()};
    logic::validate(*in.formula, in.signature);
    return in;
}

nlohmann::ordered_json metrics_json(const train::Metrics& m, const std::string& split) {
    return train::to_json(m, split);
}

} // namespace

extern "C" {

const char* pngnn_version(void) {
    return "0.1.0";
}

const char* pngnn_status_name(pngnn_status status) {
    switch (status) {
    case PNGNN_OK: return "ok";
    case PNGNN_ERR_INVALID_ARGUMENT: return "invalid argument";
    case PNGNN_ERR_IO: return "i/o error";
    case PNGNN_ERR_PARSE: return "parse error";
    case PNGNN_ERR_VALIDATION: return "validation error";
    case PNGNN_ERR_RANGE: return "range error";
    case PNGNN_ERR_SHAPE: return "shape error";
    case PNGNN_ERR_STATE: return "state error";
    case PNGNN_ERR_UNSUPPORTED: return "unsupported";
    case PNGNN_ERR_COMPATIBILITY: return "compatibility error";
    case PNGNN_ERR_CONFIG: return "config error";
    case PNGNN_ERR_SIGNATURE: return "signature error";
    case PNGNN_ERR_SAMPLING: return "sampling error";
    case PNGNN_ERR_VERIFICATION: return "verification error";
    case PNGNN_ERR_NUMERIC: return "numeric error";
    case PNGNN_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* pngnn_last_error(void) {
    return g_last_error.c_str();
}

void pngnn_string_free(char* s) {
    std::free(s);
}

pngnn_status pngnn_dataset_load(const char* dir, const char* layout, pngnn_dataset** out) {
    return guarded([&] {
        require(dir, "dir");
        require(out, "out");
        *out = nullptr;
        auto ds = std::make_unique<pngnn_dataset>();
        ds->bundle = kg::load_dataset(dir, kg::parse_layout(layout ? layout : "transductive"));
        *out = ds.release();
    });
}

pngnn_status pngnn_dataset_info(const pngnn_dataset* ds, char** json_out) {
    return guarded([&] {
        require(ds, "dataset");
        require(json_out, "json_out");
        const auto& b = ds->bundle;
        nlohmann::ordered_json j;
        j["layout"] = kg::layout_name(b.layout);
        j["entities"] = b.entities.size();
        j["relations"] = b.relations.size();
        j["facts"] = b.fact_graph.triples().size();
        j["train"] = b.train.size();
        j["valid"] = b.valid.size();
        j["test"] = b.test.size();
        if (b.inductive) {
            j["inductive_entities"] = b.inductive->entities.size();
            j["inductive_facts"] = b.inductive->fact_graph.triples().size();
            j["inductive_valid"] = b.inductive->valid.size();
            j["inductive_test"] = b.inductive->test.size();
        }
        *json_out = copy_out(j.dump());
    });
}

void pngnn_dataset_free(pngnn_dataset* ds) {
    delete ds;
}

pngnn_status pngnn_synth_generate(const char* structure, uint64_t seed, const char* overrides_json,
                                  const char* out_dir, char** audit_json_out, int* audit_ok) {
    return guarded([&] {
        require(structure, "structure");
        require(out_dir, "out_dir");
        const auto s = synth::parse_structure(structure);
        synth::SynthConfig c = synth::default_config(s);
        if (overrides_json != nullptr && *overrides_json != '\0') {
            c = synth::apply_overrides(c, nlohmann::json::parse(overrides_json));
        }
        c.seed = seed;
        c.validate();
        const synth::SynthDataset data = synth::generate(c);
        const synth::AuditReport report = synth::audit(data);
        synth::write_synth(data, report, out_dir);
        if (audit_ok != nullptr) {
            *audit_ok = report.ok() ? 1 : 0;
        }
        if (audit_json_out != nullptr) {
            nlohmann::ordered_json j;
            j["structure"] = synth::structure_name(s);
            j["seed"] = seed;
            j["out"] = out_dir;
            j["entities"] = data.bundle.entities.size();
            j["facts"] = data.bundle.fact_graph.triples().size();
            j["train"] = data.bundle.train.size();
            j["valid"] = data.bundle.valid.size();
            j["test"] = data.bundle.test.size();
            j["audit"] = synth::to_json(report);
            j["audit_ok"] = report.ok();
            *audit_json_out = copy_out(j.dump());
        }
    });
}

pngnn_status pngnn_check(const char* formula_path, const char* kg_path, char** json_out) {
    return guarded([&] {
        require(json_out, "json_out");
        const FormulaInput in = read_formula_input(formula_path, kg_path);
        const auto bits = logic::check_all(in.graph.graph, *in.formula, in.valuation);
        nlohmann::ordered_json j;
        j["formula"] = logic::to_string(*in.formula);
        j["entities"] = bits.size();
        std::vector<std::string> holds;
        for (std::size_t v = 0; v < bits.size(); ++v) {
            if (bits[v]) {
                holds.push_back(in.graph.entities.name(static_cast<std::uint32_t>(v)));
            }
        }
        j["satisfied"] = holds.size();
        j["holds"] = holds;
        *json_out = copy_out(j.dump());
    });
}

pngnn_status pngnn_compile(const char* formula_path, const char* kg_path, const char* weights_path, int verify,
                           char** json_out) {
    return guarded([&] {
        require(json_out, "json_out");
        const FormulaInput in = read_formula_input(formula_path, kg_path);
        logic::CompiledGnn g = logic::compile(in.formula, in.signature);
        if (weights_path != nullptr) {
            g = logic::compiled_with_weights(g, read_json_file(weights_path));
        }
        nlohmann::ordered_json j;
        j["formula"] = logic::to_string(*in.formula);
        j["layers"] = g.layers;
        j["entities"] = in.graph.graph.num_entities();
        j["replayed"] = weights_path != nullptr;
        nlohmann::ordered_json slots = nlohmann::ordered_json::array();
        std::optional<logic::VerifyReport> rep;
        if (verify) {
            rep = logic::verify_compiled(g, in.graph.graph, in.valuation);
        }
        for (std::size_t l = 0; l < g.width(); ++l) {
            nlohmann::ordered_json s;
            s["slot"] = l;
            s["formula"] = logic::to_string(*g.index.slots[l]);
            if (rep) {
                s["agree"] = rep->agree[l];
            }
            slots.push_back(s);
        }
        j["slots"] = slots;
        j["verified"] = rep.has_value();
        if (rep) {
            j["passed"] = rep->passed;
        }
        *json_out = copy_out(j.dump());
    });
}

pngnn_status pngnn_compile_weights(const char* formula_path, const char* kg_path, char** json_out) {
    return guarded([&] {
        require(json_out, "json_out");
        const FormulaInput in = read_formula_input(formula_path, kg_path);
        *json_out = copy_out(logic::compiled_to_json(logic::compile(in.formula, in.signature)).dump());
    });
}

pngnn_status pngnn_train(const char* config_path, const char* data_dir, const char* out_dir, const uint64_t* seed,
                         unsigned threads, pngnn_epoch_callback callback, void* user, char** result_json_out) {
    return guarded([&] {
        require(config_path, "config_path");
        require(out_dir, "out_dir");
        train::TrainConfig c = train::read_train_config(config_path);
        if (data_dir != nullptr) {
            c.dataset = fs::absolute(data_dir).string();
        }
        if (seed != nullptr) {
            c.seed = *seed;
        }
        train::TrainOptions opts;
        opts.threads = threads == 0 ? 1 : threads;
        if (callback != nullptr) {
            opts.on_epoch = [&](const train::EpochRecord& r) {
                nlohmann::ordered_json j;
                j["epoch"] = r.epoch;
                j["loss"] = r.loss;
                j["valid"] = metrics_json(r.valid, "valid");
                j["seconds"] = r.seconds;
                callback(j.dump().c_str(), user);
            };
        }
        const train::TrainResult res = train::train(c, out_dir, opts);
        if (result_json_out != nullptr) {
            nlohmann::ordered_json j;
            j["checkpoint"] = res.checkpoint.string();
            j["model"] = train::model_name(c.model);
            j["seed"] = c.seed;
            j["epochs_run"] = res.history.size();
            j["best_epoch"] = res.best_epoch;
            j["best_valid"] = metrics_json(res.best_valid, "valid");
            *result_json_out = copy_out(j.dump());
        }
    });
}

pngnn_status pngnn_model_load(const char* checkpoint_path, pngnn_model** out) {
    return guarded([&] {
        require(checkpoint_path, "checkpoint_path");
        require(out, "out");
        *out = nullptr;
        auto m = std::make_unique<pngnn_model>();
        m->path = checkpoint_path;
        m->checkpoint = train::load_checkpoint(checkpoint_path);
        *out = m.release();
    });
}

pngnn_status pngnn_model_info(const pngnn_model* model, char** json_out) {
    return guarded([&] {
        require(model, "model");
        require(json_out, "json_out");
        nlohmann::json j = model->checkpoint.meta;
        j.erase("entities");
        j["checkpoint"] = model->path.string();
        *json_out = copy_out(j.dump());
    });
}

pngnn_status pngnn_model_dataset(const pngnn_model* model, pngnn_dataset** out) {
    return guarded([&] {
        require(model, "model");
        require(out, "out");
        *out = nullptr;
        const auto& c = model->checkpoint.config;
        if (c.dataset.empty()) {
            throw ConfigError("checkpoint config names no dataset");
        }
        auto ds = std::make_unique<pngnn_dataset>();
        ds->bundle = kg::load_dataset(c.dataset, c.layout);
        *out = ds.release();
    });
}

pngnn_status pngnn_model_evaluate(pngnn_model* model, const pngnn_dataset* ds, const char* split, unsigned threads,
                                  const char* ranks_path, char** metrics_json_out) {
    return guarded([&] {
        require(model, "model");
        require(ds, "dataset");
        require(split, "split");
        train::check_compatible(model->checkpoint.meta, ds->bundle);
        const train::Model m = train::make_model(model->checkpoint.config, ds->bundle.relations.size());
        const train::EvalResult r =
            train::evaluate(m, model->checkpoint.store, ds->bundle, split, threads == 0 ? 1 : threads);
        if (ranks_path != nullptr) {
            train::write_ranks(ranks_path, r, ds->bundle);
        }
        if (metrics_json_out != nullptr) {
            *metrics_json_out = copy_out(metrics_json(r.metrics, r.split).dump());
        }
    });
}

void pngnn_model_free(pngnn_model* model) {
    delete model;
}

pngnn_status pngnn_expressivity_suite(const char* options_json, char** json_out, int* all_passed) {
    return guarded([&] {
        require(json_out, "json_out");
        nlohmann::json opts;
        if (options_json != nullptr && *options_json != '\0') {
            opts = nlohmann::json::parse(options_json);
        }
        const suite::SuiteOptions o = suite::suite_options_from_json(opts);
        const suite::SuiteReport rep = suite::run_suite(o);
        nlohmann::ordered_json j;
        j["checks"] = nlohmann::ordered_json::array();
        for (const auto& c : rep.checks) {
            j["checks"].push_back(suite::to_json(c));
        }
        j["summary"] = suite::summary_json(rep);
        j["summary"]["seed"] = o.seed;
        if (all_passed != nullptr) {
            *all_passed = rep.passed() ? 1 : 0;
        }
        *json_out = copy_out(j.dump());
    });
}

} // extern "C"
