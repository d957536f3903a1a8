#include "pngnn/pngnn.h"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

// Owns a string returned by the library.
struct Owned {
    char* p = nullptr;
    ~Owned() { pngnn_string_free(p); }
    std::string str() const { return p ? p : ""; }
};

int fail(pngnn_status s) {
    std::cerr << "error: " << pngnn_status_name(s) << ": " << pngnn_last_error() << '\n';
    return kFailure;
}

bool write_text(const std::string& file, const std::string& text) {
    std::ofstream out(file);
    out << text << '\n';
    if (!out) {
        std::cerr << "error: cannot write '" << file << "'\n";
        return false;
    }
    return true;
}

// key=value; the value is read as JSON when it parses, else as a string.
std::optional<nlohmann::json> parse_overrides(const std::vector<std::string>& items, const std::string& file) {
    nlohmann::json j = nlohmann::json::object();
    if (!file.empty()) {
        std::ifstream in(file);
        if (!in) {
            std::cerr << "error: cannot open '" << file << "'\n";
            return std::nullopt;
        }
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error& e) {
            std::cerr << "error: " << file << ": " << e.what() << '\n';
            return std::nullopt;
        }
    }
    for (const auto& item : items) {
        const auto eq = item.find('=');
        const std::string key = item.substr(0, eq);
        const std::string text = item.substr(eq + 1);
        try {
            j[key] = nlohmann::json::parse(text);
        } catch (const nlohmann::json::parse_error&) {
            j[key] = text;
        }
    }
    return j;
}

struct GenSynth {
    std::string structure, out, overrides_file;
    std::uint64_t seed = 0;
    std::vector<std::string> set;
};

struct FormulaArgs {
    std::string formula, kg, weights, dump;
    bool verify = false;
};

struct TrainArgs {
    std::string config, data, out;
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;
};

struct EvalArgs {
    std::string checkpoint, data, layout, split = "test", ranks;
    unsigned threads = 1;
};

struct SuiteArgs {
    std::uint64_t seed = 0;
    bool inverse = false;
    std::string aggregator = "all", out;
    std::size_t draws = 50, fuzz = 200;
};

int run_gen_synth(const GenSynth& a) {
    const auto overrides = parse_overrides(a.set, a.overrides_file);
    if (!overrides) {
        return kFailure;
    }
    Owned report;
    int ok = 0;
    const std::string text = overrides->dump();
    if (auto s = pngnn_synth_generate(a.structure.c_str(), a.seed, text.c_str(), a.out.c_str(), &report.p, &ok)) {
        return fail(s);
    }
    std::cout << report.str() << '\n';
    if (!ok) {
        std::cerr << "error: dataset audit failed\n";
        return kFailure;
    }
    return kOk;
}

int run_check(const FormulaArgs& a) {
    Owned out;
    if (auto s = pngnn_check(a.formula.c_str(), a.kg.c_str(), &out.p)) {
        return fail(s);
    }
    std::cout << out.str() << '\n';
    return kOk;
}

int run_compile(const FormulaArgs& a) {
    if (!a.dump.empty()) {
        Owned w;
        if (auto s = pngnn_compile_weights(a.formula.c_str(), a.kg.c_str(), &w.p)) {
            return fail(s);
        }
        if (!write_text(a.dump, w.str())) {
            return kFailure;
        }
    }
    Owned out;
    if (auto s = pngnn_compile(a.formula.c_str(), a.kg.c_str(), a.weights.empty() ? nullptr : a.weights.c_str(),
                               a.verify ? 1 : 0, &out.p)) {
        return fail(s);
    }
    const auto rep = nlohmann::json::parse(out.str());
    const std::size_t n = rep.at("entities").get<std::size_t>();
    for (const auto& slot : rep.at("slots")) {
        std::cout << "slot " << slot.at("slot").get<std::size_t>() << '\t' << slot.at("formula").get<std::string>();
        if (slot.contains("agree")) {
            std::cout << "\tagree " << slot.at("agree").get<std::size_t>() << '/' << n;
        }
        std::cout << '\n';
    }
    nlohmann::ordered_json summary;
    summary["summary"] = "compile";
    summary["formula"] = rep.at("formula");
    summary["slots"] = rep.at("slots").size();
    summary["layers"] = rep.at("layers");
    summary["entities"] = n;
    summary["replayed"] = rep.at("replayed");
    if (!a.verify) {
        std::cout << summary.dump() << '\n';
        return kOk;
    }
    const bool passed = rep.at("passed").get<bool>();
    summary["passed"] = passed;
    std::cout << (passed ? "PASS" : "FAIL") << '\n' << summary.dump() << '\n';
    return passed ? kOk : kFailure;
}

void print_epoch(const char* record, void*) {
    std::cout << record << '\n' << std::flush;
}

int run_train(const TrainArgs& a) {
    Owned out;
    const std::uint64_t seed = a.seed.value_or(0);
    if (auto s = pngnn_train(a.config.c_str(), a.data.empty() ? nullptr : a.data.c_str(), a.out.c_str(),
                             a.seed ? &seed : nullptr, a.threads, print_epoch, nullptr, &out.p)) {
        return fail(s);
    }
    std::cout << out.str() << '\n';
    return kOk;
}

int run_eval(const EvalArgs& a) {
    pngnn_model* model = nullptr;
    if (auto s = pngnn_model_load(a.checkpoint.c_str(), &model)) {
        return fail(s);
    }
    pngnn_dataset* ds = nullptr;
    pngnn_status s = PNGNN_OK;
    if (a.data.empty()) {
        s = pngnn_model_dataset(model, &ds);
    } else {
        std::string layout = a.layout;
        if (layout.empty()) {
            Owned info;
            s = pngnn_model_info(model, &info.p);
            if (s == PNGNN_OK) {
                layout = nlohmann::json::parse(info.str()).at("config").value("layout", "transductive");
            }
        }
        if (s == PNGNN_OK) {
            s = pngnn_dataset_load(a.data.c_str(), layout.c_str(), &ds);
        }
    }
    Owned metrics;
    if (s == PNGNN_OK) {
        s = pngnn_model_evaluate(model, ds, a.split.c_str(), a.threads, a.ranks.empty() ? nullptr : a.ranks.c_str(),
                                 &metrics.p);
    }
    pngnn_dataset_free(ds);
    pngnn_model_free(model);
    if (s != PNGNN_OK) {
        return fail(s);
    }
    std::cout << metrics.str() << '\n';
    return kOk;
}

int run_suite(const SuiteArgs& a) {
    nlohmann::json opts;
    opts["seed"] = a.seed;
    opts["inverse"] = a.inverse;
    opts["aggregator"] = a.aggregator;
    opts["draws"] = a.draws;
    opts["fuzz_trials"] = a.fuzz;
    Owned out;
    int passed = 0;
    if (auto s = pngnn_expressivity_suite(opts.dump().c_str(), &out.p, &passed)) {
        return fail(s);
    }
    const auto rep = nlohmann::ordered_json::parse(out.str());
    for (const auto& c : rep.at("checks")) {
        std::cout << c.dump() << '\n';
    }
    std::cout << rep.at("summary").dump() << '\n';
    if (!a.out.empty() && !write_text(a.out, rep.dump(1))) {
        return kFailure;
    }
    return passed ? kOk : kFailure;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Knowledge-graph link prediction with path-neighbor GNNs and a logic-to-weights verifier", "pngnn"};
    app.require_subcommand(1);
    app.set_version_flag("--version", pngnn_version());

    GenSynth gen;
    auto* g = app.add_subcommand("gen-synth", "Generate and audit a synthetic rule-structure dataset");
    g->add_option("--structure", gen.structure, "Rule structure")
        ->required()
        ->check(CLI::IsMember({"C3", "C4", "I1", "I2", "T", "U", "T_label", "U_label"}));
    g->add_option("--out", gen.out, "Output dataset directory")->required();
    g->add_option("--seed", gen.seed, "Random seed")->capture_default_str();
    g->add_option("--set", gen.set, "Generator override key=value (repeatable)")
        ->check([](const std::string& s) { return s.find('=') == std::string::npos ? "expected key=value" : ""; });
    g->add_option("--overrides", gen.overrides_file, "JSON file of generator overrides");

    FormulaArgs fa;
    auto* ch = app.add_subcommand("check", "Model-check a formula at every entity of a graph");
    ch->add_option("--formula", fa.formula, "Formula JSON file")->required();
    ch->add_option("--kg", fa.kg, "Triple file or dataset directory")->required();

    auto* co = app.add_subcommand("compile", "Compile a formula into discrete GNN weights");
    co->add_option("--formula", fa.formula, "Formula JSON file")->required();
    co->add_option("--kg", fa.kg, "Triple file or dataset directory")->required();
    co->add_flag("--verify", fa.verify, "Compare every slot with the model checker; exit 1 on mismatch");
    co->add_option("--dump-weights", fa.dump, "Write the compiled weights as JSON");
    co->add_option("--weights", fa.weights, "Replay weights from a JSON dump");

    TrainArgs ta;
    auto* tr = app.add_subcommand("train", "Train a model and keep the best validation checkpoint");
    tr->add_option("--config", ta.config, "Training config JSON")->required();
    tr->add_option("--data", ta.data, "Dataset directory (overrides the config)");
    tr->add_option("--out", ta.out, "Output directory for model.ckpt")->required();
    tr->add_option("--seed", ta.seed, "Random seed (overrides the config)");
    tr->add_option("--threads", ta.threads, "Evaluation workers")->capture_default_str()->check(CLI::Range(1u, 256u));

    EvalArgs ea;
    auto* ev = app.add_subcommand("eval", "Filtered ranking metrics of a checkpoint");
    ev->add_option("--checkpoint", ea.checkpoint, "Checkpoint file")->required();
    ev->add_option("--data", ea.data, "Dataset directory (default: the one used for training)");
    ev->add_option("--layout", ea.layout, "Dataset layout for --data")
        ->check(CLI::IsMember({"transductive", "inductive", "synthetic"}));
    ev->add_option("--split", ea.split, "Split to rank")->capture_default_str()->check(CLI::IsMember({"valid", "test"}));
    ev->add_option("--threads", ea.threads, "Evaluation workers")->capture_default_str()->check(CLI::Range(1u, 256u));
    ev->add_option("--ranks", ea.ranks, "Write per-query ranks to this file");

    SuiteArgs sa;
    auto* su = app.add_subcommand("expressivity-suite", "Run the built-in expressivity checks");
    su->add_option("--seed", sa.seed, "Random seed")->capture_default_str();
    su->add_flag("--inverse", sa.inverse, "Force inverse-edge augmentation");
    su->add_option("--aggregator", sa.aggregator, "C-GNN aggregator")
        ->capture_default_str()
        ->check(CLI::IsMember({"all", "sum", "mean", "max", "pna"}));
    su->add_option("--draws", sa.draws, "Random parameter draws per aggregator")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    su->add_option("--fuzz-trials", sa.fuzz, "Random compiler instances")->capture_default_str();
    su->add_option("--out", sa.out, "Write the full JSON report here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        std::cerr << sub->help();
        return kUsage;
    }

    if (g->parsed()) {
        return run_gen_synth(gen);
    }
    if (ch->parsed()) {
        return run_check(fa);
    }
    if (co->parsed()) {
        return run_compile(fa);
    }
    if (tr->parsed()) {
        return run_train(ta);
    }
    if (ev->parsed()) {
        return run_eval(ea);
    }
    return run_suite(sa);
}
