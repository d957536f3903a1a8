#include "pngnn/kg/dataset.hpp"

#include "pngnn/error.hpp"

#include <fstream>
#include <sstream>

namespace pngnn::kg {
namespace fs = std::filesystem;

Layout parse_layout(std::string_view name) {
    if (name == "transductive") {
        return Layout::kTransductive;
    }
    if (name == "inductive") {
        return Layout::kInductive;
    }
    if (name == "synthetic") {
        return Layout::kSynthetic;
    }
    throw ConfigError("unknown dataset layout '" + std::string(name) + "'");
}

const char* layout_name(Layout layout) {
    switch (layout) {
    case Layout::kTransductive:
        return "transductive";
    case Layout::kInductive:
        return "inductive";
    case Layout::kSynthetic:
        return "synthetic";
    }
    return "?";
}

std::uint32_t Vocabulary::intern(std::string_view name) {
    auto it = index_.find(std::string(name));
    if (it != index_.end()) {
        return it->second;
    }
    const auto id = static_cast<std::uint32_t>(names_.size());
    names_.emplace_back(name);
    index_.emplace(names_.back(), id);
    return id;
}

std::optional<std::uint32_t> Vocabulary::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

namespace {

struct RawTriple {
    std::string head, relation, tail;
};

std::vector<RawTriple> read_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) {
        throw IoError("cannot open dataset file '" + file.string() + "'");
    }
    std::vector<RawTriple> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line.empty()) {
            continue;
        }
        std::vector<std::string> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t tab = line.find('\t', start);
            fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
            if (tab == std::string::npos) {
                break;
            }
            start = tab + 1;
        }
        if (fields.size() != 3 || fields[0].empty() || fields[1].empty() || fields[2].empty()) {
            throw ParseError(file.string() + ":" + std::to_string(line_no) +
                             ": expected 'head<TAB>relation<TAB>tail'");
        }
        out.push_back({std::move(fields[0]), std::move(fields[1]), std::move(fields[2])});
    }
    return out;
}

fs::path require(const fs::path& dir, const char* name) {
    fs::path p = dir / name;
    if (!fs::exists(p)) {
        throw IoError("missing dataset file '" + p.string() + "'");
    }
    return p;
}

std::vector<Triple> intern_all(const std::vector<RawTriple>& raw, Vocabulary& entities, Vocabulary& relations) {
    std::vector<Triple> out;
    out.reserve(raw.size());
    for (const RawTriple& r : raw) {
        const EntityId h = entities.intern(r.head);
        const RelationId rel = relations.intern(r.relation);
        const EntityId t = entities.intern(r.tail);
        out.push_back({h, rel, t});
    }
    return out;
}

// Supervision triples whose entities never occur in the graph or training
// split cannot be ranked meaningfully in the transductive setting.
void require_known(const std::vector<RawTriple>& raw, const Vocabulary& known, const fs::path& file) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
        for (const std::string* name : {&raw[i].head, &raw[i].tail}) {
            if (!known.find(*name)) {
                throw ValidationError(file.string() + ": triple " + std::to_string(i + 1) +
                                      " references unknown entity '" + *name + "'");
            }
        }
    }
}

struct GraphFiles {
    std::vector<RawTriple> facts;
    bool has_facts = false;
    std::vector<RawTriple> train, valid, test;
};

} // namespace

NamedGraph load_graph(const fs::path& path) {
    fs::path file = path;
    if (fs::is_directory(path)) {
        file = fs::exists(path / "facts.txt") ? path / "facts.txt" : require(path, "train.txt");
    } else if (!fs::exists(path)) {
        throw IoError("graph path '" + path.string() + "' does not exist");
    }
    NamedGraph out;
    auto triples = intern_all(read_file(file), out.entities, out.relations);
    out.graph = KnowledgeGraph(out.entities.size(), out.relations.size(), std::move(triples));
    return out;
}

DatasetBundle load_dataset(const fs::path& dir, Layout layout) {
    if (!fs::is_directory(dir)) {
        throw IoError("dataset directory '" + dir.string() + "' does not exist");
    }
    DatasetBundle bundle;
    bundle.layout = layout;
    const fs::path base = layout == Layout::kInductive ? dir / "train" : dir;

    GraphFiles files;
    if (layout == Layout::kSynthetic) {
        files.facts = read_file(require(base, "facts.txt"));
        files.has_facts = true;
    } else if (fs::exists(base / "facts.txt")) {
        files.facts = read_file(base / "facts.txt");
        files.has_facts = true;
    }
    files.train = read_file(require(base, "train.txt"));
    files.valid = read_file(require(base, "valid.txt"));
    if (layout != Layout::kInductive) {
        files.test = read_file(require(base, "test.txt"));
    } else if (fs::exists(base / "test.txt")) {
        files.test = read_file(base / "test.txt");
    }

    std::vector<Triple> facts;
    if (files.has_facts) {
        facts = intern_all(files.facts, bundle.entities, bundle.relations);
    }
    bundle.train = intern_all(files.train, bundle.entities, bundle.relations);
    if (!files.has_facts) {
        facts = bundle.train;
    }
    if (layout != Layout::kInductive) {
        Vocabulary seen = bundle.entities;
        require_known(files.valid, seen, base / "valid.txt");
        require_known(files.test, seen, base / "test.txt");
    }
    bundle.valid = intern_all(files.valid, bundle.entities, bundle.relations);
    bundle.test = intern_all(files.test, bundle.entities, bundle.relations);

    if (layout == Layout::kInductive) {
        const fs::path eval_dir = dir / "test";
        if (!fs::is_directory(eval_dir)) {
            throw IoError("missing inductive evaluation directory '" + eval_dir.string() + "'");
        }
        InductiveGraph eval;
        std::vector<RawTriple> eval_facts = fs::exists(eval_dir / "facts.txt")
                                                ? read_file(eval_dir / "facts.txt")
                                                : read_file(require(eval_dir, "train.txt"));
        const std::vector<RawTriple> eval_test = read_file(require(eval_dir, "test.txt"));
        std::vector<RawTriple> eval_valid;
        if (fs::exists(eval_dir / "valid.txt")) {
            eval_valid = read_file(eval_dir / "valid.txt");
        }
        std::vector<Triple> graph_triples = intern_all(eval_facts, eval.entities, bundle.relations);
        require_known(eval_test, eval.entities, eval_dir / "test.txt");
        require_known(eval_valid, eval.entities, eval_dir / "valid.txt");
        eval.valid = intern_all(eval_valid, eval.entities, bundle.relations);
        eval.test = intern_all(eval_test, eval.entities, bundle.relations);
        bundle.inductive = std::move(eval);
        bundle.inductive->fact_graph =
            KnowledgeGraph(bundle.inductive->entities.size(), bundle.relations.size(), std::move(graph_triples));
    }
    bundle.fact_graph = KnowledgeGraph(bundle.entities.size(), bundle.relations.size(), std::move(facts));
    return bundle;
}

void write_triples(const fs::path& file, std::span<const Triple> triples, const Vocabulary& entities,
                   const Vocabulary& relations) {
    std::ofstream out(file);
    if (!out) {
        throw IoError("cannot write '" + file.string() + "'");
    }
    for (const Triple& t : triples) {
        out << entities.name(t.head) << '\t' << relations.name(t.relation) << '\t' << entities.name(t.tail)
            << '\n';
    }
    if (!out) {
        throw IoError("write failed for '" + file.string() + "'");
    }
}

void save_dataset(const DatasetBundle& bundle, const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        throw IoError("cannot create '" + dir.string() + "': " + ec.message());
    }
    const fs::path base = bundle.layout == Layout::kInductive ? dir / "train" : dir;
    fs::create_directories(base, ec);
    write_triples(base / "facts.txt", bundle.fact_graph.triples(), bundle.entities, bundle.relations);
    write_triples(base / "train.txt", bundle.train, bundle.entities, bundle.relations);
    write_triples(base / "valid.txt", bundle.valid, bundle.entities, bundle.relations);
    write_triples(base / "test.txt", bundle.test, bundle.entities, bundle.relations);
    if (bundle.inductive) {
        const fs::path eval_dir = dir / "test";
        fs::create_directories(eval_dir, ec);
        const InductiveGraph& g = *bundle.inductive;
        write_triples(eval_dir / "facts.txt", g.fact_graph.triples(), g.entities, bundle.relations);
        write_triples(eval_dir / "valid.txt", g.valid, g.entities, bundle.relations);
        write_triples(eval_dir / "test.txt", g.test, g.entities, bundle.relations);
    }
}

} // namespace pngnn::kg
