#pragma once

#include "pngnn/kg/graph.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace pngnn::kg {

enum class Layout { kTransductive, kInductive, kSynthetic };

Layout parse_layout(std::string_view name);
const char* layout_name(Layout layout);

// Name <-> dense index map, assigned in first-appearance order.
class Vocabulary {
public:
    std::uint32_t intern(std::string_view name);
    std::optional<std::uint32_t> find(std::string_view name) const;
    const std::string& name(std::uint32_t id) const { return names_.at(id); }
    std::size_t size() const noexcept { return names_.size(); }
    const std::vector<std::string>& names() const noexcept { return names_; }

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::uint32_t> index_;
};

// Evaluation graph of an inductive dataset: disjoint entities, shared
// relation vocabulary.
struct InductiveGraph {
    Vocabulary entities;
    KnowledgeGraph fact_graph;
    std::vector<Triple> valid;
    std::vector<Triple> test;
};

struct DatasetBundle {
    Layout layout = Layout::kTransductive;
    Vocabulary entities;
    Vocabulary relations;
    KnowledgeGraph fact_graph;
    std::vector<Triple> train;
    std::vector<Triple> valid;
    std::vector<Triple> test;
    std::optional<InductiveGraph> inductive;
};

// Reads facts.txt (optional for transductive/inductive), train.txt, valid.txt
// and test.txt; the inductive layout reads train/ and test/ subdirectories.
DatasetBundle load_dataset(const std::filesystem::path& dir, Layout layout);

struct NamedGraph {
    Vocabulary entities;
    Vocabulary relations;
    KnowledgeGraph graph;
};

// One triple file, or a directory's facts.txt (train.txt when there is no
// facts.txt). Ids follow first appearance.
NamedGraph load_graph(const std::filesystem::path& path);

// Writes the dataset directory layout (facts.txt always written).
void save_dataset(const DatasetBundle& bundle, const std::filesystem::path& dir);

void write_triples(const std::filesystem::path& file, std::span<const Triple> triples,
                   const Vocabulary& entities, const Vocabulary& relations);

} // namespace pngnn::kg
