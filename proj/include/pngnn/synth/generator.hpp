#pragma once

#include "pngnn/kg/dataset.hpp"
#include "pngnn/logic/pattern.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace pngnn::synth {

using kg::DatasetBundle;
using kg::EntityId;
using kg::RelationId;

enum class Structure { kC3, kC4, kI1, kI2, kT, kU, kTLabel, kULabel };

Structure parse_structure(const std::string& name); // ConfigError on unknown names
const char* structure_name(Structure s);
bool is_label_variant(Structure s);

struct SynthConfig {
    Structure structure = Structure::kC3;
    std::size_t groups = 0;       // rule-instance groups (train/valid groups for label variants)
    std::size_t test_groups = 0;  // label variants: fresh groups feeding the test split
    double valid_ratio = 0.05;    // of target pairs (label variants: of the base pairs)
    double test_ratio = 0.15;     // unused by label variants
    double noise_ratio = 0.10;    // noise facts per structural fact
    std::size_t entity_pool = 20000;
    std::uint64_t seed = 0;
    std::uint32_t threshold = 1;  // N for I-structures
    std::size_t src_min = 1, src_max = 1; // sources per chain group
    std::size_t dst_min = 1, dst_max = 1; // targets per chain group
    double near_miss = 0.5;       // I: chance of a branch with N - 1 satellites
    std::size_t distractors = 2;  // T: single-chain tails of each kind per group
    std::size_t positives = 3;    // U: positive tails per branch
    std::size_t confusers = 3;    // U: T-shaped near misses per ordered branch pair

    void validate() const;
};

// Defaults calibrated so counts land near the reference statistics.
SynthConfig default_config(Structure s);

nlohmann::json to_json(const SynthConfig& c);
// Applies the keys of j on top of `base`; unknown keys are a ConfigError.
SynthConfig apply_overrides(SynthConfig base, const nlohmann::json& j);

enum class Split { kTrain, kValid, kTest };
const char* split_name(Split s);

struct RuleInstance {
    Split split = Split::kTrain;
    std::vector<EntityId> entities;
};

struct SynthDataset {
    SynthConfig config;
    DatasetBundle bundle;
    logic::RulePattern pattern;   // relation ids are the bundle's
    RelationId target = 0;
    std::vector<RuleInstance> instances;
    std::size_t completed = 0;    // covered pairs added beyond the planted ones
};

// Rule pattern of a structure over relations r1..r5 given by id.
logic::RulePattern structure_pattern(Structure s, std::span<const RelationId> rels, std::uint32_t threshold);

SynthDataset generate(const SynthConfig& config);
// Label variants only: test instances use entities disjoint from every
// train/valid instance. ConfigError for other structures or a too-small pool.
SynthDataset generate_label_variant(const SynthConfig& config);

struct AuditReport {
    std::size_t positives = 0;
    std::size_t uncovered = 0;     // positives outside coverage
    std::size_t leakage = 0;       // fact edges carrying the target relation
    std::size_t missing = 0;       // covered pairs absent from every split
    std::size_t confusers = 0;     // T-relaxation pairs not covered by U (U patterns only)
    std::size_t confused_queries = 0;  // test sources with at least one confuser tail
    std::size_t test_sources = 0;
    std::size_t shared_entities = 0;   // label variants: test/train instance overlap

    bool ok() const noexcept { return uncovered == 0 && leakage == 0 && missing == 0 && shared_entities == 0; }
};

AuditReport audit(const DatasetBundle& bundle, const logic::RulePattern& pattern, RelationId target);
// Adds the instance-disjointness count for label variants.
AuditReport audit(const SynthDataset& data);

nlohmann::json to_json(const AuditReport& r);

// Dataset files plus meta.json (config, seed, pattern, instances, audit).
void write_synth(const SynthDataset& data, const AuditReport& report, const std::filesystem::path& dir);
// Reads the pattern and target relation back from meta.json.
struct SynthMeta {
    logic::RulePattern pattern;
    RelationId target = 0;
    nlohmann::json manifest;
};
SynthMeta read_meta(const std::filesystem::path& dir, const DatasetBundle& bundle);

} // namespace pngnn::synth
