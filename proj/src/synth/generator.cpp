#include "pngnn/synth/generator.hpp"

#include "pngnn/error.hpp"
#include "pngnn/rng.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

namespace pngnn::synth {

namespace {

struct Names {
    Structure s;
    const char* name;
};
constexpr Names kNames[] = {{Structure::kC3, "C3"}, {Structure::kC4, "C4"},       {Structure::kI1, "I1"},
                            {Structure::kI2, "I2"}, {Structure::kT, "T"},         {Structure::kU, "U"},
                            {Structure::kTLabel, "T_label"}, {Structure::kULabel, "U_label"}};

std::size_t structural_relations(Structure s) {
    switch (s) {
    case Structure::kC3:
        return 3;
    case Structure::kC4:
    case Structure::kI1:
    case Structure::kI2:
        return 4;
    default:
        return 5;
    }
}

bool is_u(Structure s) { return s == Structure::kU || s == Structure::kULabel; }
bool is_t(Structure s) { return s == Structure::kT || s == Structure::kTLabel; }
bool is_i(Structure s) { return s == Structure::kI1 || s == Structure::kI2; }

} // namespace

Structure parse_structure(const std::string& name) {
    for (const Names& n : kNames) {
        if (name == n.name) {
            return n.s;
        }
    }
    throw ConfigError("unknown structure '" + name + "' (C3, C4, I1, I2, T, U, T_label, U_label)");
}

const char* structure_name(Structure s) {
    for (const Names& n : kNames) {
        if (n.s == s) {
            return n.name;
        }
    }
    return "?";
}

bool is_label_variant(Structure s) { return s == Structure::kTLabel || s == Structure::kULabel; }

const char* split_name(Split s) {
    switch (s) {
    case Split::kTrain:
        return "train";
    case Split::kValid:
        return "valid";
    case Split::kTest:
        return "test";
    }
    return "?";
}

void SynthConfig::validate() const {
    if (groups == 0) {
        throw ConfigError("synthetic config needs at least one rule-instance group");
    }
    if (is_label_variant(structure) && test_groups == 0) {
        throw ConfigError(std::string(structure_name(structure)) + " needs test_groups >= 1");
    }
    if (noise_ratio < 0 || valid_ratio < 0 || test_ratio < 0 || valid_ratio + test_ratio >= 1.0) {
        throw ConfigError("ratios must be >= 0 and valid_ratio + test_ratio < 1");
    }
    if (near_miss < 0 || near_miss > 1) {
        throw ConfigError("near_miss must lie in [0, 1]");
    }
    if (entity_pool == 0) {
        throw ConfigError("entity pool is empty");
    }
    if (src_min < 1 || src_min > src_max || dst_min < 1 || dst_min > dst_max) {
        throw ConfigError("fan ranges need 1 <= min <= max");
    }
    if (threshold < 1) {
        throw ConfigError("threshold N must be >= 1");
    }
    if (is_u(structure) && positives < 1) {
        throw ConfigError("U structures need positives >= 1");
    }
}

SynthConfig default_config(Structure s) {
    SynthConfig c;
    c.structure = s;
    switch (s) {
    case Structure::kC3:
        c.groups = 189;
        c.src_min = c.dst_min = 2;
        c.src_max = c.dst_max = 4;
        break;
    case Structure::kC4:
        c.groups = 177;
        c.src_min = c.dst_min = 3;
        c.src_max = c.dst_max = 5;
        break;
    case Structure::kI1:
        c.groups = 102;
        c.threshold = 1;
        c.src_min = 1;
        c.src_max = 2;
        c.dst_min = 2;
        c.dst_max = 3;
        break;
    case Structure::kI2:
        c.groups = 112;
        c.threshold = 2;
        c.src_min = 2;
        c.src_max = 3;
        c.dst_min = 2;
        c.dst_max = 4;
        break;
    case Structure::kT:
        c.groups = 104;
        c.valid_ratio = 0.06;
        c.test_ratio = 0.14;
        break;
    case Structure::kU:
        c.groups = 97;
        c.noise_ratio = 0.05;
        c.valid_ratio = 0.043;
        c.test_ratio = 0.30;
        break;
    case Structure::kTLabel:
        c.groups = 89;
        c.test_groups = 50;
        c.valid_ratio = 6.0 / 89.0;
        c.test_ratio = 0.0;
        break;
    case Structure::kULabel:
        c.groups = 70;
        c.test_groups = 12;
        c.confusers = 4;
        c.valid_ratio = 26.0 / 422.0;
        c.test_ratio = 0.0;
        break;
    }
    return c;
}

nlohmann::json to_json(const SynthConfig& c) {
    return {{"structure", structure_name(c.structure)},
            {"groups", c.groups},
            {"test_groups", c.test_groups},
            {"valid_ratio", c.valid_ratio},
            {"test_ratio", c.test_ratio},
            {"noise_ratio", c.noise_ratio},
            {"entity_pool", c.entity_pool},
            {"seed", c.seed},
            {"threshold", c.threshold},
            {"src_min", c.src_min},
            {"src_max", c.src_max},
            {"dst_min", c.dst_min},
            {"dst_max", c.dst_max},
            {"near_miss", c.near_miss},
            {"distractors", c.distractors},
            {"positives", c.positives},
            {"confusers", c.confusers}};
}

SynthConfig apply_overrides(SynthConfig c, const nlohmann::json& j) {
    if (!j.is_object()) {
        throw ConfigError("generator overrides must be an object");
    }
    try {
        for (const auto& [key, v] : j.items()) {
            if (key == "structure") {
                c.structure = parse_structure(v.get<std::string>());
            } else if (key == "groups") {
                c.groups = v.get<std::size_t>();
            } else if (key == "test_groups") {
                c.test_groups = v.get<std::size_t>();
            } else if (key == "valid_ratio") {
                c.valid_ratio = v.get<double>();
            } else if (key == "test_ratio") {
                c.test_ratio = v.get<double>();
            } else if (key == "noise_ratio") {
                c.noise_ratio = v.get<double>();
            } else if (key == "entity_pool") {
                c.entity_pool = v.get<std::size_t>();
            } else if (key == "seed") {
                c.seed = v.get<std::uint64_t>();
            } else if (key == "threshold") {
                c.threshold = v.get<std::uint32_t>();
            } else if (key == "src_min") {
                c.src_min = v.get<std::size_t>();
            } else if (key == "src_max") {
                c.src_max = v.get<std::size_t>();
            } else if (key == "dst_min") {
                c.dst_min = v.get<std::size_t>();
            } else if (key == "dst_max") {
                c.dst_max = v.get<std::size_t>();
            } else if (key == "near_miss") {
                c.near_miss = v.get<double>();
            } else if (key == "distractors") {
                c.distractors = v.get<std::size_t>();
            } else if (key == "positives") {
                c.positives = v.get<std::size_t>();
            } else if (key == "confusers") {
                c.confusers = v.get<std::size_t>();
            } else {
                throw ConfigError("unknown generator key '" + key + "'");
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("generator overrides: ") + e.what());
    }
    return c;
}

logic::RulePattern structure_pattern(Structure s, std::span<const RelationId> r, std::uint32_t threshold) {
    const std::size_t need = structural_relations(s);
    if (r.size() < need) {
        throw InvalidArgument(std::string(structure_name(s)) + " needs " + std::to_string(need) + " relations");
    }
    switch (s) {
    case Structure::kC3:
        return logic::chain_pattern(r.subspan(0, 3));
    case Structure::kC4:
        return logic::chain_pattern(r.subspan(0, 4));
    case Structure::kI1:
    case Structure::kI2:
        return logic::i_pattern(r[0], r[1], r[2], r[3], threshold);
    case Structure::kT:
    case Structure::kTLabel:
        return logic::t_pattern(r[0], r[1], r[2], r[3], r[4]);
    case Structure::kU:
    case Structure::kULabel:
        return logic::u_pattern(r[0], r[1], r[2], r[3], r[4]);
    }
    throw InvalidArgument("unknown structure");
}

namespace {

using Pair = std::pair<EntityId, EntityId>;

class Builder {
public:
    explicit Builder(const SynthConfig& c) : c_(c), rng_(c.seed) {}

    EntityId fresh() {
        if (next_ >= c_.entity_pool) {
            throw ConfigError("entity pool of " + std::to_string(c_.entity_pool) +
                              " entities cannot hold the requested fresh rule instances");
        }
        current_.push_back(next_);
        return next_++;
    }
    std::vector<EntityId> fresh(std::size_t n) {
        std::vector<EntityId> out;
        for (std::size_t i = 0; i < n; ++i) {
            out.push_back(fresh());
        }
        return out;
    }
    std::size_t draw(std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng_.below(hi - lo + 1)); }

    void fact(EntityId h, RelationId r, EntityId t) { facts_.push_back({h, r, t}); }

    // Sources -> r1 -> ... -> r_k -> targets through one shared inner chain.
    // Returns the inner nodes.
    std::vector<EntityId> chain(const std::vector<EntityId>& xs, std::size_t k, const std::vector<EntityId>& ys) {
        std::vector<EntityId> inner = fresh(k - 1);
        for (EntityId x : xs) {
            fact(x, 0, inner[0]);
        }
        for (std::size_t i = 0; i + 1 < inner.size(); ++i) {
            fact(inner[i], static_cast<RelationId>(i + 1), inner[i + 1]);
        }
        for (EntityId y : ys) {
            fact(inner.back(), static_cast<RelationId>(k - 1), y);
        }
        return inner;
    }

    void group(Split split) {
        current_.clear();
        std::vector<Pair> pairs;
        const Structure s = c_.structure;
        if (s == Structure::kC3 || s == Structure::kC4 || is_i(s)) {
            const std::size_t k = s == Structure::kC4 ? 4 : 3;
            auto xs = fresh(draw(c_.src_min, c_.src_max));
            auto ys = fresh(draw(c_.dst_min, c_.dst_max));
            auto inner = chain(xs, k, ys);
            if (is_i(s)) {
                for (std::uint32_t i = 0; i < c_.threshold; ++i) {
                    fact(fresh(), 3, inner[1]);
                }
                if (rng_.bernoulli(c_.near_miss)) {
                    auto near_ys = fresh(draw(c_.dst_min, c_.dst_max));
                    auto near = chain(xs, k, near_ys);
                    for (std::uint32_t i = 0; i + 1 < c_.threshold; ++i) {
                        fact(fresh(), 3, near[1]);
                    }
                }
            }
            for (EntityId x : xs) {
                for (EntityId y : ys) {
                    pairs.emplace_back(x, y);
                }
            }
        } else if (is_t(s)) {
            const EntityId x = fresh();
            const EntityId y = fresh();
            auto two_hop = [&](RelationId a, RelationId b, EntityId tail) {
                const EntityId z1 = fresh();
                const EntityId z2 = fresh();
                fact(x, 0, z1);
                fact(z1, a, z2);
                fact(z2, b, tail);
            };
            two_hop(1, 2, y);
            two_hop(3, 4, y);
            for (std::size_t d = 0; d < c_.distractors; ++d) {
                two_hop(1, 2, fresh());
                two_hop(3, 4, fresh());
            }
            pairs.emplace_back(x, y);
        } else {
            // Two branches a_i sharing the source; positives close both
            // paths under one a_i, confusers mix the branches.
            const EntityId x = fresh();
            EntityId c[2], d[2];
            for (int i = 0; i < 2; ++i) {
                const EntityId a = fresh();
                c[i] = fresh();
                d[i] = fresh();
                fact(x, 0, a);
                fact(a, 1, c[i]);
                fact(a, 3, d[i]);
            }
            for (int i = 0; i < 2; ++i) {
                for (std::size_t m = 0; m < c_.positives; ++m) {
                    const EntityId v = fresh();
                    fact(c[i], 2, v);
                    fact(d[i], 4, v);
                    pairs.emplace_back(x, v);
                }
                for (std::size_t m = 0; m < c_.confusers; ++m) {
                    const EntityId w = fresh();
                    fact(c[i], 2, w);
                    fact(d[1 - i], 4, w);
                }
            }
        }
        instances_.push_back({split, current_});
        for (const Pair& p : pairs) {
            planted_.push_back({p, split});
        }
    }

    void noise(std::size_t relations) {
        const std::size_t want = static_cast<std::size_t>(std::llround(c_.noise_ratio * facts_.size()));
        std::set<kg::Triple> seen(facts_.begin(), facts_.end());
        std::size_t added = 0;
        for (std::size_t attempt = 0; added < want && attempt < 100 * (want + 1); ++attempt) {
            const auto h = static_cast<EntityId>(rng_.below(next_));
            const auto r = static_cast<RelationId>(rng_.below(relations));
            const auto t = static_cast<EntityId>(rng_.below(next_));
            if (h == t || !seen.insert({h, r, t}).second) {
                continue;
            }
            fact(h, r, t);
            ++added;
        }
    }

    const SynthConfig& c_;
    Rng rng_;
    EntityId next_ = 0;
    std::vector<EntityId> current_;
    std::vector<kg::Triple> facts_;
    std::vector<RuleInstance> instances_;
    std::vector<std::pair<Pair, Split>> planted_;
};

// Renumbers entities and relations in first-appearance order over facts,
// train, valid, test: the order a reload from disk produces.
void canonicalize(SynthDataset& d, const std::vector<std::string>& relation_names) {
    DatasetBundle& b = d.bundle;
    kg::Vocabulary ents, rels;
    std::map<EntityId, EntityId> emap;
    std::map<RelationId, RelationId> rmap;
    auto visit = [&](std::vector<kg::Triple>& ts) {
        for (kg::Triple& t : ts) {
            for (EntityId* e : {&t.head, &t.tail}) {
                auto it = emap.find(*e);
                if (it == emap.end()) {
                    it = emap.emplace(*e, ents.intern("e" + std::to_string(*e))).first;
                }
                *e = it->second;
            }
            auto it = rmap.find(t.relation);
            if (it == rmap.end()) {
                it = rmap.emplace(t.relation, rels.intern(relation_names[t.relation])).first;
            }
            t.relation = it->second;
        }
    };
    std::vector<kg::Triple> facts(b.fact_graph.triples().begin(), b.fact_graph.triples().end());
    visit(facts);
    visit(b.train);
    visit(b.valid);
    visit(b.test);
    b.entities = ents;
    b.relations = rels;
    b.fact_graph = kg::KnowledgeGraph(ents.size(), rels.size(), std::move(facts));
    for (RuleInstance& inst : d.instances) {
        for (EntityId& e : inst.entities) {
            e = emap.at(e);
        }
        std::sort(inst.entities.begin(), inst.entities.end());
    }
    for (logic::PatternEdge& e : d.pattern.edges) {
        e.rel = rmap.at(e.rel);
    }
    for (logic::CountConstraint& c : d.pattern.counts) {
        c.rel = rmap.at(c.rel);
    }
    d.target = rmap.at(d.target);
}

SynthDataset build(const SynthConfig& config) {
    config.validate();
    const Structure s = config.structure;
    const std::size_t k = structural_relations(s);
    Builder b(config);
    const bool label = is_label_variant(s);
    for (std::size_t g = 0; g < config.groups; ++g) {
        b.group(Split::kTrain);
    }
    for (std::size_t g = 0; label && g < config.test_groups; ++g) {
        b.group(Split::kTest);
    }
    b.noise(k);

    std::vector<RelationId> rel_ids(k);
    std::vector<std::string> relation_names;
    for (std::size_t r = 0; r < k; ++r) {
        rel_ids[r] = static_cast<RelationId>(r);
        relation_names.push_back("r" + std::to_string(r + 1));
    }
    relation_names.push_back("target");

    SynthDataset d;
    d.config = config;
    d.pattern = structure_pattern(s, rel_ids, config.threshold);
    d.target = static_cast<RelationId>(k);
    const kg::KnowledgeGraph raw(b.next_, k, b.facts_);
    const logic::CoverageSet covered = logic::coverage(raw, d.pattern);

    std::map<EntityId, Split> owner;
    for (const RuleInstance& inst : b.instances_) {
        for (EntityId e : inst.entities) {
            owner.emplace(e, inst.split);
        }
    }
    std::set<Pair> planted;
    std::vector<Pair> base, test;
    for (const auto& [p, split] : b.planted_) {
        if (!covered.count(p)) {
            throw StateError("generator planted an uncovered pair; structure builder is inconsistent");
        }
        planted.insert(p);
        (split == Split::kTest ? test : base).push_back(p);
    }
    for (const Pair& p : covered) {
        if (planted.count(p)) {
            continue;
        }
        ++d.completed;
        auto it = owner.find(p.first);
        (label && it != owner.end() && it->second == Split::kTest ? test : base).push_back(p);
    }

    b.rng_.shuffle(std::span<Pair>(base));
    b.rng_.shuffle(std::span<Pair>(test));
    std::vector<kg::Triple> facts = b.facts_;
    b.rng_.shuffle(std::span<kg::Triple>(facts));

    auto triple = [&](const Pair& p) { return kg::Triple{p.first, d.target, p.second}; };
    DatasetBundle& out = d.bundle;
    out.layout = kg::Layout::kSynthetic;
    out.fact_graph = kg::KnowledgeGraph(b.next_, k + 1, std::move(facts));
    const std::size_t n = base.size();
    const std::size_t n_valid = static_cast<std::size_t>(std::llround(config.valid_ratio * n));
    const std::size_t n_test = label ? 0 : static_cast<std::size_t>(std::llround(config.test_ratio * n));
    for (std::size_t i = 0; i < n; ++i) {
        auto& split = i < n_test ? out.test : i < n_test + n_valid ? out.valid : out.train;
        split.push_back(triple(base[i]));
    }
    for (const Pair& p : test) {
        out.test.push_back(triple(p));
    }
    // Planted instances of non-label datasets span all splits.
    d.instances = std::move(b.instances_);
    if (label) {
        // Base instances hold train and valid pairs alike.
        std::set<EntityId> valid_heads;
        for (const kg::Triple& t : out.valid) {
            valid_heads.insert(t.head);
        }
        for (RuleInstance& inst : d.instances) {
            if (inst.split == Split::kTrain &&
                std::any_of(inst.entities.begin(), inst.entities.end(),
                            [&](EntityId e) { return valid_heads.count(e) != 0; })) {
                inst.split = Split::kValid;
            }
        }
    }
    canonicalize(d, relation_names);
    return d;
}

} // namespace

SynthDataset generate(const SynthConfig& config) {
    if (is_label_variant(config.structure)) {
        return generate_label_variant(config);
    }
    return build(config);
}

SynthDataset generate_label_variant(const SynthConfig& config) {
    if (!is_label_variant(config.structure)) {
        throw ConfigError(std::string("generate_label_variant needs T_label or U_label, got ") +
                          structure_name(config.structure));
    }
    return build(config);
}

AuditReport audit(const DatasetBundle& bundle, const logic::RulePattern& pattern, RelationId target) {
    AuditReport r;
    const logic::CoverageSet covered = logic::coverage(bundle.fact_graph, pattern);
    std::set<Pair> positives;
    for (const auto* split : {&bundle.train, &bundle.valid, &bundle.test}) {
        for (const kg::Triple& t : *split) {
            ++r.positives;
            positives.insert({t.head, t.tail});
            if (t.relation != target || !covered.count({t.head, t.tail})) {
                ++r.uncovered;
            }
        }
    }
    for (const kg::Triple& t : bundle.fact_graph.triples()) {
        if (t.relation == target) {
            ++r.leakage;
        }
    }
    for (const Pair& p : covered) {
        if (!positives.count(p)) {
            ++r.missing;
        }
    }
    if (pattern.name == "U" && pattern.edges.size() == 5) {
        const auto& e = pattern.edges;
        const logic::CoverageSet relaxed =
            logic::coverage(bundle.fact_graph, logic::t_pattern(e[0].rel, e[1].rel, e[2].rel, e[3].rel, e[4].rel));
        std::set<EntityId> confused;
        for (const Pair& p : relaxed) {
            if (!covered.count(p)) {
                ++r.confusers;
                confused.insert(p.first);
            }
        }
        std::set<EntityId> sources;
        for (const kg::Triple& t : bundle.test) {
            sources.insert(t.head);
        }
        r.test_sources = sources.size();
        for (EntityId x : sources) {
            r.confused_queries += confused.count(x);
        }
    }
    return r;
}

AuditReport audit(const SynthDataset& data) {
    AuditReport r = audit(data.bundle, data.pattern, data.target);
    if (is_label_variant(data.config.structure)) {
        std::set<EntityId> seen;
        for (const RuleInstance& inst : data.instances) {
            if (inst.split != Split::kTest) {
                seen.insert(inst.entities.begin(), inst.entities.end());
            }
        }
        for (const RuleInstance& inst : data.instances) {
            if (inst.split == Split::kTest) {
                for (EntityId e : inst.entities) {
                    r.shared_entities += seen.count(e);
                }
            }
        }
    }
    return r;
}

nlohmann::json to_json(const AuditReport& r) {
    return {{"positives", r.positives},
            {"uncovered", r.uncovered},
            {"leakage", r.leakage},
            {"missing", r.missing},
            {"confusers", r.confusers},
            {"confused_queries", r.confused_queries},
            {"test_sources", r.test_sources},
            {"shared_entities", r.shared_entities},
            {"ok", r.ok()}};
}

void write_synth(const SynthDataset& data, const AuditReport& report, const std::filesystem::path& dir) {
    kg::save_dataset(data.bundle, dir);
    const auto& b = data.bundle;
    nlohmann::json instances = nlohmann::json::array();
    if (is_label_variant(data.config.structure)) {
        for (const RuleInstance& inst : data.instances) {
            nlohmann::json names = nlohmann::json::array();
            for (EntityId e : inst.entities) {
                names.push_back(b.entities.name(e));
            }
            instances.push_back({{"split", split_name(inst.split)}, {"entities", names}});
        }
    }
    nlohmann::json meta = {{"structure", structure_name(data.config.structure)},
                           {"seed", data.config.seed},
                           {"config", to_json(data.config)},
                           {"relations", b.relations.names()},
                           {"target", b.relations.name(data.target)},
                           {"pattern", logic::pattern_to_json(data.pattern)},
                           {"counts",
                            {{"known", b.fact_graph.triples().size()},
                             {"train", b.train.size()},
                             {"valid", b.valid.size()},
                             {"test", b.test.size()},
                             {"entities", b.entities.size()},
                             {"instances", data.instances.size()},
                             {"completed", data.completed}}},
                           {"instances", instances},
                           {"audit", to_json(report)}};
    const auto path = dir / "meta.json";
    std::ofstream out(path);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    out << meta.dump(1) << "\n";
    if (!out) {
        throw IoError("write failed: " + path.string());
    }
}

SynthMeta read_meta(const std::filesystem::path& dir, const DatasetBundle& bundle) {
    const auto path = dir / "meta.json";
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read " + path.string());
    }
    SynthMeta m;
    try {
        m.manifest = nlohmann::json::parse(in);
        const auto names = m.manifest.at("relations").get<std::vector<std::string>>();
        auto remap = [&](RelationId r) {
            if (r >= names.size()) {
                throw ParseError(path.string() + ": pattern relation " + std::to_string(r) + " not listed");
            }
            auto id = bundle.relations.find(names[r]);
            if (!id) {
                throw CompatibilityError("relation '" + names[r] + "' from meta.json is not in the dataset");
            }
            return *id;
        };
        m.pattern = logic::pattern_from_json(m.manifest.at("pattern"));
        for (auto& e : m.pattern.edges) {
            e.rel = remap(e.rel);
        }
        for (auto& c : m.pattern.counts) {
            c.rel = remap(c.rel);
        }
        auto target = bundle.relations.find(m.manifest.at("target").get<std::string>());
        if (!target) {
            throw CompatibilityError("target relation from meta.json is not in the dataset");
        }
        m.target = *target;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
    return m;
}

} // namespace pngnn::synth
