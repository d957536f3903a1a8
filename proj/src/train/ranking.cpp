#include "pngnn/train/ranking.hpp"

#include "pngnn/error.hpp"

#include <algorithm>
#include <cmath>

namespace pngnn::train {

TripleIndex::TripleIndex(std::initializer_list<std::span<const Triple>> parts) {
    for (auto p : parts) {
        add(p);
    }
}

void TripleIndex::add(std::span<const Triple> triples) {
    auto insert = [](std::vector<EntityId>& v, EntityId e) {
        auto it = std::lower_bound(v.begin(), v.end(), e);
        if (it == v.end() || *it != e) {
            v.insert(it, e);
        }
    };
    for (const Triple& t : triples) {
        insert(tails_[key(t.head, t.relation)], t.tail);
        insert(heads_[key(t.relation, t.tail)], t.head);
    }
}

std::span<const EntityId> TripleIndex::tails(EntityId h, RelationId r) const {
    auto it = tails_.find(key(h, r));
    return it == tails_.end() ? std::span<const EntityId>{} : std::span<const EntityId>(it->second);
}

std::span<const EntityId> TripleIndex::heads(RelationId r, EntityId t) const {
    auto it = heads_.find(key(r, t));
    return it == heads_.end() ? std::span<const EntityId>{} : std::span<const EntityId>(it->second);
}

bool TripleIndex::contains(const Triple& t) const {
    const auto v = tails(t.head, t.relation);
    return std::binary_search(v.begin(), v.end(), t.tail);
}

std::vector<Triple> sample_negatives(const TripleIndex& known, std::size_t num_entities, const Triple& positive,
                                     std::size_t n, Rng& rng, Side side) {
    if (n == 0) {
        throw InvalidArgument("sample_negatives: n must be >= 1");
    }
    const auto excluded = known.answers(positive, side);
    const EntityId own = side == Side::kTail ? positive.tail : positive.head;
    const bool own_known = std::binary_search(excluded.begin(), excluded.end(), own);
    const std::size_t blocked = excluded.size() + (own_known ? 0 : 1);
    if (own >= num_entities || blocked >= num_entities) {
        throw SamplingError("no valid negative for this triple: every replacement is a known fact");
    }
    auto make = [&](EntityId e) {
        Triple t = positive;
        (side == Side::kTail ? t.tail : t.head) = e;
        return t;
    };
    std::vector<Triple> out;
    out.reserve(n);
    // Rejection is exact-uniform; enumerate only when most entities are blocked.
    if (blocked * 2 <= num_entities) {
        while (out.size() < n) {
            const auto e = static_cast<EntityId>(rng.below(num_entities));
            if (e != own && !std::binary_search(excluded.begin(), excluded.end(), e)) {
                out.push_back(make(e));
            }
        }
        return out;
    }
    std::vector<EntityId> valid;
    for (EntityId e = 0; e < num_entities; ++e) {
        if (e != own && !std::binary_search(excluded.begin(), excluded.end(), e)) {
            valid.push_back(e);
        }
    }
    while (out.size() < n) {
        out.push_back(make(valid[rng.below(valid.size())]));
    }
    return out;
}

std::vector<Triple> sample_negatives(const kg::DatasetBundle& bundle, const Triple& positive, std::size_t n, Rng& rng,
                                     Side side) {
    const TripleIndex known{bundle.fact_graph.triples(), bundle.train};
    return sample_negatives(known, bundle.entities.size(), positive, n, rng, side);
}

double rank_query(std::span<const double> scores, EntityId target, std::span<const EntityId> filtered) {
    if (target >= scores.size()) {
        throw RangeError("rank_query: target " + std::to_string(target) + " outside " +
                         std::to_string(scores.size()) + " scores");
    }
    std::vector<char> skip(scores.size(), 0);
    for (EntityId e : filtered) {
        if (e == target) {
            throw InvalidArgument("rank_query: the true target is in the filter set");
        }
        if (e < skip.size()) {
            skip[e] = 1;
        }
    }
    const double s = scores[target];
    std::size_t higher = 0, ties = 0;
    for (std::size_t e = 0; e < scores.size(); ++e) {
        if (e == target || skip[e]) {
            continue;
        }
        higher += scores[e] > s;
        ties += scores[e] == s;
    }
    return 1.0 + static_cast<double>(higher) + 0.5 * static_cast<double>(ties);
}

Metrics metrics(std::span<const double> ranks) {
    if (ranks.empty()) {
        throw InvalidArgument("metrics: empty rank list");
    }
    Metrics m;
    for (double r : ranks) {
        if (!(r >= 1.0)) {
            throw InvalidArgument("metrics: rank below 1");
        }
        m.mr += r;
        m.mrr += 1.0 / r;
        m.hits1 += r <= 1.0;
        m.hits3 += r <= 3.0;
        m.hits10 += r <= 10.0;
    }
    const double n = static_cast<double>(ranks.size());
    m.mr /= n;
    m.mrr /= n;
    m.hits1 /= n;
    m.hits3 /= n;
    m.hits10 /= n;
    m.num_queries = ranks.size();
    return m;
}

nlohmann::ordered_json to_json(const Metrics& m, const std::string& split) {
    nlohmann::ordered_json j;
    j["split"] = split;
    j["mr"] = m.mr;
    j["mrr"] = m.mrr;
    j["hits1"] = m.hits1;
    j["hits3"] = m.hits3;
    j["hits10"] = m.hits10;
    j["num_queries"] = m.num_queries;
    return j;
}

} // namespace pngnn::train
