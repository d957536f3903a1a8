#pragma once

#include "pngnn/diff/nn.hpp"
#include "pngnn/pn/distance.hpp"

#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace pngnn::pn {

using diff::Array;
using diff::ParamStore;
using diff::Reduce;
using diff::Tape;
using diff::Var;

using Slot = std::pair<std::size_t, std::size_t>;

std::string slot_name(Slot s); // "i,j"
Slot parse_slot(const std::string& text);

enum class Fuse { kConcat, kAdd };

struct PnConfig {
    std::size_t hops = 2;          // |d|; slots (i, j) with i + j <= hops + 1
    Reduce pool = Reduce::kMean;
    std::vector<Slot> slots;       // enabled slots; empty enables all
    Fuse fuse = Fuse::kConcat;
    std::size_t mlp_layers = 1;    // affine layers per slot MLP

    void validate() const;
    bool enabled(Slot s) const;
};

nlohmann::json to_json(const PnConfig& c);
PnConfig pn_config_from_json(const nlohmann::json& j);

struct Pooled {
    Array vector; // 1 x dim, zero when count == 0
    std::size_t count = 0;
};

// Pools the given rows of h; an empty member set gives (zero, 0).
Pooled pool(const Array& h, std::span<const EntityId> members, Reduce mode);

struct PathNeighborSummary {
    std::size_t hops = 0;
    std::map<Slot, Pooled> slots;
};

// One target's summaries from final-layer states and a distance table with
// j_max >= hops.
PathNeighborSummary summarize(const Array& h_final, const DistanceTable& table, EntityId v, std::size_t hops,
                              Reduce mode);

// Width of the fused representation.
std::size_t fused_width(const PnConfig& c, std::size_t dim);

// Returns final-layer rows for the requested entities.
using RowSource = std::function<Var(std::span<const EntityId>)>;

// targets x fused_width: the per-slot MLP outputs of the pooled strata,
// concatenated (or added) with each target's own final row. Disabled slots
// pool to the empty-stratum value. Slot MLPs are named "pn.<i>_<j>".
Var fuse_khop(Tape& tape, ParamStore& store, const PnConfig& c, std::size_t dim, const RowSource& rows,
              const DistanceTable& table, std::span<const EntityId> targets);

// Single-target value forms over precomputed summaries; `c.hops` selects
// the slot set.
Array fuse_khop(ParamStore& store, const PnConfig& c, const PathNeighborSummary& s, std::span<const double> h_v);
Array fuse_2hop(ParamStore& store, PnConfig c, const PathNeighborSummary& s, std::span<const double> h_v);

} // namespace pngnn::pn
