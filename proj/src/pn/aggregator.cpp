#include "pngnn/pn/aggregator.hpp"

#include "pngnn/error.hpp"

#include <algorithm>
#include <sstream>

namespace pngnn::pn {

std::string slot_name(Slot s) { return std::to_string(s.first) + "," + std::to_string(s.second); }

Slot parse_slot(const std::string& text) {
    std::istringstream in(text);
    std::size_t i = 0, j = 0;
    char comma = 0;
    if (!(in >> i >> comma >> j) || comma != ',' || i < 1 || j < 1 || !(in >> std::ws).eof()) {
        throw ConfigError("bad path-neighbor slot '" + text + "' (expected \"i,j\" with i, j >= 1)");
    }
    return {i, j};
}

void PnConfig::validate() const {
    if (hops < 1) {
        throw ConfigError("pn.hops must be >= 1");
    }
    if (mlp_layers < 1) {
        throw ConfigError("pn.mlp_layers must be >= 1");
    }
    for (const Slot& s : slots) {
        if (s.first < 1 || s.second < 1 || s.first + s.second > hops + 1) {
            throw ConfigError("pn slot " + slot_name(s) + " outside the " + std::to_string(hops) + "-hop budget");
        }
    }
}

bool PnConfig::enabled(Slot s) const {
    return slots.empty() || std::find(slots.begin(), slots.end(), s) != slots.end();
}

nlohmann::json to_json(const PnConfig& c) {
    nlohmann::json slots = nlohmann::json::array();
    for (const Slot& s : c.slots) {
        slots.push_back(slot_name(s));
    }
    return {{"hops", c.hops},
            {"pool", diff::reduce_name(c.pool)},
            {"slots", slots},
            {"fuse", c.fuse == Fuse::kConcat ? "concat" : "add"},
            {"mlp_layers", c.mlp_layers}};
}

PnConfig pn_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) {
        throw ConfigError("pn section must be an object");
    }
    PnConfig c;
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "hops") {
                c.hops = value.get<std::size_t>();
            } else if (key == "pool") {
                c.pool = diff::parse_reduce(value.get<std::string>());
            } else if (key == "slots") {
                for (const auto& s : value) {
                    c.slots.push_back(parse_slot(s.get<std::string>()));
                }
            } else if (key == "fuse") {
                const auto f = value.get<std::string>();
                if (f == "concat") {
                    c.fuse = Fuse::kConcat;
                } else if (f == "add") {
                    c.fuse = Fuse::kAdd;
                } else {
                    throw ConfigError("pn.fuse must be concat or add, got '" + f + "'");
                }
            } else if (key == "mlp_layers") {
                c.mlp_layers = value.get<std::size_t>();
            } else {
                throw ConfigError("unknown key pn." + key);
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("pn section: ") + e.what());
    }
    c.validate();
    return c;
}

Pooled pool(const Array& h, std::span<const EntityId> members, Reduce mode) {
    Pooled out{Array(1, h.cols()), members.size()};
    if (members.empty()) {
        return out;
    }
    Tape tape(false);
    Var x = tape.constant(h);
    std::vector<std::size_t> idx(members.begin(), members.end());
    const std::size_t offsets[] = {0, idx.size()};
    out.vector = diff::segment_reduce(diff::gather_rows(x, idx), offsets, mode).value();
    return out;
}

PathNeighborSummary summarize(const Array& h_final, const DistanceTable& table, EntityId v, std::size_t hops,
                              Reduce mode) {
    PathNeighborSummary s;
    s.hops = hops;
    for (const Slot& slot : khop_slots(hops)) {
        s.slots[slot] = pool(h_final, path_neighbors(table, v, slot.first, slot.second), mode);
    }
    return s;
}

std::size_t fused_width(const PnConfig& c, std::size_t dim) {
    return c.fuse == Fuse::kAdd ? dim : dim * (khop_slots(c.hops).size() + 1);
}

namespace {

std::vector<std::size_t> slot_dims(const PnConfig& c, std::size_t dim) {
    return std::vector<std::size_t>(c.mlp_layers + 1, dim);
}

std::string slot_param(Slot s) { return "pn." + std::to_string(s.first) + "_" + std::to_string(s.second); }

// pooled: one targets x dim value per slot of khop_slots(c.hops).
Var fuse_pooled(Tape& tape, ParamStore& store, const PnConfig& c, std::size_t dim, const std::vector<Var>& pooled,
                Var h_v) {
    const auto slots = khop_slots(c.hops);
    std::vector<Var> parts;
    for (std::size_t k = 0; k < slots.size(); ++k) {
        parts.push_back(diff::mlp_forward(tape, store, slot_param(slots[k]), pooled[k], slot_dims(c, dim),
                                          diff::Activation::kRelu));
    }
    if (c.fuse == Fuse::kAdd) {
        Var out = h_v;
        for (const Var& p : parts) {
            out = diff::add(out, p);
        }
        return out;
    }
    parts.push_back(h_v);
    return diff::concat_cols(parts);
}

} // namespace

Var fuse_khop(Tape& tape, ParamStore& store, const PnConfig& c, std::size_t dim, const RowSource& rows,
              const DistanceTable& table, std::span<const EntityId> targets) {
    c.validate();
    if (table.j_max() < c.hops) {
        throw StateError("distance table holds strata to depth " + std::to_string(table.j_max()) + ", fusion needs " +
                         std::to_string(c.hops));
    }
    Var h_v = rows(targets);
    if (h_v.cols() != dim) {
        throw ShapeError("fuse_khop: final rows have width " + std::to_string(h_v.cols()) + ", expected " +
                         std::to_string(dim));
    }
    std::vector<Var> pooled;
    for (const Slot& slot : khop_slots(c.hops)) {
        if (!c.enabled(slot)) {
            pooled.push_back(tape.constant(Array(targets.size(), dim)));
            continue;
        }
        std::vector<EntityId> members;
        std::vector<std::size_t> offsets{0};
        for (EntityId v : targets) {
            const auto m = path_neighbors(table, v, slot.first, slot.second);
            members.insert(members.end(), m.begin(), m.end());
            offsets.push_back(members.size());
        }
        if (members.empty()) {
            pooled.push_back(tape.constant(Array(targets.size(), dim)));
            continue;
        }
        pooled.push_back(diff::segment_reduce(rows(members), offsets, c.pool));
    }
    return fuse_pooled(tape, store, c, dim, pooled, h_v);
}

Array fuse_khop(ParamStore& store, const PnConfig& c, const PathNeighborSummary& s, std::span<const double> h_v) {
    c.validate();
    const std::size_t dim = h_v.size();
    Tape tape(false);
    std::vector<Var> pooled;
    for (const Slot& slot : khop_slots(c.hops)) {
        auto it = s.slots.find(slot);
        if (it == s.slots.end()) {
            throw StateError("summary lacks slot " + slot_name(slot));
        }
        if (it->second.vector.cols() != dim) {
            throw ShapeError("summary slot " + slot_name(slot) + " has width " +
                             std::to_string(it->second.vector.cols()) + ", expected " + std::to_string(dim));
        }
        pooled.push_back(tape.constant(c.enabled(slot) ? it->second.vector : Array(1, dim)));
    }
    return fuse_pooled(tape, store, c, dim, pooled, tape.constant(Array::row_vector(h_v))).value();
}

Array fuse_2hop(ParamStore& store, PnConfig c, const PathNeighborSummary& s, std::span<const double> h_v) {
    c.hops = 2;
    return fuse_khop(store, c, s, h_v);
}

} // namespace pngnn::pn
