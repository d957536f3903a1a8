#include "pngnn/diff/params.hpp"

#include "pngnn/error.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <string>

namespace pngnn::diff {

Parameter& ParamStore::get_or_init(const std::string& name, std::size_t rows, std::size_t cols,
                                   std::size_t fan_in) {
    auto it = params_.find(name);
    if (it != params_.end()) {
        const Array& value = it->second.value;
        if (value.rows() != rows || value.cols() != cols) {
            throw ShapeError("parameter '" + name + "' requested as " + std::to_string(rows) + "x" +
                             std::to_string(cols) + " but stored as " +
                             std::to_string(value.rows()) + "x" + std::to_string(value.cols()));
        }
        return it->second;
    }
    Array value(rows, cols);
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in == 0 ? 1 : fan_in));
    for (double& x : value.values()) {
        x = rng_.uniform(-bound, bound);
    }
    return set(name, std::move(value));
}

Parameter& ParamStore::set(const std::string& name, Array value) {
    Parameter& p = params_[name];
    p.grad = Array(value.shape(), std::vector<double>(value.size(), 0.0));
    p.m = p.grad;
    p.v = p.grad;
    p.steps = 0;
    p.has_grad = false;
    p.value = std::move(value);
    return p;
}

Parameter& ParamStore::at(const std::string& name) {
    auto it = params_.find(name);
    if (it == params_.end()) {
        throw StateError("unknown parameter '" + name + "'");
    }
    return it->second;
}

const Parameter& ParamStore::at(const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) {
        throw StateError("unknown parameter '" + name + "'");
    }
    return it->second;
}

std::size_t ParamStore::coordinate_count() const {
    std::size_t n = 0;
    for (const auto& [name, p] : params_) {
        n += p.value.size();
    }
    return n;
}

void ParamStore::zero_grad() {
    for (auto& [name, p] : params_) {
        p.grad.fill(0.0);
        p.has_grad = false;
    }
}

void adam_step(ParamStore& store, const AdamOptions& options) {
    bool any = false;
    for (auto& [name, p] : store.parameters()) {
        if (!p.has_grad) {
            continue;
        }
        any = true;
        ++p.steps;
        const double c1 = 1.0 - std::pow(options.beta1, static_cast<double>(p.steps));
        const double c2 = 1.0 - std::pow(options.beta2, static_cast<double>(p.steps));
        auto value = p.value.values();
        auto grad = p.grad.values();
        auto m = p.m.values();
        auto v = p.v.values();
        for (std::size_t i = 0; i < value.size(); ++i) {
            m[i] = options.beta1 * m[i] + (1.0 - options.beta1) * grad[i];
            v[i] = options.beta2 * v[i] + (1.0 - options.beta2) * grad[i] * grad[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            value[i] -= options.learning_rate * m_hat / (std::sqrt(v_hat) + options.epsilon);
        }
        p.grad.fill(0.0);
        p.has_grad = false;
    }
    if (!any) {
        throw StateError("adam_step: no parameter has a populated gradient");
    }
}

namespace {

nlohmann::json array_to_json(const Array& a) {
    return {{"shape", a.shape()}, {"data", std::vector<double>(a.values().begin(), a.values().end())}};
}

Array array_from_json(const nlohmann::json& j) {
    return Array(j.at("shape").get<std::vector<std::size_t>>(), j.at("data").get<std::vector<double>>());
}

} // namespace

void write_checkpoint(std::ostream& out, const ParamStore& store, const nlohmann::json& meta) {
    nlohmann::json params = nlohmann::json::object();
    for (const auto& [name, p] : store.parameters()) {
        params[name] = {{"value", array_to_json(p.value)},
                        {"m", array_to_json(p.m)},
                        {"v", array_to_json(p.v)},
                        {"steps", p.steps}};
    }
    nlohmann::json doc{{"meta", meta}, {"params", std::move(params)}};
    out << kCheckpointHeader << '\n' << doc.dump() << '\n';
    if (!out) {
        throw IoError("checkpoint write failed");
    }
}

nlohmann::json read_checkpoint(std::istream& in, ParamStore& store) {
    std::string header;
    std::getline(in, header);
    if (header != kCheckpointHeader) {
        throw ParseError("checkpoint: expected header '" + std::string(kCheckpointHeader) + "', got '" +
                         header + "'");
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("checkpoint: ") + e.what());
    }
    for (const auto& [name, entry] : doc.at("params").items()) {
        Parameter& p = store.set(name, array_from_json(entry.at("value")));
        p.m = array_from_json(entry.at("m"));
        p.v = array_from_json(entry.at("v"));
        p.steps = entry.at("steps").get<std::uint64_t>();
    }
    return doc.at("meta");
}

} // namespace pngnn::diff
