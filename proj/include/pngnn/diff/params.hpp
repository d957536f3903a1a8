#pragma once

#include "pngnn/diff/array.hpp"
#include "pngnn/rng.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

namespace pngnn::diff {

struct Parameter {
    Array value;
    Array grad;
    Array m; // Adam first moment
    Array v; // Adam second moment
    std::uint64_t steps = 0;
    bool has_grad = false;
};

// Named trainable parameters with gradient accumulators and Adam state.
// Parameters are lazily created on first request and initialised from
// uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) using the store's seeded generator.
class ParamStore {
public:
    explicit ParamStore(std::uint64_t seed = 0) : rng_(seed) {}

    Parameter& get_or_init(const std::string& name, std::size_t rows, std::size_t cols,
                           std::size_t fan_in);
    Parameter& set(const std::string& name, Array value);

    bool contains(const std::string& name) const { return params_.count(name) != 0; }
    Parameter& at(const std::string& name);
    const Parameter& at(const std::string& name) const;

    std::map<std::string, Parameter>& parameters() noexcept { return params_; }
    const std::map<std::string, Parameter>& parameters() const noexcept { return params_; }

    std::size_t coordinate_count() const;
    void zero_grad();
    Rng& rng() noexcept { return rng_; }

private:
    std::map<std::string, Parameter> params_;
    Rng rng_;
};

struct AdamOptions {
    double learning_rate = 0.005;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

// One Adam update over every parameter holding a gradient; gradients are
// zeroed afterwards. Throws StateError when no parameter has a gradient.
void adam_step(ParamStore& store, const AdamOptions& options);

inline constexpr const char* kCheckpointHeader = "PNGNN-CKPT-1";

// Checkpoint container: header line, then a JSON document with the metadata,
// parameter values and optimizer state.
void write_checkpoint(std::ostream& out, const ParamStore& store, const nlohmann::json& meta);
nlohmann::json read_checkpoint(std::istream& in, ParamStore& store);

} // namespace pngnn::diff
