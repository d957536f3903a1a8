#pragma once

#include "pngnn/diff/ops.hpp"
#include "pngnn/diff/params.hpp"

#include <functional>
#include <string>
#include <vector>

namespace pngnn::diff {

enum class Activation { kRelu, kTanh, kSigmoid, kIdentity };

Var activate(Var x, Activation act);
Activation parse_activation(const std::string& name);
const char* activation_name(Activation act);

// Affine layer `name.w` (in x out) and `name.b` (1 x out).
Var linear(Tape& tape, ParamStore& store, const std::string& name, Var x, std::size_t out);

// Stack of affine layers with `act` between them; the last layer is linear.
// dims = {in, hidden..., out}. Weights are named `name.l<k>.{w,b}`.
Var mlp_forward(Tape& tape, ParamStore& store, const std::string& name, Var x,
                const std::vector<std::size_t>& dims, Activation act);

// Stable negative log-likelihood over one positive logit and n >= 1 negative
// logits: softplus(-pos) + mean(softplus(neg)).
Var nll_loss(Var positive, Var negatives);

struct GradCheckOptions {
    std::size_t samples = 1000;
    double step = 1e-5;
    double tolerance = 1e-4;
    // Coordinates where both gradients are below this magnitude agree by
    // definition; the relative error is meaningless there.
    double abs_floor = 1e-7;
    std::uint64_t seed = 0;
    std::size_t max_resamples = 1000;
};

struct GradCheckReport {
    std::size_t checked = 0;
    std::size_t resampled = 0; // kinks hit at the sample point
    std::size_t below_floor = 0;
    double max_rel_error = 0.0;
    std::string worst_coordinate;
    bool passed = false;
};

// Compares reverse-mode gradients of `loss` with central differences on
// coordinates sampled uniformly over all parameters in `store`.
GradCheckReport finite_diff_check(const std::function<Var(Tape&)>& loss, ParamStore& store,
                                  const GradCheckOptions& options);

} // namespace pngnn::diff
