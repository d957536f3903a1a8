#include "pngnn/diff/nn.hpp"

#include "pngnn/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace pngnn::diff {

Var activate(Var x, Activation act) {
    switch (act) {
    case Activation::kRelu:
        return relu(x);
    case Activation::kTanh:
        return tanh(x);
    case Activation::kSigmoid:
        return sigmoid(x);
    case Activation::kIdentity:
        return x;
    }
    return x;
}

Activation parse_activation(const std::string& name) {
    if (name == "relu") {
        return Activation::kRelu;
    }
    if (name == "tanh") {
        return Activation::kTanh;
    }
    if (name == "sigmoid") {
        return Activation::kSigmoid;
    }
    if (name == "identity" || name == "idd") {
        return Activation::kIdentity;
    }
    throw ConfigError("unknown activation '" + name + "'");
}

const char* activation_name(Activation act) {
    switch (act) {
    case Activation::kRelu:
        return "relu";
    case Activation::kTanh:
        return "tanh";
    case Activation::kSigmoid:
        return "sigmoid";
    case Activation::kIdentity:
        return "identity";
    }
    return "?";
}

Var linear(Tape& tape, ParamStore& store, const std::string& name, Var x, std::size_t out) {
    const std::size_t in = x.cols();
    Var w = tape.parameter(store.get_or_init(name + ".w", in, out, in));
    Var b = tape.parameter(store.get_or_init(name + ".b", 1, out, in));
    return add(matmul(x, w), b);
}

Var mlp_forward(Tape& tape, ParamStore& store, const std::string& name, Var x,
                const std::vector<std::size_t>& dims, Activation act) {
    if (dims.size() < 2) {
        throw ShapeError("mlp '" + name + "': needs at least input and output widths");
    }
    if (x.cols() != dims.front()) {
        throw ShapeError("mlp '" + name + "': input width " + std::to_string(x.cols()) + " != " +
                         std::to_string(dims.front()));
    }
    Var h = x;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        h = linear(tape, store, name + ".l" + std::to_string(k), h, dims[k + 1]);
        if (k + 2 < dims.size()) {
            h = activate(h, act);
        }
    }
    return h;
}

Var nll_loss(Var positive, Var negatives) {
    if (positive.value().size() != 1 || negatives.value().size() == 0) {
        throw ShapeError("nll_loss: expects one positive logit and at least one negative");
    }
    return add(softplus(scale(positive, -1.0)), mean(softplus(negatives)));
}

namespace {

double evaluate(const std::function<Var(Tape&)>& loss) {
    Tape tape(false);
    return loss(tape).value()[0];
}

} // namespace

GradCheckReport finite_diff_check(const std::function<Var(Tape&)>& loss, ParamStore& store,
                                  const GradCheckOptions& options) {
    GradCheckReport report;
    store.zero_grad();
    {
        Tape tape;
        tape.backward(loss(tape));
    }
    // Flatten (parameter, coordinate) space.
    std::vector<std::pair<Parameter*, const std::string*>> params;
    std::vector<std::size_t> starts;
    std::size_t total = 0;
    for (auto& [name, p] : store.parameters()) {
        params.emplace_back(&p, &name);
        starts.push_back(total);
        total += p.value.size();
    }
    if (total == 0) {
        report.passed = true;
        return report;
    }
    std::vector<std::size_t> order(total);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(options.seed);
    rng.shuffle(std::span<std::size_t>(order));

    const double h = options.step;
    std::size_t cursor = 0;
    while (report.checked < options.samples && cursor < order.size()) {
        const std::size_t flat = order[cursor++];
        const std::size_t k = static_cast<std::size_t>(
            std::upper_bound(starts.begin(), starts.end(), flat) - starts.begin() - 1);
        Parameter& p = *params[k].first;
        const std::size_t i = flat - starts[k];
        const double analytic = p.has_grad ? p.grad[i] : 0.0;
        const double x0 = p.value[i];
        p.value[i] = x0 + h;
        const double f_plus = evaluate(loss);
        p.value[i] = x0 - h;
        const double f_minus = evaluate(loss);
        p.value[i] = x0;
        const double f_zero = evaluate(loss);
        const double forward_d = (f_plus - f_zero) / h;
        const double backward_d = (f_zero - f_minus) / h;
        const double numeric = (f_plus - f_minus) / (2.0 * h);
        // One-sided slopes that disagree by far more than curvature allows
        // mean a kink (relu at 0, max ties) sits inside the stencil.
        if (std::abs(forward_d - backward_d) > 1e-3 * std::max(1.0, std::abs(numeric))) {
            ++report.resampled;
            if (report.resampled > options.max_resamples) {
                break;
            }
            continue;
        }
        ++report.checked;
        const double scale = std::max(std::abs(analytic), std::abs(numeric));
        if (scale < options.abs_floor) {
            ++report.below_floor;
            continue;
        }
        const double rel = std::abs(analytic - numeric) / scale;
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_coordinate = *params[k].second + "[" + std::to_string(i) + "]";
        }
    }
    store.zero_grad();
    report.passed = report.checked > 0 && report.max_rel_error < options.tolerance;
    return report;
}

} // namespace pngnn::diff
