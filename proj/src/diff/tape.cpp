#include "pngnn/diff/tape.hpp"

#include "pngnn/error.hpp"

#include <cassert>

namespace pngnn::diff {

const Array& Var::value() const {
    assert(tape_ != nullptr);
    return tape_->value_of(id_);
}

Var Tape::constant(Array value) { return push(std::move(value), false, nullptr); }

Var Tape::parameter(Parameter& p) {
    Var v = push(p.value, recording_, nullptr);
    nodes_.back().param = &p;
    return v;
}

Var Tape::push(Array value, bool requires_grad, BackwardFn fn) {
    assert(value.all_finite() && "non-finite value recorded on tape");
    Node node;
    node.value = std::move(value);
    node.requires_grad = recording_ && requires_grad;
    if (node.requires_grad) {
        node.backward = std::move(fn);
    }
    nodes_.push_back(std::move(node));
    return Var(this, nodes_.size() - 1);
}

bool Tape::any_requires_grad(std::initializer_list<Var> inputs) const {
    if (!recording_) {
        return false;
    }
    for (const Var& v : inputs) {
        if (nodes_[v.id()].requires_grad) {
            return true;
        }
    }
    return false;
}

Array& Tape::grad_of(std::size_t id) {
    Node& node = nodes_[id];
    if (!node.grad_live) {
        node.grad = Array(node.value.shape(), std::vector<double>(node.value.size(), 0.0));
        node.grad_live = true;
    }
    return node.grad;
}

void Tape::backward(Var root) {
    if (!recording_) {
        throw StateError("backward called on a non-recording tape");
    }
    if (root.tape() != this || root.value().size() != 1) {
        throw ShapeError("backward: root must be a 1x1 value on this tape");
    }
    grad_of(root.id())[0] += 1.0;
    for (std::size_t i = root.id() + 1; i-- > 0;) {
        Node& node = nodes_[i];
        if (!node.grad_live || !node.requires_grad) {
            continue;
        }
        if (node.backward) {
            node.backward(*this, i);
        }
        if (node.param != nullptr) {
            node.param->grad += node.grad;
            node.param->has_grad = true;
        }
        // Free intermediate gradients as soon as they have been consumed.
        if (node.param == nullptr && i != root.id()) {
            node.grad = Array();
            node.grad_live = false;
        }
    }
}

} // namespace pngnn::diff
