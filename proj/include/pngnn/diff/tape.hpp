#pragma once

#include "pngnn/diff/array.hpp"
#include "pngnn/diff/params.hpp"

#include <cstddef>
#include <deque>
#include <functional>

namespace pngnn::diff {

class Tape;

// Handle to a value recorded on a Tape.
class Var {
public:
    Var() = default;

    const Array& value() const;
    std::size_t rows() const { return value().rows(); }
    std::size_t cols() const { return value().cols(); }
    bool valid() const noexcept { return tape_ != nullptr; }
    Tape* tape() const noexcept { return tape_; }
    std::size_t id() const noexcept { return id_; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

// Reverse-mode recording. Nodes are replayed backwards in recording order.
// A non-recording tape evaluates values only.
class Tape {
public:
    using BackwardFn = std::function<void(Tape&, std::size_t self)>;

    explicit Tape(bool recording = true) : recording_(recording) {}
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Array value);
    // Leaf bound to a stored parameter; backward() accumulates into its grad.
    Var parameter(Parameter& p);

    // Seeds d(root)/d(root) = 1 for a 1x1 root and propagates to every
    // parameter leaf reachable from it.
    void backward(Var root);

    bool recording() const noexcept { return recording_; }
    std::size_t size() const noexcept { return nodes_.size(); }

    // Op-implementation interface.
    Var push(Array value, bool requires_grad, BackwardFn fn);
    const Array& value_of(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    bool any_requires_grad(std::initializer_list<Var> inputs) const;
    Array& grad_of(std::size_t id);

private:
    struct Node {
        Array value;
        Array grad;
        BackwardFn backward;
        Parameter* param = nullptr;
        bool requires_grad = false;
        bool grad_live = false;
    };

    std::deque<Node> nodes_;
    bool recording_;
};

} // namespace pngnn::diff
