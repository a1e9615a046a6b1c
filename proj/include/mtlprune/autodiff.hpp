#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mtlprune/tensor.hpp"

namespace mtlprune {

template <typename Real>
class Tape;

/// Handle to a value recorded on a Tape.
template <typename Real>
struct Var {
    Tape<Real>* tape = nullptr;
    std::size_t id = 0;

    const Tensor<Real>& value() const;
    const Shape& shape() const { return value().shape(); }
};

/// Gradients indexed by the parameter slot each leaf was registered with.
template <typename Real>
using ParamGrads = std::vector<Tensor<Real>>;

/// Append-only record of a forward computation. Node parents always have
/// smaller ids, so a reverse sweep over ids is a valid topological order.
///
/// Backward sweeps do not modify the tape; several sweeps from different
/// roots (one per task loss) may be run against one recorded forward pass.
template <typename Real>
class Tape {
public:
    /// Writes the contribution of `grad_out` into each parent's gradient.
    /// A parent slot is nullptr when that parent does not need a gradient.
    using BackwardFn =
        std::function<void(const Tensor<Real>& grad_out, std::span<Tensor<Real>* const> parent_grads)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var<Real> constant(Tensor<Real> value);
    Var<Real> parameter(Tensor<Real> value, std::size_t slot);
    Var<Real> record(Tensor<Real> value, std::vector<std::size_t> parents, BackwardFn backward);

    const Tensor<Real>& value(std::size_t id) const { return nodes_[id].value; }
    bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }
    std::size_t parameter_slots() const noexcept { return slot_count_; }

    /// Reverse sweep from a scalar root. Every registered parameter slot gets
    /// a gradient; slots the root does not depend on get zeros.
    ParamGrads<Real> backward(Var<Real> loss, Real seed = Real(1)) const;

    /// Same sweep, returning the adjoint of an arbitrary node (zeros when unreached).
    Tensor<Real> gradient_of(Var<Real> loss, Var<Real> wrt) const;

private:
    struct Node {
        Tensor<Real> value;
        std::vector<std::size_t> parents;
        BackwardFn backward;
        bool requires_grad = false;
        std::optional<std::size_t> slot;
    };

    std::vector<std::optional<Tensor<Real>>> sweep(Var<Real> loss, Real seed) const;

    std::vector<Node> nodes_;
    std::size_t slot_count_ = 0;
};

template <typename Real>
const Tensor<Real>& Var<Real>::value() const {
    return tape->value(id);
}

/// Central finite-difference check of a scalar program f(x) at `point`:
/// max_i |analytic_i - (f(x + eps e_i) - f(x - eps e_i)) / (2 eps)| / max(1, |analytic_i|).
double grad_check(const std::function<Var<double>(Var<double>)>& fn, const Tensor<double>& point,
                  double eps = 1e-5);

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace mtlprune
