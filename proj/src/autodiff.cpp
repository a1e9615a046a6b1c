#include "mtlprune/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "mtlprune/error.hpp"

namespace mtlprune {

template <typename Real>
Var<Real> Tape<Real>::constant(Tensor<Real> value) {
    nodes_.push_back(Node{std::move(value), {}, {}, false, std::nullopt});
    return Var<Real>{this, nodes_.size() - 1};
}

template <typename Real>
Var<Real> Tape<Real>::parameter(Tensor<Real> value, std::size_t slot) {
    nodes_.push_back(Node{std::move(value), {}, {}, true, slot});
    slot_count_ = std::max(slot_count_, slot + 1);
    return Var<Real>{this, nodes_.size() - 1};
}

template <typename Real>
Var<Real> Tape<Real>::record(Tensor<Real> value, std::vector<std::size_t> parents, BackwardFn backward) {
#if defined(MTLPRUNE_CHECK_FINITE) || !defined(NDEBUG)
    if (!value.all_finite()) throw Error("non-finite value produced by op at node " + std::to_string(nodes_.size()));
#endif
    bool needs = false;
    for (std::size_t p : parents) {
        if (p >= nodes_.size()) throw Error("tape parent refers to a future node");
        needs = needs || nodes_[p].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), std::move(parents), std::move(backward), needs, std::nullopt});
    return Var<Real>{this, nodes_.size() - 1};
}

template <typename Real>
std::vector<std::optional<Tensor<Real>>> Tape<Real>::sweep(Var<Real> loss, Real seed) const {
    if (loss.tape != this) throw Error("backward: variable belongs to a different tape");
    const auto& root = nodes_.at(loss.id);
    if (root.value.numel() != 1) {
        throw ShapeError("backward: loss must be a scalar, got shape " + shape_to_string(root.value.shape()));
    }
    std::vector<std::optional<Tensor<Real>>> adjoint(loss.id + 1);
    adjoint[loss.id] = Tensor<Real>(root.value.shape(), seed);

    std::vector<Tensor<Real>*> parent_slots;
    for (std::size_t i = loss.id + 1; i-- > 0;) {
        const Node& node = nodes_[i];
        if (!adjoint[i] || !node.requires_grad || !node.backward) continue;
        parent_slots.assign(node.parents.size(), nullptr);
        for (std::size_t k = 0; k < node.parents.size(); ++k) {
            std::size_t p = node.parents[k];
            if (!nodes_[p].requires_grad) continue;
            if (!adjoint[p]) adjoint[p] = Tensor<Real>(nodes_[p].value.shape());
            parent_slots[k] = &*adjoint[p];
        }
        node.backward(*adjoint[i], parent_slots);
        // interior adjoints are no longer needed once propagated
        if (!node.slot) adjoint[i].reset();
    }
    return adjoint;
}

template <typename Real>
ParamGrads<Real> Tape<Real>::backward(Var<Real> loss, Real seed) const {
    auto adjoint = sweep(loss, seed);
    ParamGrads<Real> grads(slot_count_);
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Node& node = nodes_[i];
        if (!node.slot) continue;
        Tensor<Real>& g = grads[*node.slot];
        if (g.empty()) g = Tensor<Real>(node.value.shape());
        if (i < adjoint.size() && adjoint[i]) g += *adjoint[i];
    }
    return grads;
}

template <typename Real>
Tensor<Real> Tape<Real>::gradient_of(Var<Real> loss, Var<Real> wrt) const {
    if (wrt.id == loss.id) return Tensor<Real>(nodes_.at(wrt.id).value.shape(), Real(1));
    if (!nodes_.at(wrt.id).requires_grad) return Tensor<Real>(nodes_[wrt.id].value.shape());
    if (!nodes_[wrt.id].slot) {
        throw Error("gradient_of: only parameter leaves or the root keep their adjoint");
    }
    auto adjoint = sweep(loss, Real(1));
    if (wrt.id < adjoint.size() && adjoint[wrt.id]) return *adjoint[wrt.id];
    return Tensor<Real>(nodes_[wrt.id].value.shape());
}

double grad_check(const std::function<Var<double>(Var<double>)>& fn, const Tensor<double>& point, double eps) {
    Tensor<double> analytic;
    {
        Tape<double> tape;
        auto x = tape.parameter(point, 0);
        auto y = fn(x);
        analytic = tape.backward(y).at(0);
    }
    auto evaluate = [&](const Tensor<double>& at) {
        Tape<double> tape;
        auto x = tape.constant(at);
        return fn(x).value()[0];
    };
    double worst = 0.0;
    Tensor<double> probe = point;
    for (std::size_t i = 0; i < point.numel(); ++i) {
        const double saved = probe[i];
        probe[i] = saved + eps;
        const double up = evaluate(probe);
        probe[i] = saved - eps;
        const double down = evaluate(probe);
        probe[i] = saved;
        const double numeric = (up - down) / (2.0 * eps);
        const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
        worst = std::max(worst, err);
    }
    return worst;
}

template class Tape<float>;
template class Tape<double>;

}  // namespace mtlprune
