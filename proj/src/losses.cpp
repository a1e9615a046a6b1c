#include "mtlprune/losses.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "mtlprune/error.hpp"

namespace mtlprune {

std::string_view task_name(TaskKind kind) {
    switch (kind) {
        case TaskKind::segmentation: return "segmentation";
        case TaskKind::depth: return "depth";
        case TaskKind::normals: return "normals";
    }
    return "unknown";
}

TaskKind parse_task_kind(std::string_view name) {
    if (name == "segmentation") return TaskKind::segmentation;
    if (name == "depth") return TaskKind::depth;
    if (name == "normals") return TaskKind::normals;
    throw ConfigError("unknown task kind '" + std::string(name) + "'");
}

template <typename Real>
Var<Real> cross_entropy_loss(Var<Real> logits, const std::vector<std::int32_t>& labels) {
    const Shape& s = logits.shape();
    if (s.size() != 4) throw ShapeError("cross_entropy_loss: logits must be [N,C,H,W], got " + shape_to_string(s));
    const std::size_t n = s[0], c = s[1], hw = s[2] * s[3];
    if (labels.size() != n * hw) {
        throw ShapeError("cross_entropy_loss: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(n * hw) + " pixels");
    }
    const Real* z = logits.value().data().data();
    auto probs = std::make_shared<std::vector<Real>>(n * c * hw);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < hw; ++p) {
            const std::int32_t label = labels[i * hw + p];
            if (label < 0 || static_cast<std::size_t>(label) >= c) {
                throw Error("cross_entropy_loss: class index " + std::to_string(label) + " outside [0, " +
                            std::to_string(c) + ")");
            }
            double zmax = z[(i * c) * hw + p];
            for (std::size_t k = 1; k < c; ++k) zmax = std::max<double>(zmax, z[(i * c + k) * hw + p]);
            double denom = 0.0;
            for (std::size_t k = 0; k < c; ++k) denom += std::exp(z[(i * c + k) * hw + p] - zmax);
            const double log_denom = std::log(denom);
            for (std::size_t k = 0; k < c; ++k) {
                (*probs)[(i * c + k) * hw + p] = static_cast<Real>(std::exp(z[(i * c + k) * hw + p] - zmax) / denom);
            }
            total += zmax + log_denom - z[(i * c + static_cast<std::size_t>(label)) * hw + p];
        }
    }
    const double count = static_cast<double>(n * hw);
    auto backward = [probs, labels, n, c, hw, count](const Tensor<Real>& go, std::span<Tensor<Real>* const> grads) {
        const Real scale = static_cast<Real>(go[0] / count);
        Real* g = grads[0]->data().data();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t k = 0; k < c; ++k)
                for (std::size_t p = 0; p < hw; ++p) {
                    const std::size_t idx = (i * c + k) * hw + p;
                    const Real onehot = static_cast<std::size_t>(labels[i * hw + p]) == k ? Real(1) : Real(0);
                    g[idx] += scale * ((*probs)[idx] - onehot);
                }
    };
    return logits.tape->record(Tensor<Real>({1}, static_cast<Real>(total / count)), {logits.id}, std::move(backward));
}

template <typename Real>
Var<Real> l1_loss(Var<Real> pred, const Tensor<Real>& target) {
    require_same_shape(pred.shape(), target.shape(), "l1_loss");
    const auto p = pred.value().data();
    double total = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) total += std::abs(static_cast<double>(p[i]) - target[i]);
    const double count = static_cast<double>(p.size());
    auto backward = [pred, target, count](const Tensor<Real>& go, std::span<Tensor<Real>* const> grads) {
        const auto p = pred.value().data();
        const Real scale = static_cast<Real>(go[0] / count);
        auto g = grads[0]->data();
        for (std::size_t i = 0; i < p.size(); ++i) {
            const Real diff = p[i] - target[i];
            if (diff > Real(0)) g[i] += scale;
            else if (diff < Real(0)) g[i] -= scale;
        }
    };
    return pred.tape->record(Tensor<Real>({1}, static_cast<Real>(total / count)), {pred.id}, std::move(backward));
}

template <typename Real>
Var<Real> cosine_normal_loss(Var<Real> pred, const Tensor<Real>& target) {
    const Shape& s = pred.shape();
    if (s.size() != 4 || s[1] != 3) throw ShapeError("cosine_normal_loss: prediction must be [N,3,H,W], got " + shape_to_string(s));
    require_same_shape(s, target.shape(), "cosine_normal_loss");
    const std::size_t n = s[0], hw = s[2] * s[3];
    const Real* p = pred.value().data().data();
    const Real* t = target.data().data();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t q = 0; q < hw; ++q) {
            double px[3], tx[3], tnorm = 0.0, pnorm = 0.0;
            for (std::size_t k = 0; k < 3; ++k) {
                px[k] = p[(i * 3 + k) * hw + q];
                tx[k] = t[(i * 3 + k) * hw + q];
                pnorm += px[k] * px[k];
                tnorm += tx[k] * tx[k];
            }
            if (std::abs(std::sqrt(tnorm) - 1.0) > 1e-3) {
                throw Error("cosine_normal_loss: target normal at pixel " + std::to_string(i * hw + q) +
                            " is not unit length");
            }
            const double denom = std::max(std::sqrt(pnorm), kNormalEps);
            total += 1.0 - (px[0] * tx[0] + px[1] * tx[1] + px[2] * tx[2]) / denom;
        }
    }
    const double count = static_cast<double>(n * hw);
    auto backward = [pred, target, n, hw, count](const Tensor<Real>& go, std::span<Tensor<Real>* const> grads) {
        const Real* p = pred.value().data().data();
        const Real* t = target.data().data();
        Real* g = grads[0]->data().data();
        const double scale = go[0] / count;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t q = 0; q < hw; ++q) {
                double px[3], tx[3], pnorm = 0.0;
                for (std::size_t k = 0; k < 3; ++k) {
                    px[k] = p[(i * 3 + k) * hw + q];
                    tx[k] = t[(i * 3 + k) * hw + q];
                    pnorm += px[k] * px[k];
                }
                const double norm = std::sqrt(pnorm);
                if (norm > kNormalEps) {
                    // d/dp of -(p/|p|).t = -(t - nhat (nhat.t)) / |p|
                    double nt = 0.0, nh[3];
                    for (std::size_t k = 0; k < 3; ++k) {
                        nh[k] = px[k] / norm;
                        nt += nh[k] * tx[k];
                    }
                    for (std::size_t k = 0; k < 3; ++k) {
                        g[(i * 3 + k) * hw + q] += static_cast<Real>(-scale * (tx[k] - nh[k] * nt) / norm);
                    }
                } else {
                    for (std::size_t k = 0; k < 3; ++k) {
                        g[(i * 3 + k) * hw + q] += static_cast<Real>(-scale * tx[k] / kNormalEps);
                    }
                }
            }
        }
    };
    return pred.tape->record(Tensor<Real>({1}, static_cast<Real>(total / count)), {pred.id}, std::move(backward));
}

template <typename Real>
Var<Real> loss_for_task(Var<Real> pred, const TaskTarget<Real>& target) {
    switch (target.kind) {
        case TaskKind::segmentation: return cross_entropy_loss(pred, target.labels);
        case TaskKind::depth: return l1_loss(pred, target.values);
        case TaskKind::normals: return cosine_normal_loss(pred, target.values);
    }
    throw Error("loss_for_task: unknown task kind");
}

#define MTLPRUNE_INSTANTIATE_LOSSES(Real)                                                        \
    template Var<Real> cross_entropy_loss(Var<Real>, const std::vector<std::int32_t>&);          \
    template Var<Real> l1_loss(Var<Real>, const Tensor<Real>&);                                  \
    template Var<Real> cosine_normal_loss(Var<Real>, const Tensor<Real>&);                       \
    template Var<Real> loss_for_task(Var<Real>, const TaskTarget<Real>&);

MTLPRUNE_INSTANTIATE_LOSSES(float)
MTLPRUNE_INSTANTIATE_LOSSES(double)

}  // namespace mtlprune
