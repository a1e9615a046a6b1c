#include "mtlprune/multitask.hpp"

#include <algorithm>
#include <cmath>

#include "mtlprune/error.hpp"

namespace mtlprune {

template <typename Real>
TaskTarget<Real> Batch<Real>::target(TaskKind kind) const {
    TaskTarget<Real> t;
    t.kind = kind;
    switch (kind) {
        case TaskKind::segmentation: t.labels = seg; break;
        case TaskKind::depth: t.values = depth; break;
        case TaskKind::normals: t.values = normals; break;
    }
    return t;
}

template <typename Real>
TaskLosses<Real> record_task_losses(const MTLModel<Real>& model, Tape<Real>& tape, const Batch<Real>& batch,
                                    Mode mode, const std::vector<Real>& task_scales) {
    if (!task_scales.empty() && task_scales.size() != model.num_tasks()) {
        throw ShapeError("task scale count does not match the number of tasks");
    }
    TaskLosses<Real> out;
    out.pass = model.forward(tape, batch.images, mode);
    for (std::size_t t = 0; t < model.num_tasks(); ++t) {
        Var<Real> loss = loss_for_task(out.pass.predictions[t], batch.target(model.head(t).spec.kind));
        if (!task_scales.empty() && task_scales[t] != Real(1)) loss = scale(loss, task_scales[t]);
        out.per_task.push_back(loss);
    }
    out.total = out.per_task[0];
    for (std::size_t t = 1; t < out.per_task.size(); ++t) out.total = add(out.total, out.per_task[t]);
    return out;
}

template <typename Real>
ParamGrads<Real> TaskGradients<Real>::total() const {
    if (per_task.empty()) return {};
    ParamGrads<Real> sum = per_task[0];
    for (std::size_t t = 1; t < per_task.size(); ++t)
        for (std::size_t s = 0; s < sum.size(); ++s) sum[s] += per_task[t][s];
    return sum;
}

template <typename Real>
TaskGradients<Real> task_gradients(const MTLModel<Real>& model, const Batch<Real>& batch, Mode mode,
                                   const std::vector<Real>& task_scales) {
    Tape<Real> tape;
    auto losses = record_task_losses(model, tape, batch, mode, task_scales);
    TaskGradients<Real> out;
    for (const auto& loss : losses.per_task) {
        out.per_task.push_back(tape.backward(loss));
        out.losses.push_back(loss.value()[0]);
    }
    out.pass = std::move(losses.pass);
    return out;
}

template <typename Real>
ParamGrads<Real> total_gradient(const MTLModel<Real>& model, const Batch<Real>& batch, Mode mode,
                                std::vector<double>* losses, ForwardPass<Real>* pass) {
    Tape<Real> tape;
    auto recorded = record_task_losses(model, tape, batch, mode);
    if (losses) {
        losses->clear();
        for (const auto& l : recorded.per_task) losses->push_back(l.value()[0]);
    }
    auto grads = tape.backward(recorded.total);
    if (pass) *pass = std::move(recorded.pass);
    return grads;
}

template <typename Real>
std::vector<Real> filter_gradient(const MTLModel<Real>& model, const ParamGrads<Real>& grads, const FilterCoord& c) {
    if (!model.contains(c)) throw PruneError("unknown filter coordinate " + to_string(c));
    const Tensor<Real>& g = grads.at(model.weight_slot(static_cast<std::size_t>(c.layer)));
    const std::size_t block = g.numel() / g.dim(0);
    const auto* begin = g.data().data() + static_cast<std::size_t>(c.filter) * block;
    return std::vector<Real>(begin, begin + block);
}

template <typename Real>
FilterTaskGrads<Real> filter_view(const MTLModel<Real>& model, const std::vector<ParamGrads<Real>>& per_task) {
    FilterTaskGrads<Real> out;
    for (const auto& c : model.filters()) {
        auto& slot = out[c];
        for (const auto& g : per_task) slot.push_back(filter_gradient(model, g, c));
    }
    return out;
}

template <typename Real>
FilterTaskGrads<Real> per_task_filter_grads(const MTLModel<Real>& model, const Batch<Real>& batch, Mode mode) {
    return filter_view(model, task_gradients(model, batch, mode).per_task);
}

double model_grad_check(const MTLModel<double>& model, const Batch<double>& batch, double eps,
                        std::size_t max_coords_per_slot, Mode mode) {
    const ParamGrads<double> analytic = total_gradient(model, batch, mode);
    MTLModel<double> probe = model;
    auto params = probe.parameters();
    auto loss_at = [&]() {
        Tape<double> tape;
        return record_task_losses(probe, tape, batch, mode).total.value()[0];
    };
    double worst = 0.0;
    for (std::size_t s = 0; s < params.size(); ++s) {
        Tensor<double>& t = *params[s].tensor;
        const std::size_t n = t.numel();
        const std::size_t count = max_coords_per_slot == 0 ? n : std::min(n, max_coords_per_slot);
        for (std::size_t j = 0; j < count; ++j) {
            const std::size_t i = count == n ? j : (j * n) / count;
            const double saved = t[i];
            t[i] = saved + eps;
            const double up = loss_at();
            t[i] = saved - eps;
            const double down = loss_at();
            t[i] = saved;
            const double numeric = (up - down) / (2.0 * eps);
            const double a = analytic[s][i];
            worst = std::max(worst, std::abs(a - numeric) / std::max(1.0, std::abs(a)));
        }
    }
    return worst;
}

#define MTLPRUNE_INSTANTIATE_MULTITASK(Real)                                                                       \
    template struct Batch<Real>;                                                                                   \
    template struct TaskGradients<Real>;                                                                           \
    template TaskLosses<Real> record_task_losses(const MTLModel<Real>&, Tape<Real>&, const Batch<Real>&, Mode,     \
                                                 const std::vector<Real>&);                                       \
    template TaskGradients<Real> task_gradients(const MTLModel<Real>&, const Batch<Real>&, Mode,                   \
                                                const std::vector<Real>&);                                        \
    template ParamGrads<Real> total_gradient(const MTLModel<Real>&, const Batch<Real>&, Mode, std::vector<double>*, \
                                             ForwardPass<Real>*);                                                 \
    template std::vector<Real> filter_gradient(const MTLModel<Real>&, const ParamGrads<Real>&, const FilterCoord&); \
    template FilterTaskGrads<Real> filter_view(const MTLModel<Real>&, const std::vector<ParamGrads<Real>>&);       \
    template FilterTaskGrads<Real> per_task_filter_grads(const MTLModel<Real>&, const Batch<Real>&, Mode);

MTLPRUNE_INSTANTIATE_MULTITASK(float)
MTLPRUNE_INSTANTIATE_MULTITASK(double)

}  // namespace mtlprune
