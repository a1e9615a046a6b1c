#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "mtlprune/model.hpp"

namespace mtlprune {

/// Images plus labels for every task kind over N samples.
template <typename Real>
struct Batch {
    Tensor<Real> images;               // [N,3,H,W]
    std::vector<std::int32_t> seg;     // [N*H*W]
    Tensor<Real> depth;                // [N,1,H,W]
    Tensor<Real> normals;              // [N,3,H,W]

    std::size_t size() const { return images.dim(0); }
    TaskTarget<Real> target(TaskKind kind) const;
};

/// Per-task losses recorded on a tape; `total` is their unweighted sum.
template <typename Real>
struct TaskLosses {
    ForwardPass<Real> pass;
    std::vector<Var<Real>> per_task;
    Var<Real> total;
};

template <typename Real>
TaskLosses<Real> record_task_losses(const MTLModel<Real>& model, Tape<Real>& tape, const Batch<Real>& batch,
                                    Mode mode, const std::vector<Real>& task_scales = {});

/// Result of one forward pass followed by T separate backward sweeps.
template <typename Real>
struct TaskGradients {
    std::vector<ParamGrads<Real>> per_task;  // [task][slot]
    std::vector<double> losses;
    ForwardPass<Real> pass;                  // batch statistics for running-stat updates

    /// Sum of the per-task gradients for every slot.
    ParamGrads<Real> total() const;
};

/// `task_scales` optionally multiplies each task loss (all 1 by default).
template <typename Real>
TaskGradients<Real> task_gradients(const MTLModel<Real>& model, const Batch<Real>& batch, Mode mode = Mode::train,
                                   const std::vector<Real>& task_scales = {});

/// Gradient of the total loss from a single backward sweep. Optionally reports the
/// per-task losses and the forward pass (for running-statistics updates).
template <typename Real>
ParamGrads<Real> total_gradient(const MTLModel<Real>& model, const Batch<Real>& batch, Mode mode = Mode::train,
                                std::vector<double>* losses = nullptr, ForwardPass<Real>* pass = nullptr);

/// filter -> T flattened k*k*Cin gradient blocks, one per task.
template <typename Real>
using FilterTaskGrads = std::map<FilterCoord, std::vector<std::vector<Real>>>;

template <typename Real>
FilterTaskGrads<Real> filter_view(const MTLModel<Real>& model, const std::vector<ParamGrads<Real>>& per_task);

template <typename Real>
FilterTaskGrads<Real> per_task_filter_grads(const MTLModel<Real>& model, const Batch<Real>& batch,
                                            Mode mode = Mode::train);

/// Flattened weight gradient block of one filter from a slot-indexed gradient set.
template <typename Real>
std::vector<Real> filter_gradient(const MTLModel<Real>& model, const ParamGrads<Real>& grads, const FilterCoord& c);

/// Central finite-difference check of the total multi-task loss with respect to
/// every parameter (or up to `max_coords_per_slot` evenly spaced coordinates per slot).
double model_grad_check(const MTLModel<double>& model, const Batch<double>& batch, double eps = 1e-5,
                        std::size_t max_coords_per_slot = 0, Mode mode = Mode::train);

}  // namespace mtlprune
