#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "mtlprune/autodiff.hpp"

namespace mtlprune {

enum class TaskKind { segmentation, depth, normals };

std::string_view task_name(TaskKind kind);
TaskKind parse_task_kind(std::string_view name);

/// Norm floor applied before normalizing predicted normals.
inline constexpr double kNormalEps = 1e-8;

/// Labels for one task over a batch. Segmentation uses `labels` ([N*H*W] class
/// indices); depth ([N,1,H,W]) and normals ([N,3,H,W]) use `values`.
template <typename Real>
struct TaskTarget {
    TaskKind kind = TaskKind::segmentation;
    std::vector<std::int32_t> labels;
    Tensor<Real> values;
};

/// Mean per-pixel softmax cross-entropy of [N,C,H,W] logits.
template <typename Real>
Var<Real> cross_entropy_loss(Var<Real> logits, const std::vector<std::int32_t>& labels);

/// Mean absolute error.
template <typename Real>
Var<Real> l1_loss(Var<Real> pred, const Tensor<Real>& target);

/// Mean of (1 - n_pred . n_gt) over pixels, with n_pred = p / max(|p|, eps).
template <typename Real>
Var<Real> cosine_normal_loss(Var<Real> pred, const Tensor<Real>& target);

template <typename Real>
Var<Real> loss_for_task(Var<Real> pred, const TaskTarget<Real>& target);

}  // namespace mtlprune
