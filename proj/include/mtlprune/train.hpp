#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtlprune/metrics.hpp"
#include "mtlprune/multitask.hpp"
#include "mtlprune/synth.hpp"

namespace mtlprune {

enum class OptimizerKind { adam, adamw };

std::string optimizer_name(OptimizerKind k);
OptimizerKind parse_optimizer(const std::string& name);

struct OptimizerConfig {
    OptimizerKind kind = OptimizerKind::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // decoupled; only meaningful for adamw
};

void validate_optimizer_config(const OptimizerConfig& cfg);

/// Adaptive-moment optimizer with bias correction. In adamw mode, parameters are
/// first shrunk by lr * weight_decay, then take the moment-scaled step.
template <typename Real>
class Optimizer {
public:
    explicit Optimizer(OptimizerConfig cfg);

    void step(std::span<Tensor<Real>* const> params, std::span<const Tensor<Real>> grads, double lr);
    void step(MTLModel<Real>& model, const ParamGrads<Real>& grads, double lr);
    /// Clears moments and the step counter.
    void reset();

    const OptimizerConfig& config() const { return cfg_; }
    std::uint64_t steps() const { return t_; }
    const std::vector<Tensor<Real>>& first_moments() const { return m_; }
    const std::vector<Tensor<Real>>& second_moments() const { return v_; }

private:
    OptimizerConfig cfg_;
    std::vector<Tensor<Real>> m_, v_;
    std::uint64_t t_ = 0;
};

extern template class Optimizer<float>;
extern template class Optimizer<double>;

/// Cosine annealing from eta0 to eta_min over t_max epochs, advanced once per epoch.
struct CosineSchedule {
    double eta0 = 1e-3;
    double eta_min = 0.0;
    int t_max = 1;
    int epoch = 0;

    void advance() { ++epoch; }
};

double cosine_lr(const CosineSchedule& s);

/// Back to epoch 0 with cleared optimizer state.
template <typename Real>
void rewind(CosineSchedule& schedule, Optimizer<Real>& optimizer) {
    schedule.epoch = 0;
    optimizer.reset();
}

enum class BestPolicy { total_val_loss, pixel_accuracy };

std::string policy_name(BestPolicy p);
BestPolicy parse_policy(const std::string& name);

struct EpochRecord {
    int epoch = 0;
    std::vector<double> train_losses;  // per task
    MetricsReport val;
    double total_val_loss = 0.0;
    double lr = 0.0;
};

/// Index of the best record: argmin of total validation loss or argmax of pixel
/// accuracy, ties to the earliest. Throws on an empty list.
std::size_t select_best_epoch(std::span<const EpochRecord> records, BestPolicy policy);

/// Value of the policy column, oriented so larger is better.
double policy_score(const EpochRecord& r, BestPolicy policy);

struct Evaluation {
    MetricsReport metrics;
    std::vector<double> losses;  // per task, mean over samples
    double total_loss = 0.0;
};

template <typename Real>
Evaluation evaluate(const MTLModel<Real>& model, const Dataset& data, std::span<const std::size_t> indices,
                    std::size_t batch_size = 64);

/// Called after the gradients of each batch are known and before the optimizer step.
template <typename Real>
using GradientHook = std::function<void(const MTLModel<Real>&, const Batch<Real>&, const TaskGradients<Real>&)>;

struct EpochSettings {
    std::size_t batch_size = 16;
    std::uint64_t shuffle_seed = 0;
    int epoch_index = 0;  // feeds the shuffle so each epoch sees a different order
    double bn_momentum = 0.1;
};

/// One pass over `train_indices` on the equally weighted sum of the task losses.
/// With a hook, gradients come from T per-task backward sweeps whose sum drives the
/// update; otherwise from one backward sweep of the total loss.
/// Returns the sample-weighted mean training loss per task.
template <typename Real>
std::vector<double> train_epoch(MTLModel<Real>& model, const Dataset& data, std::span<const std::size_t> train_indices,
                                Optimizer<Real>& optimizer, double lr, const EpochSettings& settings,
                                const GradientHook<Real>& hook = {});

struct TrainConfig {
    int epochs = 30;
    std::size_t batch_size = 16;
    OptimizerConfig optimizer;
    double lr = 1e-3;
    int schedule_epochs = 0;  // cosine period; 0 means `epochs`
    BestPolicy policy = BestPolicy::pixel_accuracy;
    std::uint64_t seed = 0;
    double bn_momentum = 0.1;
};

void validate_train_config(const TrainConfig& cfg);

template <typename Real>
struct TrainResult {
    MTLModel<Real> best_model;
    std::size_t best_epoch = 0;
    std::vector<EpochRecord> records;
    MTLModel<Real> final_model;
};

template <typename Real>
TrainResult<Real> train(MTLModel<Real> model, const Dataset& data, const Split& split, const TrainConfig& cfg,
                        const std::function<void(const EpochRecord&)>& on_epoch = {});

template <typename Real>
struct RetrainRun {
    double lr = 0.0;
    TrainResult<Real> result;
};

template <typename Real>
struct RetrainResult {
    std::vector<RetrainRun<Real>> runs;
    std::size_t best = 0;

    const RetrainRun<Real>& best_run() const { return runs.at(best); }
};

/// Fresh random initialization of the architecture in `alive`, one training run per
/// learning rate. The best run has the best policy value at its best epoch (ties to
/// the earlier entry of `lr_set`).
template <typename Real>
RetrainResult<Real> retrain_from_scratch(const ModelSpec& spec, const std::vector<std::vector<int>>& alive,
                                         const Dataset& data, const Split& split, const TrainConfig& cfg,
                                         std::span<const double> lr_set, std::uint64_t seed,
                                         const std::function<void(double, const EpochRecord&)>& on_epoch = {});

}  // namespace mtlprune
