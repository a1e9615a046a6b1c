#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mtlprune/train.hpp"

namespace mtlprune {

enum class CriterionKind { cosprune, taylor_raw, taylor_squared, random };

std::string criterion_name(CriterionKind k);
CriterionKind parse_criterion(const std::string& name);

struct Criterion {
    CriterionKind kind = CriterionKind::cosprune;
    /// Sum cosine similarity over every ordered pair including self-pairs instead of
    /// unordered distinct pairs. Ranking is the same; scores shift by T and double.
    bool cosprune_all_pairs = false;
    std::uint64_t seed = 0;  // random criterion only
};

/// Sum of pairwise cosine similarities between the task gradients of one filter.
/// A zero vector contributes 0 to its pairs; a single task scores 0.
template <typename Real>
double score_cosprune(std::span<const std::vector<Real>> task_grads, bool all_pairs = false);

enum class TaylorVariant { raw, squared };

/// W.g, or its square.
template <typename Real>
double score_taylor(std::span<const Real> weights, std::span<const Real> total_grad, TaylorVariant variant);

using ScoreMap = std::map<FilterCoord, double>;

/// Running per-filter sums of batch scores. Keys are exactly the alive filters.
class ImportanceAccumulator {
public:
    ImportanceAccumulator() = default;
    explicit ImportanceAccumulator(std::span<const FilterCoord> alive) { reset(alive); }

    /// Adds one batch of scores. The key set must match.
    void accumulate(const ScoreMap& batch_scores);
    void reset(std::span<const FilterCoord> alive);

    const ScoreMap& scores() const { return scores_; }
    std::size_t batches_seen() const { return batches_seen_; }
    bool all_zero() const;

private:
    ScoreMap scores_;
    std::size_t batches_seen_ = 0;
};

/// Per-filter scores of one batch under `criterion`. `rng` feeds the random criterion.
template <typename Real>
ScoreMap batch_scores(const Criterion& criterion, const MTLModel<Real>& model, const TaskGradients<Real>& grads,
                      std::mt19937_64& rng);

/// The P filters with the smallest accumulated score, in rank order. Ties fall to
/// (layer, filter) ascending. A filter is skipped when taking it would leave its layer
/// below `min_per_layer`. Throws PruneError when fewer than P filters are removable.
std::vector<FilterCoord> select_victims(const ImportanceAccumulator& acc, int p, std::span<const int> filter_counts,
                                        int min_per_layer);

template <typename Real>
std::vector<FilterCoord> select_victims(const ImportanceAccumulator& acc, int p, const MTLModel<Real>& model) {
    const auto counts = model.filter_counts();
    return select_victims(acc, p, counts, model.spec().min_filters_per_layer);
}

/// Any nonzero field ends the loop once reached.
struct StopCriteria {
    int max_events = 0;
    std::size_t min_alive_filters = 0;
    std::size_t target_total_params = 0;
    double target_backbone_reduction = 0.0;  // fraction of the starting backbone parameters
};

struct PruneConfig {
    Criterion criterion;
    int filters_per_step = 4;
    int accumulation_epochs = 1;
    int schedule_epochs = 0;  // cosine period; 0 means accumulation_epochs
    std::size_t batch_size = 16;
    OptimizerConfig optimizer{OptimizerKind::adamw, 0.9, 0.999, 1e-8, 1e-2};
    double lr = 1e-4;
    BestPolicy policy = BestPolicy::pixel_accuracy;
    std::uint64_t seed = 0;
    double bn_momentum = 0.1;
    StopCriteria stop;
};

void validate_prune_config(const PruneConfig& cfg);

struct PruneLevel {
    std::size_t params = 0;
    std::size_t backbone_params = 0;
    std::uint64_t flops = 0;
    std::vector<int> filter_counts;
    MetricsReport metrics;
    double total_val_loss = 0.0;
};

struct PruneEvent {
    int step = 0;
    std::vector<FilterCoord> victims;       // positions at the time of removal
    std::vector<FilterCoord> victim_ids;    // same filters by original index
    PruneLevel after;                       // metrics: best epoch of the following window
};

struct PruneHistory {
    PruneLevel base;  // model as given, before any fine-tuning
    std::vector<PruneEvent> events;
    std::string stop_reason;
};

/// State visible to an observer right after a prune event and the rewind.
template <typename Real>
struct PruneProbe {
    int step = 0;
    const MTLModel<Real>& model;
    const ImportanceAccumulator& accumulator;
    double lr = 0.0;
    std::uint64_t optimizer_steps = 0;
};

template <typename Real>
struct PruneCallbacks {
    std::function<void(const PruneProbe<Real>&)> after_event;
    /// Step (0 before any event) and the epoch just finished.
    std::function<void(int, const EpochRecord&)> on_epoch;
    /// Step and the model at the end of that step's fine-tune window.
    std::function<void(int, const MTLModel<Real>&)> after_window;
};

template <typename Real>
struct PruneResult {
    MTLModel<Real> model;
    PruneHistory history;
};

/// Iterative prune / fine-tune: fine-tune for E epochs on the total loss while
/// accumulating batch scores, remove the P lowest-scoring filters, reset the
/// accumulator, rewind the schedule and optimizer, and repeat until a stop criterion
/// holds. Every event is followed by one more window whose best epoch is logged.
template <typename Real>
PruneResult<Real> run_iterative(MTLModel<Real> model, const Dataset& data, const Split& split, const PruneConfig& cfg,
                                const PruneCallbacks<Real>& callbacks = {});

}  // namespace mtlprune
