#include "mtlprune/pruning.hpp"

#include <algorithm>
#include <cmath>

#include "mtlprune/error.hpp"

namespace mtlprune {

std::string criterion_name(CriterionKind k) {
    switch (k) {
        case CriterionKind::cosprune: return "cosprune";
        case CriterionKind::taylor_raw: return "taylor_raw";
        case CriterionKind::taylor_squared: return "taylor_squared";
        case CriterionKind::random: return "random";
    }
    return "?";
}

CriterionKind parse_criterion(const std::string& name) {
    if (name == "cosprune") return CriterionKind::cosprune;
    if (name == "taylor" || name == "taylor_squared") return CriterionKind::taylor_squared;
    if (name == "taylor_raw") return CriterionKind::taylor_raw;
    if (name == "random") return CriterionKind::random;
    throw ConfigError("unknown criterion '" + name + "' (expected cosprune, taylor, taylor_raw, taylor_squared or random)");
}

template <typename Real>
double score_cosprune(std::span<const std::vector<Real>> g, bool all_pairs) {
    const std::size_t t = g.size();
    std::vector<double> norms(t);
    for (std::size_t i = 0; i < t; ++i) {
        double s = 0.0;
        for (Real v : g[i]) s += static_cast<double>(v) * v;
        norms[i] = std::sqrt(s);
    }
    std::vector<double> cosines;
    for (std::size_t i = 0; i < t; ++i) {
        for (std::size_t j = i + 1; j < t; ++j) {
            if (g[i].size() != g[j].size()) throw ShapeError("score_cosprune: task gradients differ in length");
            if (norms[i] == 0.0 || norms[j] == 0.0) {
                cosines.push_back(0.0);
                continue;
            }
            double dot = 0.0;
            for (std::size_t k = 0; k < g[i].size(); ++k) dot += static_cast<double>(g[i][k]) * g[j][k];
            cosines.push_back(std::clamp(dot / (norms[i] * norms[j]), -1.0, 1.0));  // rounding can overshoot by an ulp
        }
    }
    // A fixed summation order makes the score exactly invariant to task order.
    std::sort(cosines.begin(), cosines.end());
    double sum = 0.0;
    for (double c : cosines) sum += c;
    if (!all_pairs) return sum;
    double self = 0.0;
    for (double n : norms)
        if (n > 0.0) self += 1.0;
    return 2.0 * sum + self;
}

template <typename Real>
double score_taylor(std::span<const Real> w, std::span<const Real> g, TaylorVariant variant) {
    if (w.size() != g.size())
        throw ShapeError("score_taylor: weights have length " + std::to_string(w.size()) + ", gradient " +
                         std::to_string(g.size()));
    double dot = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) dot += static_cast<double>(w[i]) * g[i];
    return variant == TaylorVariant::raw ? dot : dot * dot;
}

void ImportanceAccumulator::reset(std::span<const FilterCoord> alive) {
    scores_.clear();
    for (const auto& c : alive) scores_[c] = 0.0;
    batches_seen_ = 0;
}

void ImportanceAccumulator::accumulate(const ScoreMap& batch) {
    if (batch.size() != scores_.size())
        throw PruneError("accumulate: " + std::to_string(batch.size()) + " batch scores for " +
                         std::to_string(scores_.size()) + " tracked filters");
    for (const auto& [coord, _] : batch)
        if (!scores_.contains(coord)) throw PruneError("accumulate: untracked filter " + to_string(coord));
    for (const auto& [coord, s] : batch) scores_[coord] += s;
    ++batches_seen_;
}

bool ImportanceAccumulator::all_zero() const {
    return std::all_of(scores_.begin(), scores_.end(), [](const auto& kv) { return kv.second == 0.0; });
}

template <typename Real>
ScoreMap batch_scores(const Criterion& criterion, const MTLModel<Real>& model, const TaskGradients<Real>& grads,
                      std::mt19937_64& rng) {
    ScoreMap out;
    if (criterion.kind == CriterionKind::random) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        for (const auto& c : model.filters()) out[c] = u(rng);
        return out;
    }
    const auto view = filter_view(model, grads.per_task);
    for (const auto& [coord, task_grads] : view) {
        if (criterion.kind == CriterionKind::cosprune) {
            out[coord] = score_cosprune<Real>(task_grads, criterion.cosprune_all_pairs);
            continue;
        }
        std::vector<Real> total = task_grads[0];
        for (std::size_t t = 1; t < task_grads.size(); ++t)
            for (std::size_t i = 0; i < total.size(); ++i) total[i] += task_grads[t][i];
        const auto variant = criterion.kind == CriterionKind::taylor_raw ? TaylorVariant::raw : TaylorVariant::squared;
        out[coord] = score_taylor<Real>(model.filter_weights(coord), total, variant);
    }
    return out;
}

std::vector<FilterCoord> select_victims(const ImportanceAccumulator& acc, int p, std::span<const int> filter_counts,
                                        int min_per_layer) {
    if (p < 1) throw ConfigError("filters per prune step must be at least 1");
    std::vector<std::pair<double, FilterCoord>> ranked;
    ranked.reserve(acc.scores().size());
    for (const auto& [coord, s] : acc.scores()) {
        if (coord.layer < 0 || static_cast<std::size_t>(coord.layer) >= filter_counts.size())
            throw PruneError("select_victims: filter " + to_string(coord) + " outside the model");
        ranked.emplace_back(s, coord);
    }
    std::sort(ranked.begin(), ranked.end());
    std::vector<int> remaining(filter_counts.begin(), filter_counts.end());
    std::vector<FilterCoord> victims;
    for (const auto& [s, coord] : ranked) {
        if (static_cast<int>(victims.size()) == p) break;
        int& left = remaining[static_cast<std::size_t>(coord.layer)];
        if (left - 1 < min_per_layer) continue;
        --left;
        victims.push_back(coord);
    }
    if (static_cast<int>(victims.size()) < p)
        throw PruneError("only " + std::to_string(victims.size()) + " filters can be removed without breaching the " +
                         "per-layer floor of " + std::to_string(min_per_layer) + "; " + std::to_string(p) + " requested");
    return victims;
}

void validate_prune_config(const PruneConfig& c) {
    if (c.filters_per_step < 1) throw ConfigError("prune.filters_per_step must be at least 1");
    if (c.accumulation_epochs < 1) throw ConfigError("prune.accumulation_epochs must be at least 1");
    if (c.schedule_epochs < 0) throw ConfigError("prune.schedule_epochs must be non-negative");
    if (c.schedule_epochs > 0 && c.schedule_epochs < c.accumulation_epochs)
        throw ConfigError("prune.schedule_epochs must cover the accumulation window");
    if (c.batch_size < 1) throw ConfigError("prune.batch_size must be at least 1");
    if (!(c.lr > 0.0)) throw ConfigError("prune.lr must be positive");
    if (c.stop.max_events < 0) throw ConfigError("prune.stop.max_events must be non-negative");
    if (!(c.stop.target_backbone_reduction >= 0.0 && c.stop.target_backbone_reduction < 1.0))
        throw ConfigError("prune.stop.target_backbone_reduction must lie in [0, 1)");
    validate_optimizer_config(c.optimizer);
}

namespace {

template <typename Real>
PruneLevel measure(const MTLModel<Real>& model) {
    PruneLevel level;
    const auto counts = model.count_params();
    level.params = counts.total();
    level.backbone_params = counts.backbone;
    level.flops = model.count_flops(static_cast<std::size_t>(model.spec().input_height),
                                    static_cast<std::size_t>(model.spec().input_width))
                      .total();
    level.filter_counts = model.filter_counts();
    return level;
}

}  // namespace

template <typename Real>
PruneResult<Real> run_iterative(MTLModel<Real> model, const Dataset& data, const Split& split, const PruneConfig& cfg,
                                const PruneCallbacks<Real>& callbacks) {
    validate_prune_config(cfg);
    Optimizer<Real> optimizer(cfg.optimizer);
    CosineSchedule schedule{cfg.lr, 0.0, cfg.schedule_epochs > 0 ? cfg.schedule_epochs : cfg.accumulation_epochs, 0};
    ImportanceAccumulator acc(model.filters());
    std::mt19937_64 score_rng(cfg.criterion.seed);

    PruneHistory history;
    history.base = measure(model);
    {
        const auto ev = evaluate(model, data, split.val);
        history.base.metrics = ev.metrics;
        history.base.total_val_loss = ev.total_loss;
    }
    const std::size_t start_backbone = history.base.backbone_params;

    GradientHook<Real> hook = [&](const MTLModel<Real>& m, const Batch<Real>&, const TaskGradients<Real>& g) {
        acc.accumulate(batch_scores(cfg.criterion, m, g, score_rng));
    };

    int global_epoch = 0;
    for (int step = 0;; ++step) {
        std::vector<EpochRecord> window;
        for (int e = 0; e < cfg.accumulation_epochs; ++e, ++global_epoch) {
            EpochRecord rec;
            rec.epoch = global_epoch;
            rec.lr = cosine_lr(schedule);
            const EpochSettings settings{cfg.batch_size, cfg.seed, global_epoch, cfg.bn_momentum};
            rec.train_losses = train_epoch(model, data, split.train, optimizer, rec.lr, settings, hook);
            schedule.advance();
            const auto ev = evaluate(model, data, split.val);
            rec.val = ev.metrics;
            rec.total_val_loss = ev.total_loss;
            window.push_back(rec);
            if (callbacks.on_epoch) callbacks.on_epoch(step, rec);
        }
        if (callbacks.after_window) callbacks.after_window(step, model);
        if (step > 0) {
            const auto& best = window[select_best_epoch(window, cfg.policy)];
            history.events.back().after.metrics = best.val;
            history.events.back().after.total_val_loss = best.total_val_loss;
        }

        const auto counts = model.count_params();
        const auto& stop = cfg.stop;
        if (stop.max_events > 0 && static_cast<int>(history.events.size()) >= stop.max_events) {
            history.stop_reason = "max_events";
            break;
        }
        if (stop.min_alive_filters > 0 && model.alive_filter_count() <= stop.min_alive_filters) {
            history.stop_reason = "min_alive_filters";
            break;
        }
        if (stop.target_total_params > 0 && counts.total() <= stop.target_total_params) {
            history.stop_reason = "target_total_params";
            break;
        }
        if (stop.target_backbone_reduction > 0.0 &&
            static_cast<double>(counts.backbone) <= (1.0 - stop.target_backbone_reduction) * start_backbone) {
            history.stop_reason = "target_backbone_reduction";
            break;
        }

        std::vector<FilterCoord> victims;
        try {
            victims = select_victims(acc, cfg.filters_per_step, model);
        } catch (const PruneError&) {
            history.stop_reason = "floor_reached";
            break;
        }
        PruneEvent event;
        event.step = step + 1;
        event.victims = victims;
        for (const auto& v : victims)
            event.victim_ids.push_back(
                {v.layer, model.layer(static_cast<std::size_t>(v.layer)).alive[static_cast<std::size_t>(v.filter)]});
        model = model.apply_prune(victims);
        event.after = measure(model);
        history.events.push_back(std::move(event));

        acc.reset(model.filters());
        rewind(schedule, optimizer);
        if (callbacks.after_event)
            callbacks.after_event(PruneProbe<Real>{step + 1, model, acc, cosine_lr(schedule), optimizer.steps()});
    }
    return PruneResult<Real>{std::move(model), std::move(history)};
}

#define MTLPRUNE_INSTANTIATE_PRUNING(Real)                                                                        \
    template double score_cosprune(std::span<const std::vector<Real>>, bool);                                   \
    template double score_taylor(std::span<const Real>, std::span<const Real>, TaylorVariant);                  \
    template ScoreMap batch_scores(const Criterion&, const MTLModel<Real>&, const TaskGradients<Real>&,          \
                                   std::mt19937_64&);                                                            \
    template PruneResult<Real> run_iterative(MTLModel<Real>, const Dataset&, const Split&, const PruneConfig&,   \
                                             const PruneCallbacks<Real>&);

MTLPRUNE_INSTANTIATE_PRUNING(float)
MTLPRUNE_INSTANTIATE_PRUNING(double)

}  // namespace mtlprune
