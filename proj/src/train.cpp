#include "mtlprune/train.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "mtlprune/error.hpp"

namespace mtlprune {

std::string optimizer_name(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "adamw"; }

OptimizerKind parse_optimizer(const std::string& name) {
    if (name == "adam") return OptimizerKind::adam;
    if (name == "adamw") return OptimizerKind::adamw;
    throw ConfigError("unknown optimizer '" + name + "' (expected adam or adamw)");
}

void validate_optimizer_config(const OptimizerConfig& c) {
    if (!(c.beta1 >= 0.0 && c.beta1 < 1.0) || !(c.beta2 >= 0.0 && c.beta2 < 1.0))
        throw ConfigError("optimizer betas must lie in [0, 1)");
    if (!(c.eps > 0.0)) throw ConfigError("optimizer eps must be positive");
    if (!(c.weight_decay >= 0.0)) throw ConfigError("weight_decay must be non-negative");
    if (c.kind == OptimizerKind::adam && c.weight_decay != 0.0)
        throw ConfigError("weight_decay requires the adamw optimizer");
}

template <typename Real>
Optimizer<Real>::Optimizer(OptimizerConfig cfg) : cfg_(cfg) {
    validate_optimizer_config(cfg_);
}

template <typename Real>
void Optimizer<Real>::reset() {
    m_.clear();
    v_.clear();
    t_ = 0;
}

template <typename Real>
void Optimizer<Real>::step(std::span<Tensor<Real>* const> params, std::span<const Tensor<Real>> grads, double lr) {
    if (params.size() != grads.size())
        throw ShapeError("optimizer step: " + std::to_string(params.size()) + " parameters but " +
                         std::to_string(grads.size()) + " gradients");
    if (m_.empty()) {
        for (auto* p : params) {
            m_.push_back(Tensor<Real>::zeros(p->shape()));
            v_.push_back(Tensor<Real>::zeros(p->shape()));
        }
    } else if (m_.size() != params.size()) {
        throw ShapeError("optimizer state holds " + std::to_string(m_.size()) + " moments for " +
                         std::to_string(params.size()) + " parameters");
    }
    ++t_;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const double shrink = cfg_.kind == OptimizerKind::adamw ? 1.0 - lr * cfg_.weight_decay : 1.0;
    for (std::size_t s = 0; s < params.size(); ++s) {
        Tensor<Real>& p = *params[s];
        require_same_shape(p.shape(), grads[s].shape(), "optimizer gradient");
        require_same_shape(p.shape(), m_[s].shape(), "optimizer moment");
        auto pd = p.data();
        auto gd = grads[s].data();
        auto md = m_[s].data();
        auto vd = v_[s].data();
        for (std::size_t i = 0; i < pd.size(); ++i) {
            const double g = gd[i];
            const double m = b1 * md[i] + (1.0 - b1) * g;
            const double v = b2 * vd[i] + (1.0 - b2) * g * g;
            md[i] = static_cast<Real>(m);
            vd[i] = static_cast<Real>(v);
            const double update = (m / c1) / (std::sqrt(v / c2) + cfg_.eps);
            pd[i] = static_cast<Real>(pd[i] * shrink - lr * update);
        }
    }
}

template <typename Real>
void Optimizer<Real>::step(MTLModel<Real>& model, const ParamGrads<Real>& grads, double lr) {
    auto named = model.parameters();
    std::vector<Tensor<Real>*> params;
    params.reserve(named.size());
    for (auto& p : named) params.push_back(p.tensor);
    step(params, grads, lr);
}

template class Optimizer<float>;
template class Optimizer<double>;

double cosine_lr(const CosineSchedule& s) {
    if (s.t_max < 1) throw ConfigError("cosine schedule period must be at least 1 epoch");
    if (s.epoch < 0 || s.epoch > s.t_max)
        throw Error("cosine schedule epoch " + std::to_string(s.epoch) + " outside [0, " + std::to_string(s.t_max) + "]");
    return s.eta_min +
           0.5 * (s.eta0 - s.eta_min) * (1.0 + std::cos(std::numbers::pi * s.epoch / static_cast<double>(s.t_max)));
}

std::string policy_name(BestPolicy p) { return p == BestPolicy::pixel_accuracy ? "pixel_accuracy" : "total_val_loss"; }

BestPolicy parse_policy(const std::string& name) {
    if (name == "pixel_accuracy") return BestPolicy::pixel_accuracy;
    if (name == "total_val_loss") return BestPolicy::total_val_loss;
    throw ConfigError("unknown best-epoch policy '" + name + "' (expected pixel_accuracy or total_val_loss)");
}

double policy_score(const EpochRecord& r, BestPolicy policy) {
    return policy == BestPolicy::pixel_accuracy ? r.val.seg.pixel_accuracy : -r.total_val_loss;
}

std::size_t select_best_epoch(std::span<const EpochRecord> records, BestPolicy policy) {
    if (records.empty()) throw Error("select_best_epoch: no epoch records");
    std::size_t best = 0;
    for (std::size_t i = 1; i < records.size(); ++i)
        if (policy_score(records[i], policy) > policy_score(records[best], policy)) best = i;
    return best;
}

template <typename Real>
Evaluation evaluate(const MTLModel<Real>& model, const Dataset& data, std::span<const std::size_t> indices,
                    std::size_t batch_size) {
    if (indices.empty()) throw Error("evaluate: empty index list");
    if (batch_size == 0) throw ConfigError("evaluation batch size must be positive");
    const std::size_t hw = data.pixels();
    const std::size_t tasks = model.num_tasks();
    int classes = 0;
    std::vector<std::int32_t> seg_pred, seg_gt;
    std::vector<double> depth_pred, depth_gt;
    std::vector<Normal> normal_pred, normal_gt;
    Evaluation ev;
    ev.losses.assign(tasks, 0.0);

    for (std::size_t start = 0; start < indices.size(); start += batch_size) {
        const auto chunk = indices.subspan(start, std::min(batch_size, indices.size() - start));
        const auto batch = make_batch<Real>(data, chunk);
        Tape<Real> tape;
        const auto rec = record_task_losses(model, tape, batch, Mode::eval);
        const std::size_t n = chunk.size();
        for (std::size_t t = 0; t < tasks; ++t) {
            ev.losses[t] += rec.per_task[t].value()[0] * static_cast<double>(n);
            const Tensor<Real>& pred = rec.pass.predictions[t].value();
            switch (model.head(t).spec.kind) {
                case TaskKind::segmentation: {
                    const std::size_t c = pred.dim(1);
                    classes = static_cast<int>(c);
                    for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t p = 0; p < hw; ++p) {
                            std::size_t arg = 0;
                            for (std::size_t k = 1; k < c; ++k)
                                if (pred[(i * c + k) * hw + p] > pred[(i * c + arg) * hw + p]) arg = k;
                            seg_pred.push_back(static_cast<std::int32_t>(arg));
                            seg_gt.push_back(batch.seg[i * hw + p]);
                        }
                    break;
                }
                case TaskKind::depth:
                    for (std::size_t e = 0; e < n * hw; ++e) {
                        depth_pred.push_back(pred[e]);
                        depth_gt.push_back(batch.depth[e]);
                    }
                    break;
                case TaskKind::normals:
                    for (std::size_t i = 0; i < n; ++i)
                        for (std::size_t p = 0; p < hw; ++p) {
                            Normal a, b;
                            for (std::size_t k = 0; k < 3; ++k) {
                                a[k] = pred[(i * 3 + k) * hw + p];
                                b[k] = batch.normals[(i * 3 + k) * hw + p];
                            }
                            normal_pred.push_back(a);
                            normal_gt.push_back(b);
                        }
                    break;
            }
        }
    }
    for (auto& l : ev.losses) l /= static_cast<double>(indices.size());
    ev.total_loss = std::accumulate(ev.losses.begin(), ev.losses.end(), 0.0);
    if (!seg_pred.empty()) ev.metrics.seg = seg_metrics(seg_pred, seg_gt, classes);
    if (!depth_pred.empty()) ev.metrics.depth = depth_metrics(depth_pred, depth_gt);
    if (!normal_pred.empty()) ev.metrics.normals = normal_metrics(normal_pred, normal_gt);
    return ev;
}

template <typename Real>
std::vector<double> train_epoch(MTLModel<Real>& model, const Dataset& data, std::span<const std::size_t> train_indices,
                                Optimizer<Real>& optimizer, double lr, const EpochSettings& settings,
                                const GradientHook<Real>& hook) {
    if (settings.batch_size == 0) throw ConfigError("batch size must be positive");
    if (train_indices.empty()) throw Error("train_epoch: empty training set");
    std::vector<std::size_t> order(train_indices.begin(), train_indices.end());
    std::seed_seq seq{static_cast<std::uint32_t>(settings.shuffle_seed),
                      static_cast<std::uint32_t>(settings.shuffle_seed >> 32),
                      static_cast<std::uint32_t>(settings.epoch_index), 0x5eedU};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);

    std::vector<double> mean(model.num_tasks(), 0.0);
    for (std::size_t start = 0; start < order.size(); start += settings.batch_size) {
        const std::span<const std::size_t> chunk(order.data() + start,
                                                 std::min(settings.batch_size, order.size() - start));
        const auto batch = make_batch<Real>(data, chunk);
        std::vector<double> losses;
        ParamGrads<Real> grads;
        ForwardPass<Real> pass;
        if (hook) {
            auto tg = task_gradients(model, batch, Mode::train);
            hook(model, batch, tg);
            grads = tg.total();
            losses = tg.losses;
            pass = std::move(tg.pass);
        } else {
            grads = total_gradient(model, batch, Mode::train, &losses, &pass);
        }
        optimizer.step(model, grads, lr);
        if (model.spec().normalization) model.update_running_stats(pass, settings.bn_momentum);
        for (std::size_t t = 0; t < mean.size(); ++t) mean[t] += losses[t] * static_cast<double>(chunk.size());
    }
    for (auto& m : mean) m /= static_cast<double>(order.size());
    return mean;
}

void validate_train_config(const TrainConfig& c) {
    if (c.epochs < 1) throw ConfigError("train.epochs must be at least 1");
    if (c.batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
    if (!(c.lr > 0.0)) throw ConfigError("train.lr must be positive");
    if (c.schedule_epochs < 0) throw ConfigError("train.schedule_epochs must be non-negative");
    if (!(c.bn_momentum > 0.0 && c.bn_momentum <= 1.0)) throw ConfigError("train.bn_momentum must lie in (0, 1]");
    validate_optimizer_config(c.optimizer);
}

template <typename Real>
TrainResult<Real> train(MTLModel<Real> model, const Dataset& data, const Split& split, const TrainConfig& cfg,
                        const std::function<void(const EpochRecord&)>& on_epoch) {
    validate_train_config(cfg);
    Optimizer<Real> optimizer(cfg.optimizer);
    CosineSchedule schedule{cfg.lr, 0.0, cfg.schedule_epochs > 0 ? cfg.schedule_epochs : cfg.epochs, 0};
    TrainResult<Real> out{model, 0, {}, model};
    for (int e = 0; e < cfg.epochs; ++e) {
        EpochRecord rec;
        rec.epoch = e;
        rec.lr = cosine_lr(schedule);
        EpochSettings settings{cfg.batch_size, cfg.seed, e, cfg.bn_momentum};
        rec.train_losses = train_epoch(model, data, split.train, optimizer, rec.lr, settings);
        schedule.advance();
        const auto ev = evaluate(model, data, split.val);
        rec.val = ev.metrics;
        rec.total_val_loss = ev.total_loss;
        out.records.push_back(rec);
        if (select_best_epoch(out.records, cfg.policy) == out.records.size() - 1) {
            out.best_epoch = out.records.size() - 1;
            out.best_model = model;
        }
        if (on_epoch) on_epoch(rec);
    }
    out.final_model = std::move(model);
    return out;
}

template <typename Real>
RetrainResult<Real> retrain_from_scratch(const ModelSpec& spec, const std::vector<std::vector<int>>& alive,
                                         const Dataset& data, const Split& split, const TrainConfig& cfg,
                                         std::span<const double> lr_set, std::uint64_t seed,
                                         const std::function<void(double, const EpochRecord&)>& on_epoch) {
    if (lr_set.empty()) throw ConfigError("retrain lr sweep is empty");
    RetrainResult<Real> out;
    for (double lr : lr_set) {
        TrainConfig run_cfg = cfg;
        run_cfg.lr = lr;
        auto fresh = MTLModel<Real>::build_pruned(spec, alive, seed);
        std::function<void(const EpochRecord&)> cb;
        if (on_epoch) cb = [&](const EpochRecord& r) { on_epoch(lr, r); };
        out.runs.push_back(RetrainRun<Real>{lr, train(std::move(fresh), data, split, run_cfg, cb)});
    }
    auto best_value = [&](const RetrainRun<Real>& run) {
        return policy_score(run.result.records[run.result.best_epoch], cfg.policy);
    };
    for (std::size_t i = 1; i < out.runs.size(); ++i)
        if (best_value(out.runs[i]) > best_value(out.runs[out.best])) out.best = i;
    return out;
}

#define MTLPRUNE_INSTANTIATE_TRAIN(Real)                                                                         \
    template Evaluation evaluate(const MTLModel<Real>&, const Dataset&, std::span<const std::size_t>, std::size_t); \
    template std::vector<double> train_epoch(MTLModel<Real>&, const Dataset&, std::span<const std::size_t>,      \
                                             Optimizer<Real>&, double, const EpochSettings&,                     \
                                             const GradientHook<Real>&);                                         \
    template TrainResult<Real> train(MTLModel<Real>, const Dataset&, const Split&, const TrainConfig&,            \
                                     const std::function<void(const EpochRecord&)>&);                             \
    template RetrainResult<Real> retrain_from_scratch(const ModelSpec&, const std::vector<std::vector<int>>&,     \
                                                      const Dataset&, const Split&, const TrainConfig&,           \
                                                      std::span<const double>, std::uint64_t,                     \
                                                      const std::function<void(double, const EpochRecord&)>&);

MTLPRUNE_INSTANTIATE_TRAIN(float)
MTLPRUNE_INSTANTIATE_TRAIN(double)

}  // namespace mtlprune
