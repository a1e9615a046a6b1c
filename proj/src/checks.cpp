#include "mtlprune/checks.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mtlprune/autodiff.hpp"
#include "mtlprune/losses.hpp"
#include "mtlprune/metrics.hpp"
#include "mtlprune/multitask.hpp"
#include "mtlprune/ops.hpp"

namespace mtlprune {

namespace {

Tensor<double> uniform(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<double> t(std::move(shape));
    std::uniform_real_distribution<double> d(lo, hi);
    for (auto& v : t.data()) v = d(rng);
    return t;
}

// <out, c> for a fixed random c, turning any tensor op into a scalar program.
Var<double> project(Var<double> v, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sum(mul_const(v, uniform(v.shape(), rng)));
}

Batch<double> random_batch(std::size_t n, std::size_t h, std::size_t w, int classes, std::mt19937_64& rng) {
    Batch<double> b;
    b.images = uniform({n, 3, h, w}, rng, 0.0, 1.0);
    std::uniform_int_distribution<int> cls(0, classes - 1);
    b.seg.resize(n * h * w);
    for (auto& v : b.seg) v = cls(rng);
    b.depth = uniform({n, 1, h, w}, rng, 0.1, 1.0);
    b.normals = Tensor<double>({n, 3, h, w});
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t p = 0; p < h * w; ++p) {
            const double v[3] = {g(rng), g(rng), std::abs(g(rng)) + 0.5};
            const double norm = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
            for (std::size_t k = 0; k < 3; ++k) b.normals[(i * 3 + k) * h * w + p] = v[k] / norm;
        }
    return b;
}

ModelSpec small_spec(bool normalization) {
    ModelSpec spec;
    spec.backbone.layers = {ConvLayerSpec{3, 3, 1, 1, 1, true}, ConvLayerSpec{4, 3, 1, 1, 1, false}};
    spec.heads = {HeadSpec{TaskKind::segmentation, {1, 2}, 2, 3}, HeadSpec{TaskKind::depth, {1, 2}, 2, 1},
                  HeadSpec{TaskKind::normals, {1, 2}, 2, 3}};
    spec.input_height = 8;
    spec.input_width = 8;
    spec.normalization = normalization;
    return spec;
}

struct LoopMetrics {
    double pixel_acc = 0, miou = 0, abs = 0, rel = 0, mean = 0, median = 0;
    double delta[3]{}, within[3]{};
};

// Straight per-pixel loops with none of the library's bookkeeping.
LoopMetrics loop_metrics(const std::vector<std::int32_t>& sp, const std::vector<std::int32_t>& sg, int classes,
                         const std::vector<double>& dp, const std::vector<double>& dg, const std::vector<Normal>& np,
                         const std::vector<Normal>& ng) {
    LoopMetrics m;
    const double n = static_cast<double>(sp.size());
    for (std::size_t i = 0; i < sp.size(); ++i) m.pixel_acc += (sp[i] == sg[i]) / n;
    double iou_sum = 0.0;
    int present = 0;
    for (int c = 0; c < classes; ++c) {
        int inter = 0, uni = 0;
        for (std::size_t i = 0; i < sp.size(); ++i) {
            inter += sp[i] == c && sg[i] == c;
            uni += sp[i] == c || sg[i] == c;
        }
        if (uni > 0) {
            iou_sum += static_cast<double>(inter) / uni;
            ++present;
        }
    }
    m.miou = iou_sum / present;
    for (std::size_t i = 0; i < dp.size(); ++i) {
        const double p = dp[i] < 1e-6 ? 1e-6 : dp[i];
        m.abs += std::abs(p - dg[i]) / n;
        m.rel += std::abs(p - dg[i]) / dg[i] / n;
        const double ratio = p > dg[i] ? p / dg[i] : dg[i] / p;
        for (int k = 0; k < 3; ++k) m.delta[k] += (ratio <= std::pow(1.25, k + 1)) / n;
    }
    std::vector<double> angles;
    for (std::size_t i = 0; i < np.size(); ++i) {
        const auto& a = np[i];
        const auto& b = ng[i];
        const double cx = a[1] * b[2] - a[2] * b[1], cy = a[2] * b[0] - a[0] * b[2], cz = a[0] * b[1] - a[1] * b[0];
        const double dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        angles.push_back(std::atan2(std::sqrt(cx * cx + cy * cy + cz * cz), dot) * 180.0 / std::numbers::pi);
    }
    const double thresholds[3] = {11.25, 22.5, 30.0};
    for (double a : angles) {
        m.mean += a / n;
        for (int k = 0; k < 3; ++k) m.within[k] += (a <= thresholds[k]) / n;
    }
    std::sort(angles.begin(), angles.end());
    m.median = angles[(angles.size() - 1) / 2];
    return m;
}

}  // namespace

double op_gradient_worst(int seeds) {
    double worst = 0.0;
    auto track = [&](double e) { worst = std::max(worst, e); };
    for (int s = 0; s < seeds; ++s) {
        const auto seed = static_cast<std::uint64_t>(s);
        std::mt19937_64 rng(1000 + seed);
        auto x4 = uniform({2, 3, 6, 6}, rng);
        auto w = uniform({4, 3, 3, 3}, rng);
        auto b = uniform({4}, rng);
        const ConvGeometry geo{1 + s % 2, 1 + s % 3, 1 + s % 2};
        track(grad_check([&](Var<double> x) {
            auto& t = *x.tape;
            return project(conv2d(x, t.constant(w), t.constant(b), geo), seed);
        }, x4));
        track(grad_check([&](Var<double> v) {
            auto& t = *v.tape;
            return project(conv2d(t.constant(x4), v, t.constant(b), geo), seed);
        }, w));
        track(grad_check([&](Var<double> v) {
            auto& t = *v.tape;
            return project(conv2d(t.constant(x4), t.constant(w), v, geo), seed);
        }, b));
        track(grad_check([&](Var<double> x) { return project(relu(x), seed); }, x4));
        track(grad_check([&](Var<double> x) { return project(maxpool2d(x, 2, 2), seed); }, x4));
        track(grad_check([&](Var<double> x) { return project(maxpool2d(x, 3, 2), seed); }, x4));
        auto gamma = uniform({3}, rng, 0.5, 1.5);
        auto beta = uniform({3}, rng);
        track(grad_check([&](Var<double> x) {
            auto& t = *x.tape;
            return project(batch_norm_train(x, t.constant(gamma), t.constant(beta), 1e-5), seed);
        }, x4));
        track(grad_check([&](Var<double> g) {
            auto& t = *g.tape;
            return project(batch_norm_train(t.constant(x4), g, t.constant(beta), 1e-5), seed);
        }, gamma));
        track(grad_check([&](Var<double> bt) {
            auto& t = *bt.tape;
            return project(batch_norm_train(t.constant(x4), t.constant(gamma), bt, 1e-5), seed);
        }, beta));
        const std::vector<double> mean{0.1, -0.2, 0.3}, var{0.5, 1.5, 2.0};
        track(grad_check([&](Var<double> x) {
            auto& t = *x.tape;
            return project(batch_norm_eval(x, t.constant(gamma), t.constant(beta), std::span<const double>(mean),
                                           std::span<const double>(var), 1e-5),
                           seed);
        }, x4));
        auto other = uniform({2, 2, 6, 6}, rng);
        track(grad_check([&](Var<double> x) {
            auto& t = *x.tape;
            std::vector<Var<double>> parts{x, t.constant(other), x};
            return project(concat_channels<double>(parts), seed);
        }, x4));
        track(grad_check([&](Var<double> x) { return project(upsample_nearest(x, 2), seed); }, x4));
        track(grad_check([&](Var<double> x) { return project(add(x, relu(x)), seed); }, x4));
        track(grad_check([&](Var<double> x) { return project(scale(x, -2.5), seed); }, x4));
        track(grad_check([&](Var<double> x) { return project(mul(x, x), seed); }, x4));

        std::vector<std::int32_t> labels(2 * 36);
        std::uniform_int_distribution<int> cls(0, 2);
        for (auto& l : labels) l = cls(rng);
        track(grad_check([&](Var<double> x) { return cross_entropy_loss(x, labels); }, uniform({2, 3, 6, 6}, rng, -3, 3)));
        auto depth_gt = uniform({2, 1, 6, 6}, rng, 0.1, 1.0);
        track(grad_check([&](Var<double> x) { return l1_loss(x, depth_gt); }, uniform({2, 1, 6, 6}, rng)));
        auto batch = random_batch(2, 6, 6, 3, rng);
        track(grad_check([&](Var<double> x) { return cosine_normal_loss(x, batch.normals); }, uniform({2, 3, 6, 6}, rng)));
    }
    return worst;
}

double model_gradient_worst() {
    std::mt19937_64 rng(11);
    double worst = 0.0;
    const auto small = random_batch(2, 8, 8, 3, rng);
    worst = std::max(worst, model_grad_check(MTLModel<double>::build(small_spec(false), 6), small));
    const auto with_norm = MTLModel<double>::build(small_spec(true), 6);
    worst = std::max(worst, model_grad_check(with_norm, small, 1e-5, 0, Mode::train));
    worst = std::max(worst, model_grad_check(with_norm, small, 1e-5, 0, Mode::eval));
    const auto desk_batch = random_batch(1, 32, 32, 4, rng);
    worst = std::max(worst, model_grad_check(MTLModel<double>::build(desk_model_spec(), 6), desk_batch, 1e-5, 3));
    return worst;
}

double metrics_oracle_worst(int instances, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    constexpr std::size_t n = 64;
    constexpr int classes = 5;
    double worst = 0.0;
    for (int it = 0; it < instances; ++it) {
        std::uniform_int_distribution<int> cls(0, classes - 1);
        std::uniform_real_distribution<double> depth(0.05, 1.0), noise(-0.4, 0.4);
        std::normal_distribution<double> g(0.0, 1.0);
        std::vector<std::int32_t> sp(n), sg(n);
        std::vector<double> dp(n), dg(n);
        std::vector<Normal> np(n), ng(n);
        for (std::size_t i = 0; i < n; ++i) {
            sg[i] = cls(rng);
            sp[i] = (rng() % 3 == 0) ? cls(rng) : sg[i];
            dg[i] = depth(rng);
            dp[i] = (rng() % 16 == 0) ? -0.1 : dg[i] * (1.0 + noise(rng));
            Normal t{g(rng), g(rng), std::abs(g(rng)) + 0.3};
            const double tn = std::sqrt(t[0] * t[0] + t[1] * t[1] + t[2] * t[2]);
            for (auto& v : t) v /= tn;
            ng[i] = t;
            // unnormalized prediction near the target
            np[i] = {2.0 * (t[0] + 0.4 * g(rng)), 2.0 * (t[1] + 0.4 * g(rng)), 2.0 * (t[2] + 0.4 * g(rng))};
        }
        const auto s = seg_metrics(sp, sg, classes);
        const auto d = depth_metrics(dp, dg);
        const auto nm = normal_metrics(np, ng);
        const auto o = loop_metrics(sp, sg, classes, dp, dg, np, ng);
        const double diffs[] = {s.pixel_accuracy - o.pixel_acc, s.miou - o.miou,
                                d.abs_err - o.abs,              d.rel_err - o.rel,
                                d.delta_within[0] - o.delta[0], d.delta_within[1] - o.delta[1],
                                d.delta_within[2] - o.delta[2], nm.angle_mean_deg - o.mean,
                                nm.angle_median_deg - o.median, nm.within[0] - o.within[0],
                                nm.within[1] - o.within[1],     nm.within[2] - o.within[2]};
        for (double x : diffs) worst = std::max(worst, std::abs(x));
    }
    return worst;
}

std::string metric_boundary_failure() {
    // delta exactly 1.25 (and its powers) in both directions
    for (int k = 0; k < 3; ++k) {
        const double t = kDeltaThresholds[static_cast<std::size_t>(k)];
        const std::vector<double> gt{1.0, t}, pred{t, 1.0};
        const auto m = depth_metrics(pred, gt);
        if (m.delta_within[static_cast<std::size_t>(k)] != 1.0)
            return "depth ratio exactly at threshold " + std::to_string(k + 1) + " is not counted as within";
        const std::vector<double> over{t * (1.0 + 1e-9), 1.0}, g1{1.0, 1.0};
        if (depth_metrics(over, g1).delta_within[static_cast<std::size_t>(k)] != 0.5)
            return "depth ratio just above threshold " + std::to_string(k + 1) + " is counted as within";
    }
    for (std::size_t k = 0; k < 3; ++k) {
        const double rad = kAngleThresholdsDeg[k] * std::numbers::pi / 180.0;
        const std::vector<Normal> gt{{0.0, 0.0, 1.0}};
        const std::vector<Normal> at{{std::sin(rad), 0.0, std::cos(rad)}};
        if (normal_metrics(at, gt).within[k] != 1.0)
            return "normal error exactly at " + std::to_string(kAngleThresholdsDeg[k]) + " degrees is not within";
        const double past = (kAngleThresholdsDeg[k] + 1e-6) * std::numbers::pi / 180.0;
        const std::vector<Normal> beyond{{std::sin(past), 0.0, std::cos(past)}};
        if (normal_metrics(beyond, gt).within[k] != 0.0)
            return "normal error just past " + std::to_string(kAngleThresholdsDeg[k]) + " degrees is counted as within";
    }
    // a non-positive depth prediction is clamped rather than producing an infinite ratio
    const std::vector<double> zero{0.0}, one{1.0};
    if (!std::isfinite(depth_metrics(zero, one).rel_err)) return "zero depth prediction gives a non-finite error";
    return {};
}

std::vector<CheckOutcome> selftest_checks() {
    std::vector<CheckOutcome> out;
    auto add_check = [&](std::string name, double measured, double limit) {
        out.push_back({std::move(name), measured, limit, measured < limit});
    };
    add_check("op gradients vs finite differences (max rel. error)", op_gradient_worst(), 1e-6);
    add_check("model gradients vs finite differences (max rel. error)", model_gradient_worst(), 1e-6);
    add_check("metrics vs per-pixel loops (max abs. deviation)", metrics_oracle_worst(), 1e-6);
    const std::string boundary = metric_boundary_failure();
    out.push_back({"metric threshold conventions" + (boundary.empty() ? std::string() : ": " + boundary),
                   boundary.empty() ? 0.0 : 1.0, 0.5, boundary.empty()});
    return out;
}

}  // namespace mtlprune
