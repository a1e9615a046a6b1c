#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mtlprune/error.hpp"
#include "mtlprune/metrics.hpp"

using namespace mtlprune;

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;

Normal tilted(double degrees) {
    const double r = degrees / kDeg;
    return {std::sin(r), 0.0, std::cos(r)};
}

// Confusion-matrix oracle for segmentation.
std::pair<double, double> seg_oracle(const std::vector<std::int32_t>& p, const std::vector<std::int32_t>& g, int c) {
    std::vector<std::vector<int>> conf(static_cast<std::size_t>(c), std::vector<int>(static_cast<std::size_t>(c), 0));
    for (std::size_t i = 0; i < p.size(); ++i) ++conf[static_cast<std::size_t>(g[i])][static_cast<std::size_t>(p[i])];
    int diag = 0;
    double iou = 0.0;
    int counted = 0;
    for (int k = 0; k < c; ++k) {
        const auto ku = static_cast<std::size_t>(k);
        diag += conf[ku][ku];
        int row = 0, col = 0;
        for (int j = 0; j < c; ++j) {
            row += conf[ku][static_cast<std::size_t>(j)];
            col += conf[static_cast<std::size_t>(j)][ku];
        }
        const int uni = row + col - conf[ku][ku];
        if (uni == 0) continue;
        iou += static_cast<double>(conf[ku][ku]) / uni;
        ++counted;
    }
    return {static_cast<double>(diag) / static_cast<double>(p.size()), iou / counted};
}

}  // namespace

TEST_CASE("seg_metrics examples") {
    const std::vector<std::int32_t> gt{0, 0, 1, 1}, pred{0, 1, 1, 1};
    auto m = seg_metrics(pred, gt, 2);
    CHECK(m.pixel_accuracy == doctest::Approx(0.75));
    CHECK(m.miou == doctest::Approx((0.5 + 2.0 / 3.0) / 2.0));

    auto same = seg_metrics(gt, gt, 2);
    CHECK(same.pixel_accuracy == 1.0);
    CHECK(same.miou == 1.0);

    const std::vector<std::int32_t> a{0, 0, 0}, b{1, 1, 1};
    auto disjoint = seg_metrics(a, b, 3);
    CHECK(disjoint.pixel_accuracy == 0.0);
    CHECK(disjoint.miou == 0.0);
}

TEST_CASE("seg_metrics excludes classes absent from both maps") {
    const std::vector<std::int32_t> labels{0, 2, 2, 0};
    auto m = seg_metrics(labels, labels, 5);
    CHECK(m.miou == 1.0);
}

TEST_CASE("seg_metrics errors") {
    const std::vector<std::int32_t> a{0, 1}, b{0};
    CHECK_THROWS_AS(seg_metrics(a, b, 2), ShapeError);
    const std::vector<std::int32_t> empty;
    CHECK_THROWS_AS(seg_metrics(empty, empty, 2), ShapeError);
    const std::vector<std::int32_t> bad{0, 3};
    CHECK_THROWS_AS(seg_metrics(bad, a, 2), Error);
}

TEST_CASE("depth_metrics examples") {
    const std::vector<double> gt{0.5, 0.7, 1.0};
    auto same = depth_metrics(gt, gt);
    CHECK(same.abs_err == 0.0);
    CHECK(same.rel_err == 0.0);
    for (double f : same.delta_within) CHECK(f == 1.0);

    const std::vector<double> p{1.25}, g{1.0};
    auto m = depth_metrics(p, g);
    CHECK(m.abs_err == doctest::Approx(0.25));
    CHECK(m.rel_err == doctest::Approx(0.25));
    for (double f : m.delta_within) CHECK(f == 1.0);

    // the ratio is symmetric
    auto flipped = depth_metrics(g, p);
    CHECK(flipped.delta_within[0] == 1.0);
}

TEST_CASE("depth_metrics clamps non-positive predictions and rejects bad ground truth") {
    const std::vector<double> p{-1.0, 0.0}, g{0.5, 0.5};
    auto m = depth_metrics(p, g);
    CHECK(std::isfinite(m.rel_err));
    CHECK(m.abs_err == doctest::Approx(0.5 - kDepthClamp));
    CHECK(m.delta_within[2] == 0.0);
    const std::vector<double> zero_gt{0.0, 1.0};
    CHECK_THROWS_AS(depth_metrics(g, zero_gt), Error);
    const std::vector<double> shorter{1.0};
    CHECK_THROWS_AS(depth_metrics(g, shorter), ShapeError);
}

TEST_CASE("normal_metrics examples") {
    const std::vector<Normal> gt{{0, 0, 1}, {1, 0, 0}, {0, 1, 0}};
    auto same = normal_metrics(gt, gt);
    CHECK(same.angle_mean_deg == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(same.angle_median_deg == doctest::Approx(0.0).epsilon(1e-9));
    for (double f : same.within) CHECK(f == 1.0);

    std::vector<Normal> opposite;
    for (const auto& n : gt) opposite.push_back({-n[0], -n[1], -n[2]});
    auto anti = normal_metrics(opposite, gt);
    CHECK(anti.angle_mean_deg == doctest::Approx(180.0));
    CHECK(anti.angle_median_deg == doctest::Approx(180.0));
    for (double f : anti.within) CHECK(f == 0.0);
}

TEST_CASE("normal thresholds are inclusive at 11.25 and 30 degrees") {
    const std::vector<Normal> gt{{0, 0, 1}, {0, 0, 1}};
    const std::vector<Normal> pred{tilted(11.25), tilted(30.0)};
    auto m = normal_metrics(pred, gt);
    CHECK(m.within[0] == 0.5);
    CHECK(m.within[1] == 0.5);
    CHECK(m.within[2] == 1.0);
    // median takes the lower middle element of an even count
    CHECK(m.angle_median_deg == doctest::Approx(11.25));
}

TEST_CASE("normal predictions are normalized before the angle") {
    const std::vector<Normal> gt{{0, 0, 1}};
    const std::vector<Normal> pred{{0, 0, 7.5}};
    CHECK(normal_metrics(pred, gt).angle_mean_deg == doctest::Approx(0.0));
    const std::vector<Normal> zero{{0, 0, 0}};
    CHECK(normal_metrics(zero, gt).angle_mean_deg == doctest::Approx(90.0));
}

TEST_CASE("all metrics match direct loops on 100 random 8x8 instances") {
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    for (int it = 0; it < 100; ++it) {
        constexpr std::size_t n = 64;
        const int classes = 2 + it % 4;
        std::uniform_int_distribution<int> cls(0, classes - 1);
        std::uniform_real_distribution<double> u(0.1, 1.0), jitter(0.6, 1.5), ang(0.0, 60.0), az(0.0, 2 * std::numbers::pi);
        std::vector<std::int32_t> sp(n), sg(n);
        std::vector<double> dp(n), dg(n), angles(n);
        std::vector<Normal> np(n), ng(n, Normal{0, 0, 1});
        for (std::size_t i = 0; i < n; ++i) {
            sg[i] = cls(rng);
            sp[i] = rng() % 2 ? sg[i] : cls(rng);
            dg[i] = u(rng);
            dp[i] = dg[i] * jitter(rng);
            angles[i] = ang(rng);
            const double r = angles[i] / kDeg, phi = az(rng), len = jitter(rng);
            np[i] = {len * std::sin(r) * std::cos(phi), len * std::sin(r) * std::sin(phi), len * std::cos(r)};
        }
        const auto [acc, miou] = seg_oracle(sp, sg, classes);
        const auto s = seg_metrics(sp, sg, classes);
        worst = std::max({worst, std::abs(s.pixel_accuracy - acc), std::abs(s.miou - miou)});

        double abs_e = 0, rel_e = 0, within_d[3] = {0, 0, 0};
        for (std::size_t i = 0; i < n; ++i) {
            abs_e += std::abs(dp[i] - dg[i]);
            rel_e += std::abs(dp[i] - dg[i]) / dg[i];
            const double d = std::max(dp[i] / dg[i], dg[i] / dp[i]);
            within_d[0] += d <= 1.25;
            within_d[1] += d <= 1.5625;
            within_d[2] += d <= 1.953125;
        }
        const auto d = depth_metrics(dp, dg);
        worst = std::max({worst, std::abs(d.abs_err - abs_e / n), std::abs(d.rel_err - rel_e / n)});
        for (std::size_t k = 0; k < 3; ++k) worst = std::max(worst, std::abs(d.delta_within[k] - within_d[k] / n));

        // the angles were drawn directly, so the oracle needs no trigonometry of its own
        auto sorted = angles;
        std::sort(sorted.begin(), sorted.end());
        double mean = 0, within_n[3] = {0, 0, 0};
        for (double a : angles) {
            mean += a / n;
            within_n[0] += a <= 11.25;
            within_n[1] += a <= 22.5;
            within_n[2] += a <= 30.0;
        }
        const auto nm = normal_metrics(np, ng);
        worst = std::max({worst, std::abs(nm.angle_mean_deg - mean), std::abs(nm.angle_median_deg - sorted[31])});
        for (std::size_t k = 0; k < 3; ++k) worst = std::max(worst, std::abs(nm.within[k] - within_n[k] / n));
    }
    MESSAGE("worst deviation " << worst);
    CHECK(worst < 1e-6);
}

TEST_CASE("fractions are monotone across thresholds and permutation invariant") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    std::vector<double> p(50), g(50);
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = u(rng);
        g[i] = u(rng);
    }
    const auto m = depth_metrics(p, g);
    CHECK(m.delta_within[0] <= m.delta_within[1]);
    CHECK(m.delta_within[1] <= m.delta_within[2]);
    std::vector<std::size_t> order(p.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<double> ps, gs;
    for (auto i : order) {
        ps.push_back(p[i]);
        gs.push_back(g[i]);
    }
    const auto shuffled = depth_metrics(ps, gs);
    CHECK(shuffled.abs_err == doctest::Approx(m.abs_err).epsilon(1e-12));
    CHECK(shuffled.delta_within == m.delta_within);
}

TEST_CASE("report column layout round trips") {
    MetricsReport r;
    r.seg = {0.9, 0.6};
    r.depth = {0.1, 0.2, {0.3, 0.4, 0.5}};
    r.normals = {20.0, 15.0, {0.25, 0.5, 0.75}};
    const auto v = r.values();
    CHECK(v[0] == 0.9);
    CHECK(v[11] == 0.75);
    CHECK(MetricsReport::from_values(v).values() == v);
    CHECK(MetricsReport::column_names()[3] == "depth_rel");
    CHECK_FALSE(MetricsReport::higher_is_better()[7]);
}
