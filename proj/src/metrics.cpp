#include "mtlprune/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "mtlprune/error.hpp"
#include "mtlprune/losses.hpp"

namespace mtlprune {

namespace {

// Absorbs acos rounding so an angle constructed to sit on a threshold counts as within it.
constexpr double kAngleSlackDeg = 1e-9;

void require_same_length(std::size_t a, std::size_t b, const char* what) {
    if (a != b)
        throw ShapeError(std::string(what) + ": prediction has " + std::to_string(a) + " pixels, ground truth has " +
                         std::to_string(b));
    if (a == 0) throw ShapeError(std::string(what) + ": no pixels");
}

}  // namespace

const std::array<std::string_view, MetricsReport::kColumns>& MetricsReport::column_names() {
    static const std::array<std::string_view, kColumns> names{
        "pixel_acc",  "miou",       "depth_abs",        "depth_rel",       "delta_1_25",      "delta_1_25_2",
        "delta_1_25_3", "angle_mean", "angle_median", "within_11_25", "within_22_5", "within_30"};
    return names;
}

const std::array<bool, MetricsReport::kColumns>& MetricsReport::higher_is_better() {
    static const std::array<bool, kColumns> up{true, true, false, false, true, true, true, false, false, true, true, true};
    return up;
}

std::array<double, MetricsReport::kColumns> MetricsReport::values() const {
    return {seg.pixel_accuracy,     seg.miou,
            depth.abs_err,          depth.rel_err,
            depth.delta_within[0],  depth.delta_within[1],
            depth.delta_within[2],  normals.angle_mean_deg,
            normals.angle_median_deg, normals.within[0],
            normals.within[1],      normals.within[2]};
}

MetricsReport MetricsReport::from_values(const std::array<double, kColumns>& v) {
    MetricsReport r;
    r.seg = {v[0], v[1]};
    r.depth = {v[2], v[3], {v[4], v[5], v[6]}};
    r.normals = {v[7], v[8], {v[9], v[10], v[11]}};
    return r;
}

SegMetrics seg_metrics(std::span<const std::int32_t> pred, std::span<const std::int32_t> gt, int classes) {
    require_same_length(pred.size(), gt.size(), "seg_metrics");
    if (classes < 1) throw Error("seg_metrics: class count must be positive");
    const auto c = static_cast<std::size_t>(classes);
    std::vector<std::size_t> tp(c, 0), pred_count(c, 0), gt_count(c, 0);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const auto p = pred[i], g = gt[i];
        if (p < 0 || p >= classes || g < 0 || g >= classes)
            throw Error("seg_metrics: label out of range at pixel " + std::to_string(i));
        ++pred_count[static_cast<std::size_t>(p)];
        ++gt_count[static_cast<std::size_t>(g)];
        if (p == g) {
            ++correct;
            ++tp[static_cast<std::size_t>(p)];
        }
    }
    double iou_sum = 0.0;
    std::size_t present = 0;
    for (std::size_t k = 0; k < c; ++k) {
        const std::size_t uni = pred_count[k] + gt_count[k] - tp[k];
        if (uni == 0) continue;
        iou_sum += static_cast<double>(tp[k]) / static_cast<double>(uni);
        ++present;
    }
    return {static_cast<double>(correct) / static_cast<double>(pred.size()), iou_sum / static_cast<double>(present)};
}

DepthMetrics depth_metrics(std::span<const double> pred, std::span<const double> gt) {
    require_same_length(pred.size(), gt.size(), "depth_metrics");
    DepthMetrics m;
    std::array<std::size_t, 3> within{};
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double g = gt[i];
        if (!(g > 0.0)) throw Error("depth_metrics: ground truth must be positive at pixel " + std::to_string(i));
        const double p = std::max(pred[i], kDepthClamp);
        const double err = std::abs(p - g);
        m.abs_err += err;
        m.rel_err += err / g;
        const double delta = std::max(p / g, g / p);
        for (std::size_t k = 0; k < 3; ++k)
            if (delta <= kDeltaThresholds[k]) ++within[k];
    }
    const auto n = static_cast<double>(pred.size());
    m.abs_err /= n;
    m.rel_err /= n;
    for (std::size_t k = 0; k < 3; ++k) m.delta_within[k] = static_cast<double>(within[k]) / n;
    return m;
}

NormalMetrics normal_metrics(std::span<const Normal> pred, std::span<const Normal> gt) {
    require_same_length(pred.size(), gt.size(), "normal_metrics");
    std::vector<double> angles(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const auto& p = pred[i];
        const double norm = std::max(std::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2]), kNormalEps);
        const double cosine = (p[0] * gt[i][0] + p[1] * gt[i][1] + p[2] * gt[i][2]) / norm;
        angles[i] = std::acos(std::clamp(cosine, -1.0, 1.0)) * 180.0 / std::numbers::pi;
    }
    NormalMetrics m;
    std::array<std::size_t, 3> within{};
    for (double a : angles) {
        m.angle_mean_deg += a;
        for (std::size_t k = 0; k < 3; ++k)
            if (a <= kAngleThresholdsDeg[k] + kAngleSlackDeg) ++within[k];
    }
    const auto n = static_cast<double>(angles.size());
    m.angle_mean_deg /= n;
    for (std::size_t k = 0; k < 3; ++k) m.within[k] = static_cast<double>(within[k]) / n;
    const std::size_t mid = (angles.size() - 1) / 2;
    std::nth_element(angles.begin(), angles.begin() + static_cast<std::ptrdiff_t>(mid), angles.end());
    m.angle_median_deg = angles[mid];
    return m;
}

}  // namespace mtlprune
