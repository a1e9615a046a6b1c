#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string_view>

namespace mtlprune {

using Normal = std::array<double, 3>;

inline constexpr double kDepthClamp = 1e-6;
inline constexpr std::array<double, 3> kDeltaThresholds{1.25, 1.25 * 1.25, 1.25 * 1.25 * 1.25};
inline constexpr std::array<double, 3> kAngleThresholdsDeg{11.25, 22.5, 30.0};

struct SegMetrics {
    double pixel_accuracy = 0.0;
    double miou = 0.0;
};

struct DepthMetrics {
    double abs_err = 0.0;
    double rel_err = 0.0;
    std::array<double, 3> delta_within{};
};

struct NormalMetrics {
    double angle_mean_deg = 0.0;
    double angle_median_deg = 0.0;
    std::array<double, 3> within{};
};

/// Every evaluation number for the three tasks. Flattened, it has twelve
/// columns in the fixed order given by `column_names()`.
struct MetricsReport {
    SegMetrics seg;
    DepthMetrics depth;
    NormalMetrics normals;

    static constexpr std::size_t kColumns = 12;
    static const std::array<std::string_view, kColumns>& column_names();
    /// True when a larger value is better for the column.
    static const std::array<bool, kColumns>& higher_is_better();
    std::array<double, kColumns> values() const;
    static MetricsReport from_values(const std::array<double, kColumns>& v);
};

/// Pixel accuracy and mean IoU. Classes absent from both prediction and
/// ground truth are left out of the mean.
SegMetrics seg_metrics(std::span<const std::int32_t> pred, std::span<const std::int32_t> gt, int classes);

/// Predictions are clamped to at least kDepthClamp before taking ratios; ground truth must be positive.
DepthMetrics depth_metrics(std::span<const double> pred, std::span<const double> gt);

/// Predictions are normalized with an epsilon-clamped norm. The median takes the
/// lower-middle element for even counts. Threshold tests are inclusive.
NormalMetrics normal_metrics(std::span<const Normal> pred, std::span<const Normal> gt);

}  // namespace mtlprune
