#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mtlprune {

/// Worst relative error of central finite differences against reverse-mode
/// gradients over every differentiable op and loss, across `seeds` random draws.
double op_gradient_worst(int seeds = 20);

/// Same measure for the full three-task model: a small model with and without
/// normalization (train and eval modes) and a coordinate sample of the desk model.
double model_gradient_worst();

/// Worst absolute deviation of the library metrics from direct per-pixel loop
/// computations over `instances` random 8x8 scenes.
double metrics_oracle_worst(int instances = 100, std::uint64_t seed = 7);

/// Exact-threshold cases (delta = 1.25, angle = 11.25 degrees, ...) counted as within.
/// Returns an empty string when all hold, else a description of the first failure.
std::string metric_boundary_failure();

struct CheckOutcome {
    std::string name;
    double measured = 0.0;
    double limit = 0.0;
    bool pass = false;
};

/// The suite behind the `selftest` command.
std::vector<CheckOutcome> selftest_checks();

}  // namespace mtlprune
