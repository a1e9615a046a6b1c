#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "mtlprune/multitask.hpp"

namespace mtlprune {

struct DatasetConfig {
    std::size_t n_samples = 640;
    int height = 32;
    int width = 32;
    int classes = 4;  // including background
    int min_shapes = 1;
    int max_shapes = 4;
    std::uint64_t seed = 0;
    double d_min = 0.1;
    double noise = 0.03;
    double val_fraction = 0.2;
};

void validate_dataset_config(const DatasetConfig& cfg);

enum class SolidKind { sphere, box, cone };

/// One analytic solid resting on the ground plane. Coordinates are in image
/// units: x and y span [0,1] across the width and height, z points at the camera.
struct Solid {
    int label = 1;
    SolidKind kind = SolidKind::sphere;
    double cx = 0.5;
    double cy = 0.5;
    double radius = 0.2;     // sphere/cone base radius; box half-extent along x
    double half_y = 0.2;     // box half-extent along y
    double height = 0.3;     // cone apex height; box top height at its centre
    double slope_x = 0.0;    // box top tilt
    double slope_y = 0.0;
    std::array<double, 3> tint{1.0, 1.0, 1.0};
};

/// One rendered sample in channel-major float storage.
struct Sample {
    std::vector<float> image;    // [3,H,W] in [0,1]
    std::vector<std::int32_t> seg;  // [H,W]
    std::vector<float> depth;    // [H,W] in [d_min,1]
    std::vector<float> normals;  // [3,H,W], unit length per pixel
};

/// Orthographic top-down render: each pixel takes the highest solid above it.
/// Depth is 1 - height clamped to d_min; background is label 0, depth 1, normal +z.
/// `noise_seed` drives the additive image noise.
Sample render_scene(const std::vector<Solid>& solids, int height, int width, double d_min, double noise,
                    std::uint64_t noise_seed);

/// The random scene used for sample `index`; a pure function of (cfg.seed, index).
std::vector<Solid> sample_scene(const DatasetConfig& cfg, std::size_t index);
Sample generate_sample(const DatasetConfig& cfg, std::size_t index);

struct Dataset {
    DatasetConfig config;
    std::vector<float> images;
    std::vector<std::int32_t> seg;
    std::vector<float> depth;
    std::vector<float> normals;

    std::size_t size() const { return config.n_samples; }
    std::size_t pixels() const { return static_cast<std::size_t>(config.height) * config.width; }
    Sample sample(std::size_t i) const;
    std::uint64_t checksum() const;
};

Dataset generate(const DatasetConfig& cfg);

struct Split {
    std::vector<std::size_t> train;
    std::vector<std::size_t> val;
};

/// Deterministic disjoint split; round(n * val_fraction) samples go to validation.
/// Both index lists are returned in ascending order.
Split split(std::size_t n, double val_fraction, std::uint64_t seed);

template <typename Real>
Batch<Real> make_batch(const Dataset& data, std::span<const std::size_t> indices);

/// manifest.json plus images.bin, seg.bin, depth.bin, normals.bin (little-endian).
void save_dataset(const Dataset& data, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

}  // namespace mtlprune
