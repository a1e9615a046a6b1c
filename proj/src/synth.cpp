#include "mtlprune/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <json.hpp>

#include "mtlprune/binary_io.hpp"
#include "mtlprune/error.hpp"

namespace mtlprune {

namespace {

using json = nlohmann::json;

constexpr std::array<double, 3> kBackgroundTint{0.45, 0.45, 0.45};
constexpr std::array<std::array<double, 3>, 6> kClassTints{{{0.90, 0.30, 0.25},
                                                            {0.30, 0.85, 0.35},
                                                            {0.30, 0.40, 0.90},
                                                            {0.90, 0.85, 0.30},
                                                            {0.80, 0.35, 0.85},
                                                            {0.30, 0.85, 0.85}}};

std::array<double, 3> light_direction() {
    const double l[3] = {-0.35, -0.45, 0.82};
    const double n = std::sqrt(l[0] * l[0] + l[1] * l[1] + l[2] * l[2]);
    return {l[0] / n, l[1] / n, l[2] / n};
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index, std::uint32_t purpose) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), purpose};
    return std::mt19937_64(seq);
}

// Height above ground and unnormalized surface normal of one solid at (x, y), if it covers the point.
bool solid_surface(const Solid& s, double x, double y, double& h, std::array<double, 3>& n) {
    const double dx = x - s.cx, dy = y - s.cy;
    switch (s.kind) {
        case SolidKind::sphere: {
            const double rho2 = dx * dx + dy * dy, r2 = s.radius * s.radius;
            if (rho2 >= r2) return false;
            h = std::sqrt(r2 - rho2);
            n = {dx, dy, h};
            return true;
        }
        case SolidKind::box: {
            if (std::abs(dx) > s.radius || std::abs(dy) > s.half_y) return false;
            h = s.height + s.slope_x * dx + s.slope_y * dy;
            n = {-s.slope_x, -s.slope_y, 1.0};
            return true;
        }
        case SolidKind::cone: {
            const double rho = std::sqrt(dx * dx + dy * dy);
            if (rho >= s.radius) return false;
            h = s.height * (1.0 - rho / s.radius);
            if (rho == 0.0) {
                n = {0.0, 0.0, 1.0};
            } else {
                const double k = s.height / s.radius / rho;
                n = {k * dx, k * dy, 1.0};
            }
            return true;
        }
    }
    return false;
}

json config_to_json(const DatasetConfig& c) {
    return json{{"n_samples", c.n_samples}, {"height", c.height},     {"width", c.width},
                {"classes", c.classes},     {"min_shapes", c.min_shapes}, {"max_shapes", c.max_shapes},
                {"seed", c.seed},           {"d_min", c.d_min},       {"noise", c.noise},
                {"val_fraction", c.val_fraction}};
}

DatasetConfig config_from_json(const json& j) {
    DatasetConfig c;
    c.n_samples = j.at("n_samples").get<std::size_t>();
    c.height = j.at("height").get<int>();
    c.width = j.at("width").get<int>();
    c.classes = j.at("classes").get<int>();
    c.min_shapes = j.at("min_shapes").get<int>();
    c.max_shapes = j.at("max_shapes").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.d_min = j.at("d_min").get<double>();
    c.noise = j.at("noise").get<double>();
    c.val_fraction = j.at("val_fraction").get<double>();
    return c;
}

}  // namespace

void validate_dataset_config(const DatasetConfig& c) {
    if (c.n_samples < 2) throw ConfigError("dataset.n_samples must be at least 2");
    if (c.height < 1 || c.width < 1) throw ConfigError("dataset.height and dataset.width must be positive");
    if (c.classes < 2) throw ConfigError("dataset.classes must be at least 2 (background plus one solid class)");
    if (c.min_shapes < 0 || c.max_shapes < c.min_shapes)
        throw ConfigError("dataset.min_shapes/max_shapes must satisfy 0 <= min <= max");
    if (!(c.d_min > 0.0 && c.d_min < 1.0)) throw ConfigError("dataset.d_min must lie in (0, 1)");
    if (!(c.noise >= 0.0)) throw ConfigError("dataset.noise must be non-negative");
    if (!(c.val_fraction > 0.0 && c.val_fraction < 1.0)) throw ConfigError("dataset.val_fraction must lie in (0, 1)");
}

Sample render_scene(const std::vector<Solid>& solids, int height, int width, double d_min, double noise,
                    std::uint64_t noise_seed) {
    const auto hw = static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
    Sample s;
    s.image.resize(3 * hw);
    s.seg.assign(hw, 0);
    s.depth.assign(hw, 1.0f);
    s.normals.resize(3 * hw);
    const auto light = light_direction();
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);

    for (int i = 0; i < height; ++i) {
        for (int j = 0; j < width; ++j) {
            const double x = (j + 0.5) / width, y = (i + 0.5) / height;
            double top = 0.0;
            const Solid* owner = nullptr;
            std::array<double, 3> normal{0.0, 0.0, 1.0};
            for (const auto& solid : solids) {
                double h;
                std::array<double, 3> n;
                if (solid_surface(solid, x, y, h, n) && h > top) {
                    top = h;
                    owner = &solid;
                    normal = n;
                }
            }
            const double len = std::sqrt(normal[0] * normal[0] + normal[1] * normal[1] + normal[2] * normal[2]);
            for (auto& v : normal) v /= len;

            const auto p = static_cast<std::size_t>(i) * width + j;
            s.seg[p] = owner ? owner->label : 0;
            s.depth[p] = static_cast<float>(owner ? std::max(d_min, 1.0 - top) : 1.0);
            const double lambert = std::max(0.0, normal[0] * light[0] + normal[1] * light[1] + normal[2] * light[2]);
            const auto& tint = owner ? owner->tint : kBackgroundTint;
            for (std::size_t c = 0; c < 3; ++c) {
                s.normals[c * hw + p] = static_cast<float>(normal[c]);
                const double shade = tint[c] * (0.3 + 0.7 * lambert) + (noise > 0.0 ? noise * gauss(rng) : 0.0);
                s.image[c * hw + p] = static_cast<float>(std::clamp(shade, 0.0, 1.0));
            }
        }
    }
    return s;
}

std::vector<Solid> sample_scene(const DatasetConfig& cfg, std::size_t index) {
    auto rng = stream(cfg.seed, index, 1);
    auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    const int count = std::uniform_int_distribution<int>(cfg.min_shapes, cfg.max_shapes)(rng);
    const double max_height = 1.0 - cfg.d_min;
    std::vector<Solid> solids;
    for (int k = 0; k < count; ++k) {
        Solid s;
        s.label = std::uniform_int_distribution<int>(1, cfg.classes - 1)(rng);
        s.kind = static_cast<SolidKind>((s.label - 1) % 3);
        s.cx = uniform(0.15, 0.85);
        s.cy = uniform(0.15, 0.85);
        s.radius = uniform(0.10, 0.22);
        s.half_y = uniform(0.08, 0.20);
        s.height = std::min(uniform(0.15, 0.60), max_height);
        s.slope_x = uniform(-0.3, 0.3);
        s.slope_y = uniform(-0.3, 0.3);
        if (s.kind == SolidKind::box) s.height = std::min(s.height, max_height - 0.3 * (s.radius + s.half_y));
        const auto& base = kClassTints[static_cast<std::size_t>(s.label - 1) % kClassTints.size()];
        for (std::size_t c = 0; c < 3; ++c) s.tint[c] = std::clamp(base[c] + uniform(-0.1, 0.1), 0.0, 1.0);
        solids.push_back(s);
    }
    return solids;
}

Sample generate_sample(const DatasetConfig& cfg, std::size_t index) {
    const std::uint64_t noise_seed = stream(cfg.seed, index, 2)();
    return render_scene(sample_scene(cfg, index), cfg.height, cfg.width, cfg.d_min, cfg.noise, noise_seed);
}

Sample Dataset::sample(std::size_t i) const {
    if (i >= size()) throw Error("sample index " + std::to_string(i) + " out of range");
    const std::size_t hw = pixels();
    Sample s;
    s.image.assign(images.begin() + static_cast<std::ptrdiff_t>(3 * hw * i),
                   images.begin() + static_cast<std::ptrdiff_t>(3 * hw * (i + 1)));
    s.seg.assign(seg.begin() + static_cast<std::ptrdiff_t>(hw * i), seg.begin() + static_cast<std::ptrdiff_t>(hw * (i + 1)));
    s.depth.assign(depth.begin() + static_cast<std::ptrdiff_t>(hw * i),
                   depth.begin() + static_cast<std::ptrdiff_t>(hw * (i + 1)));
    s.normals.assign(normals.begin() + static_cast<std::ptrdiff_t>(3 * hw * i),
                     normals.begin() + static_cast<std::ptrdiff_t>(3 * hw * (i + 1)));
    return s;
}

std::uint64_t Dataset::checksum() const {
    Fnv1a h;
    h.update_values<float>(images);
    h.update_values<std::int32_t>(seg);
    h.update_values<float>(depth);
    h.update_values<float>(normals);
    return h.value();
}

Dataset generate(const DatasetConfig& cfg) {
    validate_dataset_config(cfg);
    Dataset d;
    d.config = cfg;
    const std::size_t hw = d.pixels();
    d.images.reserve(cfg.n_samples * 3 * hw);
    d.seg.reserve(cfg.n_samples * hw);
    d.depth.reserve(cfg.n_samples * hw);
    d.normals.reserve(cfg.n_samples * 3 * hw);
    for (std::size_t i = 0; i < cfg.n_samples; ++i) {
        auto s = generate_sample(cfg, i);
        d.images.insert(d.images.end(), s.image.begin(), s.image.end());
        d.seg.insert(d.seg.end(), s.seg.begin(), s.seg.end());
        d.depth.insert(d.depth.end(), s.depth.begin(), s.depth.end());
        d.normals.insert(d.normals.end(), s.normals.begin(), s.normals.end());
    }
    return d;
}

Split split(std::size_t n, double val_fraction, std::uint64_t seed) {
    if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must lie in (0, 1)");
    const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * val_fraction));
    if (n_val == 0 || n_val >= n) throw ConfigError("split of " + std::to_string(n) + " samples leaves a part empty");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = stream(seed, 0, 3);
    std::shuffle(order.begin(), order.end(), rng);
    Split s;
    s.val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
    s.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
    std::sort(s.val.begin(), s.val.end());
    std::sort(s.train.begin(), s.train.end());
    return s;
}

template <typename Real>
Batch<Real> make_batch(const Dataset& data, std::span<const std::size_t> indices) {
    const std::size_t n = indices.size(), hw = data.pixels();
    const auto h = static_cast<std::size_t>(data.config.height), w = static_cast<std::size_t>(data.config.width);
    if (n == 0) throw Error("make_batch: empty index list");
    Batch<Real> b;
    b.images = Tensor<Real>({n, 3, h, w});
    b.depth = Tensor<Real>({n, 1, h, w});
    b.normals = Tensor<Real>({n, 3, h, w});
    b.seg.resize(n * hw);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = indices[k];
        if (i >= data.size()) throw Error("make_batch: sample index " + std::to_string(i) + " out of range");
        for (std::size_t e = 0; e < 3 * hw; ++e) {
            b.images[k * 3 * hw + e] = static_cast<Real>(data.images[i * 3 * hw + e]);
            b.normals[k * 3 * hw + e] = static_cast<Real>(data.normals[i * 3 * hw + e]);
        }
        for (std::size_t e = 0; e < hw; ++e) {
            b.depth[k * hw + e] = static_cast<Real>(data.depth[i * hw + e]);
            b.seg[k * hw + e] = data.seg[i * hw + e];
        }
    }
    return b;
}

template Batch<float> make_batch(const Dataset&, std::span<const std::size_t>);
template Batch<double> make_batch(const Dataset&, std::span<const std::size_t>);

void save_dataset(const Dataset& data, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
    const auto& c = data.config;
    const auto n = data.size(), h = static_cast<std::size_t>(c.height), w = static_cast<std::size_t>(c.width);
    const auto parts = split(n, c.val_fraction, c.seed);
    write_le_f32(dir / "images.bin", data.images);
    write_le_i32(dir / "seg.bin", data.seg);
    write_le_f32(dir / "depth.bin", data.depth);
    write_le_f32(dir / "normals.bin", data.normals);
    json manifest{{"format", "mtlprune-dataset"},
                  {"format_version", 1},
                  {"config", config_to_json(c)},
                  {"fields",
                   {{"images", {{"file", "images.bin"}, {"dtype", "f32le"}, {"shape", {n, 3, h, w}}}},
                    {"seg", {{"file", "seg.bin"}, {"dtype", "i32le"}, {"shape", {n, h, w}}}},
                    {"depth", {{"file", "depth.bin"}, {"dtype", "f32le"}, {"shape", {n, 1, h, w}}}},
                    {"normals", {{"file", "normals.bin"}, {"dtype", "f32le"}, {"shape", {n, 3, h, w}}}}}},
                  {"split", {{"train", parts.train.size()}, {"val", parts.val.size()}}},
                  {"checksum", hex64(data.checksum())}};
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const std::filesystem::path& dir) {
    json manifest;
    try {
        manifest = json::parse(read_text(dir / "manifest.json"));
        if (manifest.at("format") != "mtlprune-dataset") throw IoError("not a dataset manifest");
        Dataset d;
        d.config = config_from_json(manifest.at("config"));
        validate_dataset_config(d.config);
        const std::size_t hw = d.pixels(), n = d.size();
        d.images = read_le_f32(dir / "images.bin", n * 3 * hw);
        d.seg = read_le_i32(dir / "seg.bin", n * hw);
        d.depth = read_le_f32(dir / "depth.bin", n * hw);
        d.normals = read_le_f32(dir / "normals.bin", n * 3 * hw);
        if (hex64(d.checksum()) != manifest.at("checksum").get<std::string>())
            throw IoError("dataset checksum mismatch in " + dir.string());
        return d;
    } catch (const json::exception& e) {
        throw IoError("malformed dataset manifest in " + dir.string() + ": " + e.what());
    }
}

}  // namespace mtlprune
