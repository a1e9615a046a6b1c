#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "mtlprune/error.hpp"
#include "mtlprune/synth.hpp"

using namespace mtlprune;

namespace {

DatasetConfig small_config(std::uint64_t seed) {
    DatasetConfig c;
    c.n_samples = 24;
    c.height = 16;
    c.width = 16;
    c.seed = seed;
    return c;
}

void check_sample_invariants(const Sample& s, int h, int w, int classes, double d_min) {
    const std::size_t hw = static_cast<std::size_t>(h) * w;
    REQUIRE(s.image.size() == 3 * hw);
    REQUIRE(s.seg.size() == hw);
    REQUIRE(s.depth.size() == hw);
    REQUIRE(s.normals.size() == 3 * hw);
    for (float v : s.image) {
        CHECK(v >= 0.0f);
        CHECK(v <= 1.0f);
    }
    for (auto l : s.seg) {
        CHECK(l >= 0);
        CHECK(l < classes);
    }
    for (float d : s.depth) {
        CHECK(d >= static_cast<float>(d_min));
        CHECK(d <= 1.0f);
    }
    for (std::size_t p = 0; p < hw; ++p) {
        const double x = s.normals[p], y = s.normals[hw + p], z = s.normals[2 * hw + p];
        CHECK(std::abs(std::sqrt(x * x + y * y + z * z) - 1.0) < 1e-5);
    }
}

}  // namespace

TEST_CASE("generation is deterministic in (seed, index)") {
    const auto a = generate(small_config(4));
    const auto b = generate(small_config(4));
    CHECK(a.images == b.images);
    CHECK(a.seg == b.seg);
    CHECK(a.depth == b.depth);
    CHECK(a.normals == b.normals);
    CHECK(a.checksum() == b.checksum());
    CHECK(generate(small_config(5)).checksum() != a.checksum());

    // a sample does not depend on how many others are generated
    auto bigger = small_config(4);
    bigger.n_samples = 40;
    const auto big = generate(bigger);
    CHECK(big.sample(7).image == a.sample(7).image);
    CHECK(generate_sample(small_config(4), 7).seg == a.sample(7).seg);
}

TEST_CASE("sphere normal at the apex pixel points up") {
    Solid s;
    s.kind = SolidKind::sphere;
    s.label = 1;
    s.cx = 16.5 / 32.0;
    s.cy = 10.5 / 32.0;
    s.radius = 0.25;
    const Sample out = render_scene({s}, 32, 32, 0.1, 0.0, 1);
    const std::size_t hw = 32 * 32, p = 10 * 32 + 16;
    CHECK(std::abs(out.normals[p]) < 1e-3);
    CHECK(std::abs(out.normals[hw + p]) < 1e-3);
    CHECK(std::abs(out.normals[2 * hw + p] - 1.0) < 1e-3);
    CHECK(out.seg[p] == 1);
    CHECK(out.depth[p] == doctest::Approx(0.75));
    // off-centre pixels tilt away from the centre
    CHECK(out.normals[p + 3] > 0.0f);
    CHECK(out.normals[hw + p - 3 * 32] < 0.0f);
}

TEST_CASE("empty scene is all background") {
    const Sample out = render_scene({}, 8, 8, 0.1, 0.05, 3);
    for (auto l : out.seg) CHECK(l == 0);
    for (float d : out.depth) CHECK(d == 1.0f);
    for (std::size_t p = 0; p < 64; ++p) {
        CHECK(out.normals[p] == 0.0f);
        CHECK(out.normals[64 + p] == 0.0f);
        CHECK(out.normals[128 + p] == 1.0f);
    }
}

TEST_CASE("the highest solid owns a pixel and depth is floored at d_min") {
    Solid low, high;
    low.kind = high.kind = SolidKind::box;
    low.label = 1;
    high.label = 2;
    low.radius = low.half_y = high.radius = high.half_y = 0.4;
    low.height = 0.3;
    high.height = 0.95;
    const Sample out = render_scene({low, high}, 8, 8, 0.1, 0.0, 0);
    const std::size_t centre = 4 * 8 + 4;
    CHECK(out.seg[centre] == 2);
    CHECK(out.depth[centre] == doctest::Approx(0.1));
    const Sample swapped = render_scene({high, low}, 8, 8, 0.1, 0.0, 0);
    CHECK(swapped.seg[centre] == 2);
}

TEST_CASE("sample invariants hold across seeds") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        CAPTURE(seed);
        auto cfg = small_config(seed);
        cfg.classes = 3 + static_cast<int>(seed % 4);
        const auto data = generate(cfg);
        std::set<std::int32_t> labels;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const Sample s = data.sample(i);
            check_sample_invariants(s, cfg.height, cfg.width, cfg.classes, cfg.d_min);
            labels.insert(s.seg.begin(), s.seg.end());
        }
        CHECK(labels.count(0) == 1);
        CHECK(labels.size() > 1);
    }
}

TEST_CASE("split sizes, coverage and determinism") {
    const auto s = split(100, 0.2, 9);
    CHECK(s.train.size() == 80);
    CHECK(s.val.size() == 20);
    std::set<std::size_t> all(s.train.begin(), s.train.end());
    for (auto i : s.val) CHECK(all.insert(i).second);
    CHECK(all.size() == 100);
    CHECK(*all.rbegin() == 99);
    const auto again = split(100, 0.2, 9);
    CHECK(again.train == s.train);
    CHECK(again.val == s.val);
    CHECK(split(100, 0.2, 10).val != s.val);
    CHECK(split(640, 0.2, 0).train.size() == 512);
    CHECK_THROWS_AS(split(10, 0.0, 1), ConfigError);
    CHECK_THROWS_AS(split(10, 1.0, 1), ConfigError);
}

TEST_CASE("invalid dataset configs are rejected") {
    auto c = small_config(1);
    c.classes = 1;
    CHECK_THROWS_AS(validate_dataset_config(c), ConfigError);
    c = small_config(1);
    c.d_min = 0.0;
    CHECK_THROWS_AS(validate_dataset_config(c), ConfigError);
    c = small_config(1);
    c.min_shapes = 3;
    c.max_shapes = 2;
    CHECK_THROWS_AS(validate_dataset_config(c), ConfigError);
}

TEST_CASE("make_batch gathers the requested samples") {
    const auto data = generate(small_config(2));
    const std::vector<std::size_t> idx{3, 0};
    const auto b = make_batch<float>(data, idx);
    CHECK(b.images.shape() == Shape{2, 3, 16, 16});
    const Sample s3 = data.sample(3);
    CHECK(b.images[0] == s3.image[0]);
    CHECK(b.seg[5] == s3.seg[5]);
    CHECK(b.depth[256 + 7] == data.sample(0).depth[7]);
}

TEST_CASE("dataset save and load round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "mtlprune_synth_roundtrip";
    std::filesystem::remove_all(dir);
    const auto data = generate(small_config(8));
    save_dataset(data, dir);
    for (const char* f : {"manifest.json", "images.bin", "seg.bin", "depth.bin", "normals.bin"})
        CHECK(std::filesystem::exists(dir / f));
    const auto back = load_dataset(dir);
    CHECK(back.images == data.images);
    CHECK(back.seg == data.seg);
    CHECK(back.normals == data.normals);
    CHECK(back.config.seed == 8);

    // a corrupted blob is detected
    std::filesystem::resize_file(dir / "depth.bin", 8);
    CHECK_THROWS_AS(load_dataset(dir), IoError);
    std::filesystem::remove_all(dir);
}
