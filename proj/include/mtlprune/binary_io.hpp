#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace mtlprune {

class Fnv1a {
public:
    void update(std::span<const std::byte> bytes) {
        for (std::byte b : bytes) {
            h_ ^= static_cast<std::uint64_t>(b);
            h_ *= 1099511628211ULL;
        }
    }
    template <typename T>
    void update_values(std::span<const T> values) {
        update(std::as_bytes(values));
    }
    std::uint64_t value() const { return h_; }

private:
    std::uint64_t h_ = 1469598103934665603ULL;
};

std::string hex64(std::uint64_t v);

/// Whole-file little-endian writers/readers for 4-byte element types.
void write_le_f32(const std::filesystem::path& path, std::span<const float> values);
void write_le_i32(const std::filesystem::path& path, std::span<const std::int32_t> values);
std::vector<float> read_le_f32(const std::filesystem::path& path, std::size_t expected_count);
std::vector<std::int32_t> read_le_i32(const std::filesystem::path& path, std::size_t expected_count);

/// Writes text atomically enough for our purposes: to a temp file, then rename.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace mtlprune
