#include "mtlprune/binary_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mtlprune/error.hpp"

namespace mtlprune {

namespace {

std::uint32_t to_le(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::big)
        return ((v & 0xffU) << 24) | ((v & 0xff00U) << 8) | ((v >> 8) & 0xff00U) | (v >> 24);
    return v;
}

template <typename T>
void write_le(const std::filesystem::path& path, std::span<const T> values) {
    static_assert(sizeof(T) == 4);
    std::vector<std::uint32_t> words(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) words[i] = to_le(std::bit_cast<std::uint32_t>(values[i]));
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(words.data()), static_cast<std::streamsize>(words.size() * 4));
    if (!out) throw IoError("failed writing " + path.string());
}

template <typename T>
std::vector<T> read_le(const std::filesystem::path& path, std::size_t expected) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError("cannot open " + path.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    if (bytes != expected * 4)
        throw IoError(path.string() + ": expected " + std::to_string(expected * 4) + " bytes, found " +
                      std::to_string(bytes));
    in.seekg(0);
    std::vector<std::uint32_t> words(expected);
    in.read(reinterpret_cast<char*>(words.data()), static_cast<std::streamsize>(bytes));
    if (!in) throw IoError("failed reading " + path.string());
    std::vector<T> out(expected);
    for (std::size_t i = 0; i < expected; ++i) out[i] = std::bit_cast<T>(to_le(words[i]));
    return out;
}

}  // namespace

std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_le_f32(const std::filesystem::path& path, std::span<const float> values) { write_le(path, values); }
void write_le_i32(const std::filesystem::path& path, std::span<const std::int32_t> values) { write_le(path, values); }
std::vector<float> read_le_f32(const std::filesystem::path& path, std::size_t n) { return read_le<float>(path, n); }
std::vector<std::int32_t> read_le_i32(const std::filesystem::path& path, std::size_t n) {
    return read_le<std::int32_t>(path, n);
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out << text;
        if (!out) throw IoError("failed writing " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace mtlprune
