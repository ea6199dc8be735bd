#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pyrocast/common.hpp"

// Shared layout of all pyrocast binary artifacts: 4-byte magic, little-endian
// u32 header length, JSON header, then format-specific payload. The writers
// assume a little-endian host (checked once at startup of file IO).

namespace pyrocast::binio {

inline void require_little_endian() {
    const std::uint32_t probe = 1;
    unsigned char b;
    std::memcpy(&b, &probe, 1);
    if (b != 1) throw format_error("big-endian hosts are not supported by the file formats");
}

template <typename T>
void write_raw(std::ostream& os, const T& v) {
    static_assert(std::is_trivially_copyable_v<T>);
    os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is) {
    static_assert(std::is_trivially_copyable_v<T>);
    T v;
    is.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!is) throw format_error("unexpected end of file");
    return v;
}

template <typename T>
void write_array(std::ostream& os, const T* data, std::size_t n) {
    os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
}

template <typename T>
void read_array(std::istream& is, T* data, std::size_t n) {
    is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
    if (!is) throw format_error("unexpected end of file");
}

inline void write_header(std::ostream& os, const char magic[4], const nlohmann::json& header) {
    require_little_endian();
    os.write(magic, 4);
    std::string txt = header.dump();
    write_raw(os, static_cast<std::uint32_t>(txt.size()));
    os.write(txt.data(), static_cast<std::streamsize>(txt.size()));
}

inline nlohmann::json read_header(std::istream& is, const char magic[4]) {
    require_little_endian();
    char got[4];
    is.read(got, 4);
    if (!is || std::memcmp(got, magic, 4) != 0)
        throw format_error(std::string("bad magic, expected '") + std::string(magic, 4) + "'");
    auto len = read_raw<std::uint32_t>(is);
    std::string txt(len, '\0');
    is.read(txt.data(), len);
    if (!is) throw format_error("truncated header");
    try {
        return nlohmann::json::parse(txt);
    } catch (const nlohmann::json::parse_error& e) {
        throw format_error(std::string("invalid header JSON: ") + e.what());
    }
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw runtime_failure("cannot open '" + path + "' for writing");
    return os;
}

inline std::ifstream open_in(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw runtime_failure("cannot open '" + path + "' for reading");
    return is;
}

// Content hash of an entire file, for idempotence checks.
std::uint64_t file_hash(const std::string& path);

}  // namespace pyrocast::binio
