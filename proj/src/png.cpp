#include "pyrocast/png.hpp"

#include <zlib.h>

#include <array>
#include <cstring>
#include <vector>

#include "pyrocast/binio.hpp"
#include "pyrocast/common.hpp"

namespace pyrocast {

namespace {

void put_be32(unsigned char* out, std::uint32_t v) {
    out[0] = static_cast<unsigned char>(v >> 24);
    out[1] = static_cast<unsigned char>(v >> 16);
    out[2] = static_cast<unsigned char>(v >> 8);
    out[3] = static_cast<unsigned char>(v);
}

void write_chunk(std::ostream& os, const char type[4], const unsigned char* data, std::size_t n) {
    unsigned char word[4];
    put_be32(word, static_cast<std::uint32_t>(n));
    os.write(reinterpret_cast<const char*>(word), 4);
    os.write(type, 4);
    if (n) os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n));
    uLong crc = crc32(0L, Z_NULL, 0);
    crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
    if (n) crc = crc32(crc, data, static_cast<uInt>(n));
    put_be32(word, static_cast<std::uint32_t>(crc));
    os.write(reinterpret_cast<const char*>(word), 4);
}

}  // namespace

void write_png_rgb(const std::string& path, const std::uint8_t* rgb, std::int64_t width,
                   std::int64_t height) {
    if (width <= 0 || height <= 0) throw dimension_error("image dimensions must be positive");

    // scanlines with a leading filter byte (0 = stored)
    const std::size_t stride = static_cast<std::size_t>(width) * 3;
    std::vector<unsigned char> raw((stride + 1) * static_cast<std::size_t>(height));
    for (std::int64_t r = 0; r < height; ++r) {
        unsigned char* line = raw.data() + static_cast<std::size_t>(r) * (stride + 1);
        line[0] = 0;
        std::memcpy(line + 1, rgb + static_cast<std::size_t>(r) * stride, stride);
    }

    uLongf comp_len = compressBound(static_cast<uLong>(raw.size()));
    std::vector<unsigned char> comp(comp_len);
    if (compress2(comp.data(), &comp_len, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK)
        throw runtime_failure("PNG compression failed");
    comp.resize(comp_len);

    auto os = binio::open_out(path);
    static const unsigned char signature[8] = {137, 80, 78, 71, 13, 10, 26, 10};
    os.write(reinterpret_cast<const char*>(signature), 8);

    unsigned char ihdr[13];
    put_be32(ihdr, static_cast<std::uint32_t>(width));
    put_be32(ihdr + 4, static_cast<std::uint32_t>(height));
    ihdr[8] = 8;   // bit depth
    ihdr[9] = 2;   // truecolor
    ihdr[10] = 0;  // deflate
    ihdr[11] = 0;  // adaptive filtering
    ihdr[12] = 0;  // no interlace
    write_chunk(os, "IHDR", ihdr, sizeof ihdr);
    write_chunk(os, "IDAT", comp.data(), comp.size());
    write_chunk(os, "IEND", nullptr, 0);
    if (!os) throw runtime_failure("failed writing image to '" + path + "'");
}

}  // namespace pyrocast
