#pragma once

#include <cstdint>
#include <string>

namespace pyrocast {

// 8-bit RGB, zlib-compressed, no interlace. `rgb` is row-major, 3 bytes per
// pixel, top row first.
void write_png_rgb(const std::string& path, const std::uint8_t* rgb, std::int64_t width,
                   std::int64_t height);

}  // namespace pyrocast
