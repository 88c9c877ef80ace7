#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "imls/image.hpp"

namespace imls {

/// 8-bit PNG, 1/3/4 channels; values clamped to [0,1] and rounded.
std::vector<std::uint8_t> encode_png(const Image& img);
Image decode_png(const std::vector<std::uint8_t>& bytes);

void write_png(const Image& img, const std::filesystem::path& path);
Image read_png(const std::filesystem::path& path);

Image grid_to_image(const BoolGrid& g);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

}  // namespace imls
