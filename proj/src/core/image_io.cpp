#include "imls/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <boost/beast/core/detail/base64.hpp>
#include <png.h>

#include "imls/errors.hpp"

namespace imls {

namespace {

int color_type_for(int channels) {
    switch (channels) {
        case 1: return PNG_COLOR_TYPE_GRAY;
        case 3: return PNG_COLOR_TYPE_RGB;
        case 4: return PNG_COLOR_TYPE_RGBA;
        default: throw ShapeError("PNG export supports 1, 3 or 4 channels");
    }
}

void on_write(png_structp png, png_bytep data, png_size_t len) {
    auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
    out->insert(out->end(), data, data + len);
}

struct ReadCursor {
    const std::vector<std::uint8_t>* bytes;
    std::size_t pos;
};

void on_read(png_structp png, png_bytep data, png_size_t len) {
    auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cur->pos + len > cur->bytes->size()) png_error(png, "truncated PNG");
    std::memcpy(data, cur->bytes->data() + cur->pos, len);
    cur->pos += len;
}

// The setjmp frames below hold no locals with destructors; everything they
// touch lives in the caller.
bool write_stream(png_structp png, png_infop info, const Image& img, int color_type,
                  std::vector<std::uint8_t>& out, std::vector<std::uint8_t>& row) {
    if (setjmp(png_jmpbuf(png))) return false;
    png_set_write_fn(png, &out, on_write, nullptr);
    png_set_IHDR(png, info, img.width, img.height, 8, color_type, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int i = 0; i < img.height; ++i) {
        const float* src = img.data.data() + static_cast<std::size_t>(i) * img.width * img.channels;
        for (std::size_t k = 0; k < row.size(); ++k)
            row[k] = static_cast<std::uint8_t>(std::lround(std::clamp(src[k], 0.0f, 1.0f) * 255.0f));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    return true;
}

bool read_header(png_structp png, png_infop info, ReadCursor& cur) {
    if (setjmp(png_jmpbuf(png))) return false;
    png_set_read_fn(png, &cur, on_read);
    png_read_info(png, info);
    png_set_strip_16(png);
    png_set_packing(png);
    png_set_expand(png);
    if (png_get_color_type(png, info) == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    png_read_update_info(png, info);
    return true;
}

bool read_rows(png_structp png, Image& img, std::vector<std::uint8_t>& row) {
    if (setjmp(png_jmpbuf(png))) return false;
    const int wc = img.width * img.channels;
    for (int i = 0; i < img.height; ++i) {
        png_read_row(png, row.data(), nullptr);
        float* dst = img.data.data() + static_cast<std::size_t>(i) * wc;
        for (int k = 0; k < wc; ++k) dst[k] = row[k] / 255.0f;
    }
    return true;
}

}  // namespace

std::vector<std::uint8_t> encode_png(const Image& img) {
    const int color_type = color_type_for(img.channels);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw FormatError("libpng initialisation failed");
    }
    std::vector<std::uint8_t> out;
    std::vector<std::uint8_t> row(static_cast<std::size_t>(img.width) * img.channels);
    const bool ok = write_stream(png, info, img, color_type, out, row);
    png_destroy_write_struct(&png, &info);
    if (!ok) throw FormatError("PNG encoding failed");
    return out;
}

Image decode_png(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 8 || png_sig_cmp(bytes.data(), 0, 8) != 0) throw FormatError("not a PNG stream");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("libpng initialisation failed");
    }
    ReadCursor cur{&bytes, 0};
    if (!read_header(png, info, cur)) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw FormatError("PNG decoding failed");
    }
    Image img(static_cast<int>(png_get_image_height(png, info)), static_cast<int>(png_get_image_width(png, info)),
              png_get_channels(png, info));
    std::vector<std::uint8_t> row(png_get_rowbytes(png, info));
    const bool ok = read_rows(png, img, row);
    png_destroy_read_struct(&png, &info, nullptr);
    if (!ok) throw FormatError("PNG decoding failed");
    return img;
}

void write_png(const Image& img, const std::filesystem::path& path) {
    const auto bytes = encode_png(img);
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("cannot write " + path.string());
}

Image read_png(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_png(bytes);
}

Image grid_to_image(const BoolGrid& g) {
    Image img(g.size, g.size, 1);
    for (std::size_t k = 0; k < g.cells.size(); ++k) img.data[k] = g.cells[k] ? 1.0f : 0.0f;
    return img;
}

std::string base64_encode(const std::vector<std::uint8_t>& bytes) {
    namespace b64 = boost::beast::detail::base64;
    std::string out(b64::encoded_size(bytes.size()), '\0');
    out.resize(b64::encode(out.data(), bytes.data(), bytes.size()));
    return out;
}

std::vector<std::uint8_t> base64_decode(const std::string& text) {
    namespace b64 = boost::beast::detail::base64;
    std::vector<std::uint8_t> out(b64::decoded_size(text.size()));
    out.resize(b64::decode(out.data(), text.data(), text.size()).first);
    return out;
}

}  // namespace imls
