#include "forge/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>
#include <stdexcept>
#include <vector>

#include <png.h>

namespace forge {
namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

}  // namespace

void write_png(const std::filesystem::path& path, const Image& image, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16) throw std::invalid_argument("write_png: bit depth must be 8 or 16");
    if (image.empty()) throw std::invalid_argument("write_png: empty image");
    FilePtr file(std::fopen(path.c_str(), "wb"));
    if (!file) throw IoError(path.string() + ": cannot open for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("write_png: libpng initialisation failed");
    }
    const int bytes = bit_depth / 8;
    const double max_code = bit_depth == 8 ? 255.0 : 65535.0;
    std::vector<png_byte> rows(static_cast<std::size_t>(image.width) * image.height * 3 * bytes);
    for (std::size_t i = 0; i < image.data.size(); ++i) {
        const auto code = static_cast<unsigned>(std::lround(std::clamp(image.data[i], 0.0, 1.0) * max_code));
        if (bytes == 1) {
            rows[i] = static_cast<png_byte>(code);
        } else {
            rows[2 * i] = static_cast<png_byte>(code >> 8);  // PNG is big-endian
            rows[2 * i + 1] = static_cast<png_byte>(code & 0xff);
        }
    }
    std::vector<png_bytep> row_ptrs(static_cast<std::size_t>(image.height));
    for (int y = 0; y < image.height; ++y)
        row_ptrs[static_cast<std::size_t>(y)] = rows.data() + static_cast<std::size_t>(y) * image.width * 3 * bytes;

    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError(path.string() + ": PNG encoding failed");
    }
    png_init_io(png, file.get());
    png_set_compression_level(png, 6);
    png_set_IHDR(png, info, static_cast<png_uint_32>(image.width), static_cast<png_uint_32>(image.height), bit_depth,
                 PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_png(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw IoError(path.string() + ": cannot open");
    png_byte sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw ParseError(path.string() + ": not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw std::runtime_error("read_png: libpng initialisation failed");
    }
    Image image;
    std::vector<png_byte> rows;
    std::vector<png_bytep> row_ptrs;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw ParseError(path.string() + ": PNG decoding failed");
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);
    const png_uint_32 width = png_get_image_width(png, info);
    const png_uint_32 height = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA) png_set_gray_to_rgb(png);
    if (png_get_bit_depth(png, info) < 8) png_set_expand(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    png_read_update_info(png, info);
    const int depth = png_get_bit_depth(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    rows.resize(rowbytes * height);
    row_ptrs.resize(height);
    for (png_uint_32 y = 0; y < height; ++y) row_ptrs[y] = rows.data() + y * rowbytes;
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    image = Image(static_cast<int>(width), static_cast<int>(height));
    const double max_code = depth == 16 ? 65535.0 : 255.0;
    for (std::size_t i = 0; i < image.data.size(); ++i) {
        const std::size_t y = i / (static_cast<std::size_t>(width) * 3);
        const std::size_t off = i % (static_cast<std::size_t>(width) * 3);
        const png_byte* row = row_ptrs[y];
        const unsigned code = depth == 16 ? (static_cast<unsigned>(row[2 * off]) << 8) | row[2 * off + 1] : row[off];
        image.data[i] = code / max_code;
    }
    return image;
}

}  // namespace forge
