#include "garment/normal_map.hpp"

#include <cmath>
#include <csetjmp>
#include <fstream>
#include <ostream>
#include <string>

#include <png.h>

#include "garment/errors.hpp"
#include "garment/file_util.hpp"

namespace garment {

NormalMap::NormalMap(int w, int h, NormalFrame f)
    : width(w), height(h), frame(f),
      normals(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), Vec3::Zero()),
      defined(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {
    if (w <= 0 || h <= 0) throw ConfigError("normal map resolution must be positive");
}

void NormalMap::set(int i, int j, const Vec3& n) {
    const double len = n.norm();
    const std::size_t k = index(i, j);
    if (!(len > 0.0) || !std::isfinite(len)) {
        normals[k] = Vec3::Zero();
        defined[k] = 0;
        return;
    }
    normals[k] = n / len;
    defined[k] = 1;
}

int NormalMap::defined_count() const {
    int c = 0;
    for (std::uint8_t d : defined) c += d != 0;
    return c;
}

Vec2 texel_center_uv(int i, int j, int width, int height) {
    return {(i + 0.5) / width, 1.0 - (j + 0.5) / height};
}

std::array<std::uint8_t, 3> encode_normal(const Vec3& n) {
    std::array<std::uint8_t, 3> c{};
    for (int k = 0; k < 3; ++k) {
        const double v = std::round(255.0 * (std::clamp(n[k], -1.0, 1.0) + 1.0) / 2.0);
        c[static_cast<std::size_t>(k)] = static_cast<std::uint8_t>(v);
    }
    return c;
}

Vec3 decode_normal(const std::array<std::uint8_t, 3>& rgb) {
    Vec3 n(rgb[0], rgb[1], rgb[2]);
    n = n / 127.5 - Vec3::Ones();
    const double len = n.norm();
    return len > 0.0 ? Vec3(n / len) : Vec3::Zero();
}

NormalMap quantized(const NormalMap& map) {
    NormalMap out = map;
    for (std::size_t k = 0; k < out.normals.size(); ++k) {
        if (out.defined[k]) out.normals[k] = decode_normal(encode_normal(out.normals[k]));
    }
    return out;
}

namespace {

struct PngError {
    std::string message;
};

void on_png_error(png_structp png, png_const_charp msg) {
    auto* err = static_cast<PngError*>(png_get_error_ptr(png));
    err->message = msg;
    png_longjmp(png, 1);
}

void on_png_warning(png_structp, png_const_charp) {}

void write_to_stream(png_structp png, png_bytep data, png_size_t length) {
    auto* out = static_cast<std::ostream*>(png_get_io_ptr(png));
    out->write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(length));
}

void flush_stream(png_structp png) { static_cast<std::ostream*>(png_get_io_ptr(png))->flush(); }

// Rows are packed already (bit depth 1 packs 8 pixels per byte, MSB first).
void write_png(std::ostream& out, int width, int height, int color_type, int bit_depth,
               std::vector<std::vector<std::uint8_t>>& rows) {
    PngError err;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, on_png_error, on_png_warning);
    if (!png) throw DataError("libpng: cannot create write struct");
    png_infop info = png_create_info_struct(png);
    std::vector<png_bytep> pointers(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) pointers[r] = rows[r].data();
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("libpng: " + err.message);
    }
    png_set_write_fn(png, &out, write_to_stream, flush_stream);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), bit_depth, color_type,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    png_write_image(png, pointers.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

// Reads any PNG into 8-bit samples of the requested format.
std::vector<std::uint8_t> read_png(const std::filesystem::path& path, png_uint_32 format, int& width, int& height) {
    const std::string bytes = read_text_file(path);
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size())) {
        throw DataError(path.string() + ": " + image.message);
    }
    image.format = format;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        throw DataError(path.string() + ": " + image.message);
    }
    width = static_cast<int>(image.width);
    height = static_cast<int>(image.height);
    return buffer;
}

}  // namespace

void save_normal_map(const std::filesystem::path& png, const std::filesystem::path& mask, const NormalMap& map) {
    std::vector<std::vector<std::uint8_t>> rgb(static_cast<std::size_t>(map.height));
    std::vector<std::vector<std::uint8_t>> bits(static_cast<std::size_t>(map.height));
    for (int j = 0; j < map.height; ++j) {
        auto& row = rgb[static_cast<std::size_t>(j)];
        auto& brow = bits[static_cast<std::size_t>(j)];
        row.resize(3 * static_cast<std::size_t>(map.width));
        brow.assign((static_cast<std::size_t>(map.width) + 7) / 8, 0);
        for (int i = 0; i < map.width; ++i) {
            const bool d = map.is_defined(i, j);
            const auto c = d ? encode_normal(map.at(i, j)) : std::array<std::uint8_t, 3>{kNoDataGray, kNoDataGray, kNoDataGray};
            std::copy(c.begin(), c.end(), row.begin() + 3 * i);
            if (d) brow[static_cast<std::size_t>(i / 8)] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
        }
    }
    write_atomically(png, [&](std::ostream& out) { write_png(out, map.width, map.height, PNG_COLOR_TYPE_RGB, 8, rgb); }, true);
    write_atomically(mask, [&](std::ostream& out) { write_png(out, map.width, map.height, PNG_COLOR_TYPE_GRAY, 1, bits); }, true);
}

NormalMap load_normal_map(const std::filesystem::path& png, const std::filesystem::path& mask, NormalFrame frame) {
    int w = 0, h = 0, mw = 0, mh = 0;
    const std::vector<std::uint8_t> rgb = read_png(png, PNG_FORMAT_RGB, w, h);
    const std::vector<std::uint8_t> m = read_png(mask, PNG_FORMAT_GRAY, mw, mh);
    if (w != mw || h != mh) throw DataError(mask.string() + ": mask size differs from " + png.string());
    NormalMap map(w, h, frame);
    for (int j = 0; j < h; ++j) {
        for (int i = 0; i < w; ++i) {
            const std::size_t k = map.index(i, j);
            if (m[k] < 128) continue;
            map.normals[k] = decode_normal({rgb[3 * k], rgb[3 * k + 1], rgb[3 * k + 2]});
            map.defined[k] = 1;
        }
    }
    return map;
}

}  // namespace garment
