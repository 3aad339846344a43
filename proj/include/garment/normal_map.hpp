#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "garment/mesh.hpp"

namespace garment {

enum class NormalFrame { Global, Tangent };

// Row-major texel grid, row 0 at the top. Texel (i, j) (column i, row j)
// has its centre at uv = ((i + 0.5) / width, 1 - (j + 0.5) / height).
// Defined texels hold unit vectors; undefined ones hold zero.
struct NormalMap {
    int width = 0;
    int height = 0;
    NormalFrame frame = NormalFrame::Global;
    std::vector<Vec3> normals;
    std::vector<std::uint8_t> defined;  // 1 where a normal is stored

    NormalMap() = default;
    NormalMap(int w, int h, NormalFrame f);

    std::size_t index(int i, int j) const { return static_cast<std::size_t>(j) * static_cast<std::size_t>(width) + static_cast<std::size_t>(i); }
    bool is_defined(int i, int j) const { return defined[index(i, j)] != 0; }
    const Vec3& at(int i, int j) const { return normals[index(i, j)]; }
    void set(int i, int j, const Vec3& n);  // normalizes; zero input leaves the texel undefined
    int defined_count() const;
};

Vec2 texel_center_uv(int i, int j, int width, int height);

// 8-bit colour coding: c = round(255 (n + 1) / 2). Undefined texels are grey.
std::array<std::uint8_t, 3> encode_normal(const Vec3& n);
Vec3 decode_normal(const std::array<std::uint8_t, 3>& rgb);  // normalized
constexpr std::uint8_t kNoDataGray = 128;

// Quantizes a map through the colour coding (what a save/load round trip does).
NormalMap quantized(const NormalMap& map);

// RGB PNG plus a 1-bit grayscale mask PNG (white = defined).
void save_normal_map(const std::filesystem::path& png, const std::filesystem::path& mask, const NormalMap& map);
NormalMap load_normal_map(const std::filesystem::path& png, const std::filesystem::path& mask,
                          NormalFrame frame = NormalFrame::Global);

}  // namespace garment
