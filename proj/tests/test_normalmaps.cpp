#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <numeric>
#include <numbers>
#include <random>

#include "garment/bake.hpp"
#include "garment/errors.hpp"
#include "garment/normal_map.hpp"
#include "garment/primitives.hpp"
#include "garment/temporal_loss.hpp"
#include "normalmap_fixtures.hpp"
#include "test_util.hpp"

using namespace garment;
using namespace garment::testing;

TEST_CASE("colour coding: grey for no data, angular error under 1 degree") {
    CHECK(encode_normal(Vec3(0, 0, 1)) == std::array<std::uint8_t, 3>{128, 128, 255});
    std::mt19937_64 rng(31);
    for (int i = 0; i < 2000; ++i) {
        const Vec3 n = random_unit(rng);
        CHECK(angle_deg(decode_normal(encode_normal(n)), n) < 1.0);
    }
}

TEST_CASE("normal map PNG and mask round trip") {
    std::mt19937_64 rng(32);
    const NormalMap map = random_map(37, 23, rng);
    const auto dir = std::filesystem::temp_directory_path() / "garment_test_maps";
    save_normal_map(dir / "m.png", dir / "m_mask.png", map);
    const NormalMap back = load_normal_map(dir / "m.png", dir / "m_mask.png");
    const NormalMap q = quantized(map);
    REQUIRE(back.width == 37);
    REQUIRE(back.height == 23);
    CHECK(back.defined == map.defined);
    double worst = 0.0;
    for (std::size_t k = 0; k < q.normals.size(); ++k) worst = std::max(worst, (back.normals[k] - q.normals[k]).norm());
    CHECK(worst == 0.0);
    for (std::size_t k = 0; k < back.normals.size(); ++k) {
        if (back.defined[k]) CHECK(std::abs(back.normals[k].norm() - 1.0) < 1e-2);
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("bake_lr: planar quad is constant +z") {
    const Mesh quad = with_vertex_normals(make_plane_grid(1, 1));
    const NormalMap map = bake_lr(quad, 64, 64);
    CHECK(map.defined_count() == 64 * 64);
    for (std::size_t k = 0; k < map.normals.size(); ++k) {
        CHECK(encode_normal(map.normals[k]) == std::array<std::uint8_t, 3>{128, 128, 255});
    }
}

TEST_CASE("bake_lr: sampling at vertex UVs returns the vertex normals") {
    const Mesh tube = texel_aligned_tube();
    const NormalMap map = quantized(bake_lr(tube, 241, 241));
    for (int f = 0; f < tube.face_count(); ++f) {
        for (int c = 0; c < 3; ++c) {
            const Vec2 uv = tube.uvs[static_cast<std::size_t>(tube.uv_faces[static_cast<std::size_t>(f)][c])];
            const int i = static_cast<int>(std::floor(uv.x() * 241.0));
            const int j = static_cast<int>(std::floor((1.0 - uv.y()) * 241.0));
            REQUIRE(map.is_defined(i, j));
            const Vec3& vn = tube.vertex_normals[static_cast<std::size_t>(tube.faces[static_cast<std::size_t>(f)][c])];
            for (int ch = 0; ch < 3; ++ch) CHECK(std::abs(map.at(i, j)[ch] - vn[ch]) <= 2.0 * 2.0 / 255.0);
        }
    }
}

TEST_CASE("bake_lr is rotation equivariant") {
    std::mt19937_64 rng(33);
    const Mesh tube = with_vertex_normals(make_tube(9, 16, 0.05, 0.0, 0.3));
    const NormalMap base = bake_lr(tube, 96, 96);
    for (int trial = 0; trial < 5; ++trial) {
        const Mat3 R = random_rotation(rng);
        Mesh rotated = tube;
        for (Vec3& p : rotated.vertices) p = R * p;
        rotated = with_vertex_normals(rotated);
        const NormalMap map = bake_lr(rotated, 96, 96);
        CHECK(map.defined == base.defined);
        double worst = 0.0;
        for (std::size_t k = 0; k < map.normals.size(); ++k) {
            if (map.defined[k]) worst = std::max(worst, (map.normals[k] - R * base.normals[k]).cwiseAbs().maxCoeff());
        }
        CHECK(worst < 1e-2);
    }
}

TEST_CASE("rasterize_uvs rejects overlapping UV triangles") {
    Mesh m = make_plane_grid(2, 2);
    m.uv_faces[3] = m.uv_faces[0];
    CHECK_THROWS_AS(rasterize_uvs(m, 32, 32), DataError);
    CHECK_NOTHROW(rasterize_uvs(make_plane_grid(7, 5), 64, 64));
}

TEST_CASE("bake_lr is resolution consistent") {
    const Mesh tube = with_vertex_normals(make_tube(9, 12, 0.05, 0.0, 0.3));
    const NormalMap fine = bake_lr(tube, 512, 512);
    const NormalMap coarse = bake_lr(tube, 256, 256);
    double worst = 0.0;
    for (int j = 1; j + 1 < 256; ++j) {
        for (int i = 1; i + 1 < 256; ++i) {
            Vec3 sum = Vec3::Zero();
            bool all = true;
            for (int dj = 0; dj < 2; ++dj) {
                for (int di = 0; di < 2; ++di) {
                    all = all && fine.is_defined(2 * i + di, 2 * j + dj);
                    sum += fine.at(2 * i + di, 2 * j + dj);
                }
            }
            if (!all || !coarse.is_defined(i, j)) continue;
            worst = std::max(worst, angle_deg(sum, coarse.at(i, j)));
        }
    }
    CHECK(worst < 5.0);
}

TEST_CASE("bake_hr: self projection equals the LR bake") {
    const Mesh tube = with_vertex_normals(make_tube(9, 16, 0.05, 0.0, 0.3));
    const NormalMap lr = bake_lr(tube, 128, 128);
    const NormalMap hr = bake_hr(tube, tube, 128, 128);
    CHECK(hr.defined == lr.defined);
    int worst = 0;
    for (std::size_t k = 0; k < lr.normals.size(); ++k) {
        if (lr.defined[k]) worst = std::max(worst, max_channel_step(lr.normals[k], hr.normals[k]));
    }
    CHECK(worst <= 1);
}

TEST_CASE("bake_hr recovers a ripple finer than the reconstruction") {
    const double amplitude = 0.0005, wavelength = 0.01;
    const double k = 2.0 * std::numbers::pi / wavelength;
    const Mesh recon = with_vertex_normals(make_plane_grid(8, 8, 0.2, 0.2));  // 2.5 cm edges
    Mesh scan = make_plane_grid(400, 10, 0.2, 0.2);
    for (Vec3& p : scan.vertices) p.z() = amplitude * std::sin(k * p.x());
    scan = with_vertex_normals(scan);
    const int res = 128;
    const NormalMap hr = bake_hr(scan, recon, res, res);
    const NormalMap lr = bake_lr(recon, res, res);
    double worst_hr = 0.0, worst_lr = 0.0;
    for (int j = 0; j < res; ++j) {
        for (int i = 0; i < res; ++i) {
            REQUIRE(hr.is_defined(i, j));
            const double x = 0.2 * texel_center_uv(i, j, res, res).x();
            const Vec3 analytic = Vec3(-amplitude * k * std::cos(k * x), 0.0, 1.0).normalized();
            worst_hr = std::max(worst_hr, angle_deg(hr.at(i, j), analytic));
            worst_lr = std::max(worst_lr, angle_deg(lr.at(i, j), analytic));
        }
    }
    MESSAGE("worst HR error " << worst_hr << " deg, LR " << worst_lr << " deg");
    CHECK(worst_hr < 5.0);
    CHECK(worst_lr > 10.0);
}

TEST_CASE("bake_hr: scan holes become no-data texels") {
    const Mesh recon = with_vertex_normals(make_plane_grid(12, 12, 0.3, 0.3));
    Mesh scan = make_plane_grid(60, 60, 0.3, 0.3);
    const Vec3 centre(0.15, 0.15, 0.0);
    std::vector<Face> kept;
    for (const Face& f : scan.faces) {
        const Vec3 c = (scan.vertices[f[0]] + scan.vertices[f[1]] + scan.vertices[f[2]]) / 3.0;
        if ((c - centre).norm() > 0.06) kept.push_back(f);
    }
    scan.faces = kept;
    scan.uv_faces.clear();
    const int res = 64;
    const NormalMap hr = bake_hr(scan, recon, res, res, 0.02);
    for (int j = 0; j < res; ++j) {
        for (int i = 0; i < res; ++i) {
            const Vec2 uv = texel_center_uv(i, j, res, res);
            const double r = (Vec3(0.3 * uv.x(), 0.3 * uv.y(), 0.0) - centre).norm();
            if (r < 0.035) CHECK_FALSE(hr.is_defined(i, j));
            if (r > 0.065) CHECK(hr.is_defined(i, j));
        }
    }
    CHECK_THROWS_AS(bake_hr(Mesh{}, recon, res, res), DataError);
}

TEST_CASE("tangent space: LR self-bake is constant +z") {
    const Mesh tube = with_vertex_normals(make_tube(9, 16, 0.05, 0.0, 0.3));
    const TangentFrames frames = tangent_frames(tube, 128, 128);
    const NormalMap t = quantized(to_tangent(bake_lr(tube, 128, 128), frames));
    CHECK(t.frame == NormalFrame::Tangent);
    CHECK(t.defined_count() > 0);
    for (std::size_t k = 0; k < t.normals.size(); ++k) {
        if (t.defined[k]) CHECK(encode_normal(t.normals[k]) == std::array<std::uint8_t, 3>{128, 128, 255});
    }
}

TEST_CASE("tangent space: planar mesh with axis-aligned UVs has the world frame") {
    const Mesh plane = with_vertex_normals(make_plane_grid(4, 3, 2.0, 1.0));
    const TangentFrames frames = tangent_frames(plane, 32, 32);
    std::mt19937_64 rng(34);
    const NormalMap g = random_map(32, 32, rng, 0.0);
    const NormalMap t = to_tangent(g, frames);
    for (std::size_t k = 0; k < g.normals.size(); ++k) {
        CHECK((frames.frames[k] - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((t.normals[k] - g.normals[k]).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("tangent space: round trip through 8-bit storage") {
    std::mt19937_64 rng(35);
    const Mesh tube = with_vertex_normals(make_tube(9, 16, 0.05, 0.0, 0.3));
    const TangentFrames frames = tangent_frames(tube, 96, 96);
    NormalMap g = random_map(96, 96, rng, 0.0);
    for (std::size_t k = 0; k < g.normals.size(); ++k) {
        if (!frames.valid[k]) {
            g.normals[k] = Vec3::Zero();
            g.defined[k] = 0;
        }
    }
    const NormalMap back = to_global(quantized(to_tangent(g, frames)), frames);
    double worst = 0.0;
    for (std::size_t k = 0; k < g.normals.size(); ++k) {
        if (g.defined[k]) worst = std::max(worst, (back.normals[k] - g.normals[k]).cwiseAbs().maxCoeff());
    }
    CHECK(worst < 2e-2);
}

TEST_CASE("tangent space: texels without a UV triangle become no-data") {
    Mesh m = with_vertex_normals(make_plane_grid(1, 1));
    // Collapse the second UV triangle to a line.
    m.uvs[2] = m.uvs[3];
    const TangentFrames frames = tangent_frames(m, 16, 16);
    NormalMap g(16, 16, NormalFrame::Global);
    for (int j = 0; j < 16; ++j) {
        for (int i = 0; i < 16; ++i) g.set(i, j, Vec3(0, 0, 1));
    }
    const NormalMap t = to_tangent(g, frames);
    CHECK(t.defined_count() > 0);
    CHECK(t.defined_count() < 16 * 16);
    for (std::size_t k = 0; k < t.normals.size(); ++k) CHECK(bool(t.defined[k]) == bool(frames.valid[k]));
}

TEST_CASE("dilate fills one ring around defined texels") {
    NormalMap m(5, 5, NormalFrame::Global);
    m.set(2, 2, Vec3(0, 0, 1));
    const NormalMap d = dilate(m, 1);
    CHECK(d.defined_count() == 5);
    CHECK(d.is_defined(1, 2));
    CHECK_FALSE(d.is_defined(1, 1));
}

TEST_CASE("temporal loss: identical images give zero") {
    std::mt19937_64 rng(36);
    const NormalMap a = random_map(16, 16, rng);
    const TemporalLoss l = temporal_loss(a, a, a);
    CHECK(l.data == 0.0);
    CHECK(l.temporal == 0.0);
}

TEST_CASE("temporal loss: opposite changes cancel in L_temp") {
    NormalMap prev(4, 4, NormalFrame::Global), gen(4, 4, NormalFrame::Global), gt(4, 4, NormalFrame::Global);
    for (int j = 0; j < 4; ++j) {
        for (int i = 0; i < 4; ++i) {
            prev.set(i, j, Vec3(0, 0, 1));
            gt.set(i, j, Vec3(0, 0, 1));
            gen.set(i, j, Vec3(0, 0, 1));
        }
    }
    gen.normals[gen.index(0, 0)] = Vec3(0.6, 0, 0.8);
    gen.normals[gen.index(3, 3)] = Vec3(-0.6, 0, 0.8);
    const TemporalLoss l = temporal_loss(gen, gt, prev);
    // z changes by -0.2 at both texels and does not cancel; x cancels.
    CHECK(l.temporal == doctest::Approx(0.4).epsilon(1e-15));
    gen.normals[gen.index(3, 3)] = Vec3(-0.6, 0, 1.2);  // unnormalized on purpose: z change +0.2
    const TemporalLoss c = temporal_loss(gen, gt, prev);
    CHECK(c.temporal == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(c.data > 0.0);
}

TEST_CASE("temporal loss matches a naive scalar oracle") {
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 50; ++trial) {
        const NormalMap gen = random_map(8, 8, rng), gt = random_map(8, 8, rng), prev = random_map(8, 8, rng);
        double data = 0.0;
        int count = 0;
        double sums[3] = {0, 0, 0};
        for (int j = 0; j < 8; ++j) {
            for (int i = 0; i < 8; ++i) {
                for (int c = 0; c < 3; ++c) {
                    const double g = gen.is_defined(i, j) ? gen.at(i, j)[c] : 0.0;
                    const double p = prev.is_defined(i, j) ? prev.at(i, j)[c] : 0.0;
                    sums[c] += g - p;
                }
                if (gen.is_defined(i, j) && gt.is_defined(i, j)) {
                    ++count;
                    for (int c = 0; c < 3; ++c) data += std::abs(gen.at(i, j)[c] - gt.at(i, j)[c]);
                }
            }
        }
        const TemporalLoss l = temporal_loss(gen, gt, prev);
        CHECK(std::abs(l.data - data / count) < 1e-12);
        CHECK(std::abs(l.temporal - (std::abs(sums[0]) + std::abs(sums[1]) + std::abs(sums[2]))) < 1e-12);
        CHECK(l.data_pixels == count);
    }
}

TEST_CASE("temporal loss is exactly invariant to permuting the difference image") {
    std::mt19937_64 rng(38);
    const NormalMap gen = random_map(32, 32, rng), prev = random_map(32, 32, rng);
    std::vector<std::size_t> perm(gen.normals.size());
    std::iota(perm.begin(), perm.end(), 0);
    const double base = temporal_loss(gen, gen, prev).temporal;
    for (int trial = 0; trial < 10; ++trial) {
        std::shuffle(perm.begin(), perm.end(), rng);
        NormalMap g2 = gen, p2 = prev;
        for (std::size_t k = 0; k < perm.size(); ++k) {
            g2.normals[k] = gen.normals[perm[k]];
            g2.defined[k] = gen.defined[perm[k]];
            p2.normals[k] = prev.normals[perm[k]];
            p2.defined[k] = prev.defined[perm[k]];
        }
        CHECK(temporal_loss(g2, g2, p2).temporal == base);
    }
}

TEST_CASE("temporal loss over a sequence") {
    std::mt19937_64 rng(39);
    std::vector<NormalMap> gt;
    for (int t = 0; t < 5; ++t) gt.push_back(random_map(8, 8, rng));
    // Each generated frame repeats the previous target frame.
    std::vector<NormalMap> gen{gt[0]};
    for (int t = 1; t < 5; ++t) gen.push_back(gt[static_cast<std::size_t>(t - 1)]);
    const TemporalLossReport r = evaluate_sequence(gen, gt);
    REQUIRE(r.frames.size() == 5);
    CHECK_FALSE(r.frames[0].temporal.has_value());
    for (int t = 1; t < 5; ++t) CHECK(*r.frames[static_cast<std::size_t>(t)].temporal == 0.0);
    CHECK(r.frames[0].data == 0.0);
    CHECK(r.mean_temporal == 0.0);
    CHECK_THROWS_AS(evaluate_sequence(gen, {gt[0]}), DataError);
    CHECK_THROWS_AS(temporal_loss(gt[0], random_map(4, 4, rng), gt[0]), DataError);
}
