#include <doctest.h>

#include <numbers>

#include "garment/errors.hpp"
#include "garment/synth.hpp"
#include "test_util.hpp"

using namespace garment;

namespace {

SynthConfig small_config() {
    SynthConfig c;
    c.frames = 6;
    c.rings = 21;
    c.segments = 12;
    return c;
}

bool identical(const Mesh& a, const Mesh& b) {
    return a.vertices == b.vertices && a.faces == b.faces && a.uvs == b.uvs && a.uv_faces == b.uv_faces &&
           a.vertex_normals == b.vertex_normals;
}

}  // namespace

TEST_CASE("synth: without ridges and noise the scan is the upsampled skinned template") {
    SynthConfig c = small_config();
    c.ridge_amplitude = 0.0;
    const SynthSequence s = generate(c);
    const int f = c.scan_factor;
    const int scan_segments = c.segments * f;
    for (int t = 0; t < c.frames; ++t) {
        const Mesh posed = skin(s.tmpl, s.weights, s.skeleton, s.poses[static_cast<std::size_t>(t)]);
        for (int r = 0; r < c.rings; ++r) {
            for (int seg = 0; seg < c.segments; ++seg) {
                const Vec3& a = posed.vertices[static_cast<std::size_t>(r * c.segments + seg)];
                const Vec3& b = s.scans[static_cast<std::size_t>(t)].vertices[static_cast<std::size_t>(r * f * scan_segments + seg * f)];
                CHECK((a - b).norm() < 1e-12);
            }
        }
        CHECK((s.ground_truth[static_cast<std::size_t>(t)].vertices == posed.vertices));
    }
}

TEST_CASE("synth: ridges vanish for a straight arm and peak at a right angle") {
    const SynthConfig c = small_config();
    const double x = c.upper_arm;
    for (double phi : {0.0, 0.7, -2.0}) CHECK(ridge_displacement(c, x, phi, 0.0) == 0.0);
    const double peak = ridge_displacement(c, x, 0.0, std::numbers::pi / 2);
    CHECK(peak > 0.0);
    for (double angle : {0.2, 0.8, 1.2}) {
        CHECK(ridge_displacement(c, x, 0.0, angle) == doctest::Approx(peak * std::pow(std::sin(angle), 2)).epsilon(1e-12));
    }
    // Far from the elbow the sleeve is undisturbed.
    CHECK(std::abs(ridge_displacement(c, 0.02, 0.0, std::numbers::pi / 2)) < 1e-12);
}

TEST_CASE("synth: same seed gives identical output, another seed does not") {
    SynthConfig c = small_config();
    c.noise = 0.0005;
    c.hole_probability = 0.5;
    const SynthSequence a = generate(c), b = generate(c);
    REQUIRE(a.scans.size() == b.scans.size());
    for (std::size_t t = 0; t < a.scans.size(); ++t) {
        CHECK(identical(a.scans[t], b.scans[t]));
        CHECK(identical(a.ground_truth[t], b.ground_truth[t]));
        CHECK(a.scan_boundary[t] == b.scan_boundary[t]);
        CHECK(a.poses[t].root_translation == b.poses[t].root_translation);
    }
    c.seed = 2;
    const SynthSequence d = generate(c);
    CHECK_FALSE(identical(a.scans[3], d.scans[3]));
}

TEST_CASE("synth: ground truth is consistent with skinning") {
    const SynthConfig c = small_config();
    const SynthSequence s = generate(c);
    validate(s.weights, s.skeleton, s.tmpl.vertex_count());
    for (std::size_t t = 0; t < s.poses.size(); ++t) {
        validate(s.poses[t], s.skeleton);
        const Mesh back = unskin(s.ground_truth[t], s.weights, s.skeleton, s.poses[t]);
        double worst = 0.0;
        for (std::size_t v = 0; v < back.vertices.size(); ++v) {
            worst = std::max(worst, (back.vertices[v] - s.ground_truth_rest[t].vertices[v]).norm());
        }
        CHECK(worst < 1e-9);
        CHECK(same_topology(s.ground_truth[t], s.tmpl));
    }
}

TEST_CASE("synth: boundary marks sit on the end rings of the scan") {
    SynthConfig c = small_config();
    c.hole_probability = 1.0;
    const SynthSequence s = generate(c);
    REQUIRE(s.template_boundary.size() == 2u * static_cast<std::size_t>(c.segments));
    const int full_faces = 2 * ((c.rings - 1) * c.scan_factor) * c.segments * c.scan_factor;
    for (std::size_t t = 0; t < s.scans.size(); ++t) {
        const Mesh& scan = s.scans[t];
        validate(scan);
        CHECK(scan.face_count() < full_faces);
        CHECK(s.scan_boundary[t].size() == s.template_boundary.size());
        // Each mark coincides (up to the scan's resolution) with a posed template boundary vertex.
        const Mesh posed = skin(s.tmpl, s.weights, s.skeleton, s.poses[t]);
        for (std::size_t i = 0; i < s.scan_boundary[t].size(); ++i) {
            const Vec3& mark = scan.vertices[static_cast<std::size_t>(s.scan_boundary[t][i])];
            const Vec3& tb = posed.vertices[static_cast<std::size_t>(s.template_boundary[i])];
            CHECK((mark - tb).norm() < 1e-9);
        }
    }
}

TEST_CASE("synth: invalid configs") {
    SynthConfig c = small_config();
    c.scan_factor = 1;
    CHECK_THROWS_AS(generate(c), ConfigError);
    c = small_config();
    c.ridge_amplitude = -1.0;
    CHECK_THROWS_AS(generate(c), ConfigError);
    c = small_config();
    c.hole_probability = 1.5;
    CHECK_THROWS_AS(generate(c), ConfigError);
}
