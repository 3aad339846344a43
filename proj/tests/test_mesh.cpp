#include <doctest.h>

#include <sstream>

#include "garment/errors.hpp"
#include "garment/obj_io.hpp"
#include "garment/primitives.hpp"
#include "garment/spatial_index.hpp"
#include "test_util.hpp"

using namespace garment;
using namespace garment::testing;

namespace {

// Oracle: linear scan over all faces, lowest index wins ties.
BarycentricHit brute_force_closest(const Mesh& mesh, const Vec3& q) {
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    Vec3 best_bary;
    for (int f = 0; f < mesh.face_count(); ++f) {
        const Face& t = mesh.faces[f];
        const Vec3& a = mesh.vertices[t[0]];
        const Vec3& b = mesh.vertices[t[1]];
        const Vec3& c = mesh.vertices[t[2]];
        const Vec3 bary = closest_point_barycentric(q, a, b, c);
        const double d2 = (bary[0] * a + bary[1] * b + bary[2] * c - q).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = f;
            best_bary = bary;
        }
    }
    return make_hit(mesh, best, best_bary, q);
}

Mesh random_soup(std::mt19937_64& rng, int faces) {
    Mesh m;
    for (int f = 0; f < faces; ++f) {
        const Vec3 c = random_vec(rng, -1.0, 1.0);
        for (int k = 0; k < 3; ++k) m.vertices.push_back(c + random_vec(rng, -0.2, 0.2));
        m.faces.push_back({3 * f, 3 * f + 1, 3 * f + 2});
    }
    return m;
}

}  // namespace

TEST_CASE("single triangle OBJ loads") {
    std::istringstream in("v 0 0 0\nv 1 0 0\nv 0 1 0\nvt 0 0\nvt 1 0\nvt 0 1\nf 1/1 2/2 3/3\n");
    const Mesh m = read_obj(in);
    CHECK(m.vertex_count() == 3);
    CHECK(m.face_count() == 1);
    CHECK(m.has_uvs());
    CHECK(m.uv_faces[0] == Face{0, 1, 2});
    CHECK_NOTHROW(validate(m));
}

TEST_CASE("OBJ parsing handles quads, negative indices and comments") {
    std::istringstream in("# quad\no thing\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\ns off\nf -4 -3 -2 -1\n");
    const Mesh m = read_obj(in);
    CHECK(m.face_count() == 2);
    CHECK(m.faces[0] == Face{0, 1, 2});
    CHECK(m.faces[1] == Face{0, 2, 3});
    CHECK_FALSE(m.has_uvs());
}

TEST_CASE("OBJ face index out of range reports the line") {
    std::istringstream in("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 99\n");
    try {
        read_obj(in, "bad.obj");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 4);
        CHECK(std::string(e.what()).find("out of range") != std::string::npos);
    }
}

TEST_CASE("OBJ malformed number and degenerate face are parse errors") {
    std::istringstream bad_num("v 0 0 0\nv 1 zero 0\n");
    CHECK_THROWS_AS(read_obj(bad_num), ParseError);
    std::istringstream degenerate("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 1 2\n");
    CHECK_THROWS_AS(read_obj(degenerate), ParseError);
}

TEST_CASE("OBJ round trip is bit exact for positions and preserves topology") {
    std::mt19937_64 rng(7);
    Mesh m = make_tube(6, 9, 0.05, 0.0, 0.4);
    for (Vec3& p : m.vertices) p += random_vec(rng, -1e-3, 1e-3) * 3.14159;
    m = with_vertex_normals(m);
    std::stringstream ss;
    write_obj(ss, m);
    const Mesh back = read_obj(ss);
    CHECK(same_topology(m, back));
    CHECK(back.vertices == m.vertices);
    CHECK(back.uvs == m.uvs);
    CHECK(back.vertex_normals == m.vertex_normals);
    CHECK(topology_hash(back) == topology_hash(m));
}

TEST_CASE("mesh validation rejects bad faces, uvs and normals") {
    Mesh m = make_plane_grid(1, 1);
    CHECK_NOTHROW(validate(m));
    Mesh bad = m;
    bad.faces[0][2] = 7;
    CHECK_THROWS_AS(validate(bad), DataError);
    bad = m;
    bad.uvs[0] = Vec2(1.5, 0.0);
    CHECK_THROWS_AS(validate(bad), DataError);
    bad = m;
    bad.vertex_normals.assign(4, Vec3(0, 0, 2));
    CHECK_THROWS_AS(validate(bad), DataError);
}

TEST_CASE("closest point: query on a vertex and above a triangle") {
    Mesh m;
    m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
    m.faces = {{0, 1, 2}};
    const TriangleIndex index(m);
    const BarycentricHit on_vertex = index.closest_point(Vec3(1, 0, 0));
    CHECK(on_vertex.signed_distance == 0.0);
    CHECK(on_vertex.bary == Vec3(0, 1, 0));

    const Vec3 centroid(1.0 / 3, 1.0 / 3, 0.0);
    const BarycentricHit above = index.closest_point(centroid + Vec3(0, 0, 1));
    CHECK(above.signed_distance == doctest::Approx(1.0).epsilon(1e-15));
    CHECK((above.point - centroid).norm() < 1e-15);
    CHECK(above.bary.sum() == doctest::Approx(1.0).epsilon(1e-12));
    const BarycentricHit below = index.closest_point(centroid - Vec3(0, 0, 2));
    CHECK(below.signed_distance == doctest::Approx(-2.0));
}

TEST_CASE("closest point matches brute force over all faces") {
    std::mt19937_64 rng(42);
    for (int trial = 0; trial < 5; ++trial) {
        const Mesh m = trial % 2 ? random_soup(rng, 300) : make_uv_sphere(12, 20, 0.7);
        const TriangleIndex index(m);
        for (int q = 0; q < 100; ++q) {
            const Vec3 query = random_vec(rng, -1.5, 1.5);
            const BarycentricHit fast = index.closest_point(query);
            const BarycentricHit slow = brute_force_closest(m, query);
            CHECK(fast.face == slow.face);
            CHECK(fast.point == slow.point);
            CHECK(fast.signed_distance == slow.signed_distance);
            CHECK(std::abs(fast.bary.sum() - 1.0) < 1e-9);
            CHECK(fast.bary.minCoeff() >= -1e-9);
            CHECK(fast.bary.maxCoeff() <= 1.0 + 1e-9);
        }
    }
}

TEST_CASE("point index equals linear scan, including ties") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> coord(0, 4);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<Vec3> pts;
        const int n = 1 + trial * 50;
        // Integer lattice points produce many exact distance ties and duplicates.
        for (int i = 0; i < n; ++i) pts.emplace_back(coord(rng), coord(rng), coord(rng));
        const PointIndex index(pts);
        for (int q = 0; q < 50; ++q) {
            const Vec3 query(coord(rng) + 0.5 * (q % 2), coord(rng), coord(rng) - 0.5);
            int best = -1;
            double best_d2 = std::numeric_limits<double>::infinity();
            for (int i = 0; i < n; ++i) {
                const double d2 = (pts[i] - query).squaredNorm();
                if (d2 < best_d2) {
                    best_d2 = d2;
                    best = i;
                }
            }
            const auto r = index.nearest(query);
            CHECK(r.index == best);
            CHECK(r.squared_distance == best_d2);
        }
    }
}

TEST_CASE("vertex normals: planar quad") {
    const Mesh quad = make_plane_grid(1, 1);
    for (const Vec3& n : compute_vertex_normals(quad)) CHECK((n - Vec3(0, 0, 1)).norm() < 1e-15);
}

TEST_CASE("vertex normals: sphere normals are radial within 2 degrees") {
    const Mesh sphere = make_uv_sphere(40, 80, 1.3);
    const auto normals = compute_vertex_normals(sphere);
    double worst = 0.0;
    for (int v = 0; v < sphere.vertex_count(); ++v) worst = std::max(worst, angle_deg(normals[v], sphere.vertices[v]));
    CHECK(worst < 2.0);
}

TEST_CASE("vertex normals: isolated vertex is flagged with a zero normal") {
    Mesh m = make_plane_grid(1, 1);
    m.vertices.emplace_back(5, 5, 5);
    const auto normals = compute_vertex_normals(m);
    CHECK(normals.back() == Vec3::Zero());
    m.vertex_normals = normals;
    CHECK_NOTHROW(validate(m));
}

TEST_CASE("vertex normals are rotation equivariant") {
    std::mt19937_64 rng(11);
    Mesh m = make_uv_sphere(10, 14, 1.0);
    for (Vec3& p : m.vertices) p += random_vec(rng, -0.1, 0.1);
    const auto base = compute_vertex_normals(m);
    for (int trial = 0; trial < 10; ++trial) {
        const Mat3 R = random_rotation(rng);
        Mesh rotated = m;
        for (Vec3& p : rotated.vertices) p = R * p;
        const auto rn = compute_vertex_normals(rotated);
        for (int v = 0; v < m.vertex_count(); ++v) CHECK((rn[v] - R * base[v]).norm() < 1e-6);
    }
}
