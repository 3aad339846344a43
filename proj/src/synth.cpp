#include "garment/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <string>

#include "garment/errors.hpp"
#include "garment/primitives.hpp"

namespace garment {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr int kHoleRegions = 8;

struct Wave {
    double amplitude, frequency, phase;  // frequency in Hz
    double at(double seconds) const { return amplitude * std::sin(kTwoPi * frequency * seconds + phase); }
};

// Everything random about a sequence, drawn in a fixed order from the seed.
struct Params {
    double elbow_frequency = 0.0, elbow_phase = 0.0;
    Wave shoulder[3];
    Wave wrist_twist;
    Wave root[3];
    std::vector<double> ridge_gain, ridge_phase;
};

Params derive(const SynthConfig& c) {
    std::mt19937_64 rng(c.seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto range = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
    Params p;
    p.elbow_frequency = range(0.25, 0.5);
    p.elbow_phase = range(0.0, kTwoPi);
    const double shoulder_amp[3] = {0.2, 0.3, 0.4};
    for (int a = 0; a < 3; ++a) p.shoulder[a] = {shoulder_amp[a], range(0.1, 0.4), range(0.0, kTwoPi)};
    p.wrist_twist = {0.3, range(0.2, 0.5), range(0.0, kTwoPi)};
    for (auto& w : p.root) w = {0.05, range(0.05, 0.3), range(0.0, kTwoPi)};
    for (int r = 0; r < c.ridge_count; ++r) {
        p.ridge_gain.push_back(range(0.6, 1.0));
        p.ridge_phase.push_back(range(0.0, kTwoPi));
    }
    return p;
}

double smoothstep(double t) {
    t = std::clamp(t, 0.0, 1.0);
    return t * t * (3.0 - 2.0 * t);
}

// Angle about the tube axis, 0 at +y, in (-pi, pi].
double axial_angle(const Vec3& rest) { return std::atan2(rest.z(), rest.y()); }

double wrapped(double a) { return std::remainder(a, kTwoPi); }

Vec3 outward(const Vec3& rest) { return Vec3(0.0, rest.y(), rest.z()).normalized(); }

double ridge_field(const SynthConfig& c, const Params& p, double x, double phi, double elbow) {
    const double gate = std::pow(std::sin(c.angle_gain * elbow), 2);
    if (gate == 0.0 || c.ridge_amplitude == 0.0) return 0.0;
    const double inner = std::pow(0.5 * (1.0 + std::cos(phi)), 2);  // folds gather on the inside of the bend
    double sum = 0.0;
    for (int r = 0; r < c.ridge_count; ++r) {
        const double centre = c.upper_arm + (r - 0.5 * (c.ridge_count - 1)) * c.ridge_spacing +
                              0.004 * std::sin(2.0 * phi + p.ridge_phase[static_cast<std::size_t>(r)]);
        const double s = (x - centre) / c.ridge_width;
        sum += p.ridge_gain[static_cast<std::size_t>(r)] * std::exp(-0.5 * s * s);
    }
    return c.ridge_amplitude * gate * inner * sum;
}

std::vector<Vec3> displaced(const SynthConfig& c, const Params& p, const std::vector<Vec3>& rest, double elbow) {
    std::vector<Vec3> out(rest.size());
    for (std::size_t i = 0; i < rest.size(); ++i) {
        out[i] = rest[i] + ridge_field(c, p, rest[i].x(), axial_angle(rest[i]), elbow) * outward(rest[i]);
    }
    return out;
}

struct Hole {
    double x, phi;
};

// Removes faces whose rest-pose centroid lies inside a hole, then drops the
// vertices no face uses. Returns old->new vertex index (-1 if dropped).
std::vector<int> punch_holes(Mesh& scan, const std::vector<Vec3>& rest, const std::vector<Hole>& holes,
                             double radius, double tube_radius) {
    std::vector<int> remap(scan.vertices.size(), -1);
    if (holes.empty()) {
        for (std::size_t i = 0; i < remap.size(); ++i) remap[i] = static_cast<int>(i);
        return remap;
    }
    std::vector<Face> faces, uv_faces;
    for (std::size_t f = 0; f < scan.faces.size(); ++f) {
        const Face& face = scan.faces[f];
        const Vec3 c = (rest[static_cast<std::size_t>(face[0])] + rest[static_cast<std::size_t>(face[1])] +
                        rest[static_cast<std::size_t>(face[2])]) / 3.0;
        bool inside = false;
        for (const Hole& h : holes) {
            const double dx = c.x() - h.x;
            const double ds = tube_radius * wrapped(axial_angle(c) - h.phi);
            inside = inside || dx * dx + ds * ds < radius * radius;  // geodesic distance on the cylinder
        }
        if (inside) continue;
        faces.push_back(face);
        if (scan.has_uvs()) uv_faces.push_back(scan.uv_faces[f]);
    }
    for (const Face& f : faces) {
        for (int v : f) remap[static_cast<std::size_t>(v)] = 0;
    }
    Mesh out;
    for (std::size_t i = 0; i < remap.size(); ++i) {
        if (remap[i] < 0) continue;
        remap[i] = static_cast<int>(out.vertices.size());
        out.vertices.push_back(scan.vertices[i]);
    }
    for (Face f : faces) {
        for (int& v : f) v = remap[static_cast<std::size_t>(v)];
        out.faces.push_back(f);
    }
    out.uvs = scan.uvs;
    out.uv_faces = uv_faces;
    scan = std::move(out);
    return remap;
}

}  // namespace

void SynthConfig::validate() const {
    if (frames < 1) throw ConfigError("synth frames must be >= 1");
    if (!(frame_rate > 0.0)) throw ConfigError("synth frame_rate must be > 0");
    if (rings < 2 || segments < 3) throw ConfigError("synth template needs >= 2 rings and >= 3 segments");
    if (scan_factor < 2) throw ConfigError("synth scan_factor must be >= 2 (scan >= 4x template vertices)");
    if (!(radius > 0.0) || !(upper_arm > 0.0) || !(forearm > 0.0)) throw ConfigError("synth sleeve dimensions must be > 0");
    if (ridge_count < 0 || !(ridge_amplitude >= 0.0) || !(ridge_width > 0.0) || !(ridge_spacing >= 0.0)) {
        throw ConfigError("synth ridge parameters invalid (count >= 0, amplitude >= 0, width > 0)");
    }
    if (!(noise >= 0.0)) throw ConfigError("synth noise must be >= 0");
    if (!(hole_probability >= 0.0 && hole_probability <= 1.0)) throw ConfigError("synth hole_probability must be in [0, 1]");
    if (!(hole_radius > 0.0)) throw ConfigError("synth hole_radius must be > 0");
}

Skeleton arm_skeleton(const SynthConfig& c) {
    Skeleton s;
    s.joints.push_back({"shoulder", -1, Vec3::Zero(), Quat::Identity()});
    s.joints.push_back({"elbow", 0, Vec3(c.upper_arm, 0.0, 0.0), Quat::Identity()});
    s.joints.push_back({"wrist", 1, Vec3(c.forearm, 0.0, 0.0), Quat::Identity()});
    return s;
}

SkinWeights sleeve_weights(const std::vector<Vec3>& rest, const SynthConfig& c) {
    const double blend = 0.03;  // half-width of the smoothstep around each joint
    const double joints[2] = {c.upper_arm, c.upper_arm + c.forearm};
    SkinWeights w;
    for (const Vec3& p : rest) {
        // Weight of the bone beyond each joint.
        const double e = smoothstep((p.x() - (joints[0] - blend)) / (2.0 * blend));
        const double r = smoothstep((p.x() - (joints[1] - blend)) / (2.0 * blend));
        std::vector<Influence> inf;
        const double ws[3] = {1.0 - e, e * (1.0 - r), e * r};
        for (int j = 0; j < 3; ++j) {
            if (ws[j] > 0.0) inf.push_back({j, ws[j]});
        }
        w.per_vertex.push_back(inf);
    }
    return w;
}

double elbow_angle(const SynthConfig& c, int frame) {
    const Params p = derive(c);
    const double t = frame / c.frame_rate;
    return c.max_elbow_angle * (0.5 - 0.5 * std::cos(kTwoPi * p.elbow_frequency * t + p.elbow_phase));
}

Pose synth_pose(const SynthConfig& c, int frame) {
    const Params p = derive(c);
    const double t = frame / c.frame_rate;
    Pose pose = Pose::identity(3);
    pose.rotations[0] = from_rotation_vector(Vec3(p.shoulder[0].at(t), p.shoulder[1].at(t), p.shoulder[2].at(t)));
    pose.rotations[1] = from_rotation_vector(Vec3(0.0, 0.0, elbow_angle(c, frame)));
    pose.rotations[2] = from_rotation_vector(Vec3(p.wrist_twist.at(t), 0.0, 0.0));
    pose.root_translation = Vec3(p.root[0].at(t), p.root[1].at(t), p.root[2].at(t));
    return pose;
}

double ridge_displacement(const SynthConfig& config, double x, double phi, double elbow) {
    return ridge_field(config, derive(config), x, phi, elbow);
}

SynthSequence generate(const SynthConfig& c) {
    c.validate();
    const Params params = derive(c);
    const double length = c.upper_arm + c.forearm;

    SynthSequence seq;
    seq.frame_rate = c.frame_rate;
    seq.skeleton = arm_skeleton(c);
    seq.tmpl = with_vertex_normals(make_tube(c.rings, c.segments, c.radius, 0.0, length));
    seq.weights = sleeve_weights(seq.tmpl.vertices, c);
    for (int s = 0; s < c.segments; ++s) seq.template_boundary.push_back(s);
    for (int s = 0; s < c.segments; ++s) seq.template_boundary.push_back((c.rings - 1) * c.segments + s);

    const int scan_rings = (c.rings - 1) * c.scan_factor + 1;
    const int scan_segments = c.segments * c.scan_factor;
    const Mesh scan_rest = make_tube(scan_rings, scan_segments, c.radius, 0.0, length);
    const SkinWeights scan_weights = sleeve_weights(scan_rest.vertices, c);
    // Boundary marks at the template's angular spacing on both end rings.
    std::vector<int> scan_marks;
    for (int s = 0; s < scan_segments; s += c.scan_factor) scan_marks.push_back(s);
    for (int s = 0; s < scan_segments; s += c.scan_factor) scan_marks.push_back((scan_rings - 1) * scan_segments + s);

    // Per-frame randomness comes from a second stream so that the pose and
    // ridge parameters do not depend on noise settings.
    std::mt19937_64 rng(c.seed ^ 0x9e3779b97f4a7c15ull);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double margin = c.hole_radius + length / (c.rings - 1);

    for (int t = 0; t < c.frames; ++t) {
        const Pose pose = synth_pose(c, t);
        const double elbow = elbow_angle(c, t);
        seq.poses.push_back(pose);

        Mesh rest_gt = seq.tmpl;
        rest_gt.vertices = displaced(c, params, seq.tmpl.vertices, elbow);
        rest_gt = with_vertex_normals(rest_gt);
        seq.ground_truth.push_back(skin(rest_gt, seq.weights, seq.skeleton, pose));
        seq.ground_truth_rest.push_back(std::move(rest_gt));

        Mesh scan = scan_rest;
        scan.vertices = skin_points(displaced(c, params, scan_rest.vertices, elbow), scan_weights, seq.skeleton, pose);
        std::vector<Hole> holes;
        for (int region = 0; region < kHoleRegions; ++region) {
            const double roll = u(rng), fx = u(rng), fphi = u(rng);
            if (roll >= c.hole_probability || length <= 2.0 * margin) continue;
            const double x0 = margin + (length - 2.0 * margin) * (region / 2) / (kHoleRegions / 2.0);
            const double x1 = margin + (length - 2.0 * margin) * (region / 2 + 1) / (kHoleRegions / 2.0);
            holes.push_back({x0 + fx * (x1 - x0), (region % 2 == 0 ? -std::numbers::pi : 0.0) + fphi * std::numbers::pi});
        }
        if (c.noise > 0.0) {
            for (Vec3& p : scan.vertices) p += c.noise * Vec3(gauss(rng), gauss(rng), gauss(rng));
        }
        const std::vector<int> remap = punch_holes(scan, scan_rest.vertices, holes, c.hole_radius, c.radius);
        std::vector<int> marks;
        for (int m : scan_marks) {
            if (remap[static_cast<std::size_t>(m)] >= 0) marks.push_back(remap[static_cast<std::size_t>(m)]);
        }
        seq.scan_boundary.push_back(std::move(marks));
        seq.scans.push_back(with_vertex_normals(std::move(scan)));
    }
    return seq;
}

}  // namespace garment
