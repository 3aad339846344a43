#pragma once

#include <cstdint>
#include <vector>

#include "garment/mesh.hpp"
#include "garment/skinning.hpp"

namespace garment {

// Procedural stand-in for a 4D capture: a sleeve (open tube along +x from
// the shoulder to the wrist) skinned over a shoulder-elbow-wrist chain.
// Circumferential ridges near the elbow are displaced along the rest-pose
// normal with amplitude ridge_amplitude * sin^2(angle_gain * elbow angle).
struct SynthConfig {
    int frames = 100;
    double frame_rate = 30.0;
    int rings = 81;               // template resolution: rings x segments vertices
    int segments = 24;
    int scan_factor = 2;          // scan has factor x rings and segments (factor^2 x vertices)
    double radius = 0.05;
    double upper_arm = 0.30;
    double forearm = 0.25;
    int ridge_count = 4;
    double ridge_amplitude = 0.004;  // meters
    double ridge_width = 0.01;       // Gaussian sigma along the axis, meters
    double ridge_spacing = 0.03;
    double angle_gain = 1.0;
    double max_elbow_angle = 1.5707963267948966;  // radians
    double noise = 0.0;              // Gaussian sigma per scan vertex, meters
    double hole_probability = 0.0;   // per sleeve region (8 regions)
    double hole_radius = 0.03;       // geodesic, meters
    std::uint64_t seed = 1;

    void validate() const;  // throws ConfigError
};

struct SynthSequence {
    Mesh tmpl;                       // rest pose, UVs and normals
    Skeleton skeleton;
    SkinWeights weights;             // for the template
    std::vector<int> template_boundary;
    double frame_rate = 30.0;
    std::vector<Pose> poses;
    std::vector<Mesh> scans;                   // posed, with normals
    std::vector<std::vector<int>> scan_boundary;  // vertex indices into each scan
    std::vector<Mesh> ground_truth;            // template topology, posed
    std::vector<Mesh> ground_truth_rest;       // template topology, rest pose
};

SynthSequence generate(const SynthConfig& config);

// Sleeve skeleton and nearest-bone smoothstep weights for points along +x.
Skeleton arm_skeleton(const SynthConfig& config);
SkinWeights sleeve_weights(const std::vector<Vec3>& rest, const SynthConfig& config);

// Pose of frame t (deterministic in seed and t); joint 1 is the elbow,
// bent about +z by elbow_angle(t).
Pose synth_pose(const SynthConfig& config, int frame);
double elbow_angle(const SynthConfig& config, int frame);

// Rest-pose displacement along the outward normal at axial position x and
// angle phi (radians, 0 = +y) for a given elbow angle.
double ridge_displacement(const SynthConfig& config, double x, double phi, double elbow);

}  // namespace garment
