#pragma once

#include <string>
#include <vector>

#include <Eigen/Geometry>

#include "garment/mesh.hpp"

namespace garment {

using Quat = Eigen::Quaterniond;
using Affine = Eigen::Affine3d;

struct Joint {
    std::string name;
    int parent = -1;  // -1 only for the root
    // Rest transform relative to the parent: translate by `offset`, then rotate.
    Vec3 offset = Vec3::Zero();
    Quat rest_rotation = Quat::Identity();
};

// Joints are topologically sorted: every parent precedes its children and
// joint 0 is the single root.
struct Skeleton {
    std::vector<Joint> joints;

    int joint_count() const { return static_cast<int>(joints.size()); }
    int find(const std::string& name) const;  // -1 if absent
};

// Per-joint local rotations applied on top of the rest transform, a root
// translation, and optional per-joint scales of the parent->joint offset.
struct Pose {
    std::vector<Quat> rotations;
    Vec3 root_translation = Vec3::Zero();
    std::vector<double> bone_scales;  // empty means all 1

    static Pose identity(int joint_count);
};

struct Influence {
    int joint = 0;
    double weight = 0.0;
};

constexpr int kMaxInfluences = 4;

// Up to kMaxInfluences joint influences per vertex.
struct SkinWeights {
    std::vector<std::vector<Influence>> per_vertex;

    int vertex_count() const { return static_cast<int>(per_vertex.size()); }
};

void validate(const Skeleton& skeleton);
void validate(const Pose& pose, const Skeleton& skeleton);
void validate(const SkinWeights& weights, const Skeleton& skeleton, int vertex_count);

// Global joint transforms for a pose (root first).
std::vector<Affine> joint_world_transforms(const Skeleton& skeleton, const Pose& pose);

// Per-joint skinning matrices: world(pose) * world(rest)^-1.
std::vector<Affine> skinning_transforms(const Skeleton& skeleton, const Pose& pose);

// Weighted blend of the skinning matrices for one vertex (3x4 affine).
Affine blended_transform(const std::vector<Influence>& influences, const std::vector<Affine>& transforms);

// Linear blend skinning of rest-pose positions.
std::vector<Vec3> skin_points(const std::vector<Vec3>& rest, const SkinWeights& weights, const Skeleton& skeleton,
                              const Pose& pose);

// Inverse skinning: solves blended(v) * x = y per vertex. Throws
// NumericalError naming the first vertex whose blended transform is singular.
std::vector<Vec3> unskin_points(const std::vector<Vec3>& posed, const SkinWeights& weights,
                                const Skeleton& skeleton, const Pose& pose);

// Mesh versions: topology and UVs are copied unchanged; vertex normals, if
// present, are recomputed for the new positions.
Mesh skin(const Mesh& rest, const SkinWeights& weights, const Skeleton& skeleton, const Pose& pose);
Mesh unskin(const Mesh& posed, const SkinWeights& weights, const Skeleton& skeleton, const Pose& pose);

// Axis-angle vector of a rotation, angle in [0, pi].
Vec3 rotation_vector(const Quat& q);
Quat from_rotation_vector(const Vec3& rv);

}  // namespace garment
