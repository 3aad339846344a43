#include "garment/skinning.hpp"

#include <cmath>

#include "garment/errors.hpp"

namespace garment {

int Skeleton::find(const std::string& name) const {
    for (int j = 0; j < joint_count(); ++j) {
        if (joints[j].name == name) return j;
    }
    return -1;
}

Pose Pose::identity(int joint_count) {
    Pose pose;
    pose.rotations.assign(joint_count, Quat::Identity());
    return pose;
}

void validate(const Skeleton& skeleton) {
    if (skeleton.joints.empty()) throw DataError("skeleton has no joints");
    if (skeleton.joints[0].parent != -1) throw DataError("joint 0 must be the root");
    for (int j = 1; j < skeleton.joint_count(); ++j) {
        const int p = skeleton.joints[j].parent;
        if (p < 0 || p >= j) {
            throw DataError("joint " + std::to_string(j) + " has parent " + std::to_string(p) +
                            "; parents must precede children and only joint 0 may be a root");
        }
    }
}

void validate(const Pose& pose, const Skeleton& skeleton) {
    if (static_cast<int>(pose.rotations.size()) != skeleton.joint_count()) {
        throw DataError("pose has " + std::to_string(pose.rotations.size()) + " rotations for " +
                        std::to_string(skeleton.joint_count()) + " joints");
    }
    for (std::size_t j = 0; j < pose.rotations.size(); ++j) {
        if (std::abs(pose.rotations[j].norm() - 1.0) > 1e-9) {
            throw DataError("pose rotation of joint " + std::to_string(j) + " is not a unit quaternion");
        }
    }
    if (!pose.bone_scales.empty()) {
        if (static_cast<int>(pose.bone_scales.size()) != skeleton.joint_count()) {
            throw DataError("bone scale count does not match joint count");
        }
        for (double s : pose.bone_scales) {
            if (!(s > 0.0)) throw DataError("bone scales must be positive");
        }
    }
}

void validate(const SkinWeights& weights, const Skeleton& skeleton, int vertex_count) {
    if (weights.vertex_count() < vertex_count) {
        throw DataError("skin weights missing for vertex " + std::to_string(weights.vertex_count()));
    }
    for (int v = 0; v < vertex_count; ++v) {
        const auto& inf = weights.per_vertex[v];
        if (inf.empty()) throw DataError("skin weights missing for vertex " + std::to_string(v));
        if (inf.size() > kMaxInfluences) {
            throw DataError("vertex " + std::to_string(v) + " has more than 4 influences");
        }
        double sum = 0.0;
        for (const Influence& i : inf) {
            if (i.joint < 0 || i.joint >= skeleton.joint_count()) {
                throw DataError("vertex " + std::to_string(v) + " references unknown joint " + std::to_string(i.joint));
            }
            if (i.weight < 0.0) throw DataError("negative skin weight at vertex " + std::to_string(v));
            sum += i.weight;
        }
        if (std::abs(sum - 1.0) > 1e-9) {
            throw DataError("skin weights of vertex " + std::to_string(v) + " do not sum to 1");
        }
    }
}

std::vector<Affine> joint_world_transforms(const Skeleton& skeleton, const Pose& pose) {
    std::vector<Affine> world(skeleton.joints.size());
    for (int j = 0; j < skeleton.joint_count(); ++j) {
        const Joint& joint = skeleton.joints[j];
        const double scale = pose.bone_scales.empty() ? 1.0 : pose.bone_scales[j];
        Affine local = Affine::Identity();
        local.translate(scale * joint.offset);
        local.rotate(joint.rest_rotation * pose.rotations[j]);
        if (joint.parent < 0) {
            Affine root = Affine::Identity();
            root.translate(pose.root_translation);
            world[j] = root * local;
        } else {
            world[j] = world[joint.parent] * local;
        }
    }
    return world;
}

std::vector<Affine> skinning_transforms(const Skeleton& skeleton, const Pose& pose) {
    const std::vector<Affine> posed = joint_world_transforms(skeleton, pose);
    const std::vector<Affine> rest = joint_world_transforms(skeleton, Pose::identity(skeleton.joint_count()));
    std::vector<Affine> result(posed.size());
    for (std::size_t j = 0; j < posed.size(); ++j) result[j] = posed[j] * rest[j].inverse(Eigen::Isometry);
    return result;
}

Affine blended_transform(const std::vector<Influence>& influences, const std::vector<Affine>& transforms) {
    Affine blended;
    blended.matrix().setZero();
    for (const Influence& inf : influences) blended.matrix() += inf.weight * transforms[inf.joint].matrix();
    blended.matrix().row(3) << 0.0, 0.0, 0.0, 1.0;
    return blended;
}

std::vector<Vec3> skin_points(const std::vector<Vec3>& rest, const SkinWeights& weights, const Skeleton& skeleton,
                              const Pose& pose) {
    validate(pose, skeleton);
    validate(weights, skeleton, static_cast<int>(rest.size()));
    const std::vector<Affine> transforms = skinning_transforms(skeleton, pose);
    std::vector<Vec3> out(rest.size());
    for (std::size_t v = 0; v < rest.size(); ++v) {
        out[v] = blended_transform(weights.per_vertex[v], transforms) * rest[v];
    }
    return out;
}

std::vector<Vec3> unskin_points(const std::vector<Vec3>& posed, const SkinWeights& weights,
                                const Skeleton& skeleton, const Pose& pose) {
    validate(pose, skeleton);
    validate(weights, skeleton, static_cast<int>(posed.size()));
    const std::vector<Affine> transforms = skinning_transforms(skeleton, pose);
    std::vector<Vec3> out(posed.size());
    for (std::size_t v = 0; v < posed.size(); ++v) {
        const Affine blended = blended_transform(weights.per_vertex[v], transforms);
        const Mat3 linear = blended.linear();
        const double det = linear.determinant();
        if (!(std::abs(det) > 1e-12)) {
            throw NumericalError("singular blended skinning transform at vertex " + std::to_string(v));
        }
        out[v] = linear.partialPivLu().solve(posed[v] - blended.translation());
    }
    return out;
}

namespace {

Mesh replace_positions(const Mesh& source, std::vector<Vec3> positions) {
    Mesh out = source;
    out.vertices = std::move(positions);
    if (out.has_normals()) out.vertex_normals = compute_vertex_normals(out);
    return out;
}

}  // namespace

Mesh skin(const Mesh& rest, const SkinWeights& weights, const Skeleton& skeleton, const Pose& pose) {
    return replace_positions(rest, skin_points(rest.vertices, weights, skeleton, pose));
}

Mesh unskin(const Mesh& posed, const SkinWeights& weights, const Skeleton& skeleton, const Pose& pose) {
    return replace_positions(posed, unskin_points(posed.vertices, weights, skeleton, pose));
}

Vec3 rotation_vector(const Quat& q) {
    Quat c = q.normalized();
    if (c.w() < 0.0) c.coeffs() = -c.coeffs();
    const Eigen::AngleAxisd aa(c);
    return aa.angle() * aa.axis();
}

Quat from_rotation_vector(const Vec3& rv) {
    const double angle = rv.norm();
    if (angle == 0.0) return Quat::Identity();
    return Quat(Eigen::AngleAxisd(angle, rv / angle));
}

}  // namespace garment
