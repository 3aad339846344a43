#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "garment/mesh.hpp"
#include "garment/skinning.hpp"

namespace garment {

// Linear shape model over pose-normalized registrations:
//   shape(lambda) = mean + basis * lambda
// `basis` columns are the leading left singular vectors of the 3v x n offset
// matrix, orthonormal, each signed so its largest-magnitude entry is positive.
// `topology` carries faces and UVs; its vertices are the mean shape.
struct SubspaceModel {
    Eigen::VectorXd mean;             // 3v, flattened (x0,y0,z0,x1,...)
    Eigen::MatrixXd basis;            // 3v x k
    Eigen::VectorXd singular_values;  // k, non-increasing
    Mesh topology;

    int k() const { return static_cast<int>(basis.cols()); }
    int vertex_count() const { return static_cast<int>(mean.size() / 3); }
};

// Requires n >= 2 frames sharing topology and 1 <= k <= min(n, 3v).
SubspaceModel fit_subspace(const std::vector<Mesh>& registrations, int k);

// lambda = basis^T (x - mean).
Eigen::VectorXd project(const SubspaceModel& model, const std::vector<Vec3>& vertices);

// Rest-pose shape mean + basis * lambda (no skinning).
std::vector<Vec3> synthesize(const SubspaceModel& model, const Eigen::VectorXd& lambda);

// Blend shape followed by linear blend skinning into `pose`.
Mesh reconstruct(const SubspaceModel& model, const Eigen::VectorXd& lambda, const SkinWeights& weights,
                 const Skeleton& skeleton, const Pose& pose);

// Same model with mean replaced by mean + offsets (3v, flattened).
SubspaceModel retarget_mean(const SubspaceModel& model, const Eigen::VectorXd& offsets);

void save_subspace(const std::filesystem::path& path, const SubspaceModel& model);
SubspaceModel load_subspace(const std::filesystem::path& path);

}  // namespace garment
