#pragma once

#include <filesystem>
#include <vector>

#include "garment/skinning.hpp"

namespace garment {

// One document per motion sequence: skeleton, frame rate and per-frame poses.
struct PoseSequence {
    Skeleton skeleton;
    double frame_rate = 60.0;
    std::vector<Pose> frames;
};

// JSON documents. Quaternions are stored as [w, x, y, z].
void save_pose_sequence(const PoseSequence& sequence, const std::filesystem::path& path);
PoseSequence load_pose_sequence(const std::filesystem::path& path);

// {"vertex_count": n, "influences": [[[joint, weight], ...], ...]}
void save_skin_weights(const SkinWeights& weights, const std::filesystem::path& path);
SkinWeights load_skin_weights(const std::filesystem::path& path);

// Plain text, one zero-based index per line; '#' starts a comment.
void save_index_list(const std::vector<int>& indices, const std::filesystem::path& path);
std::vector<int> load_index_list(const std::filesystem::path& path);

}  // namespace garment
