#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "garment/registration.hpp"
#include "garment/synth.hpp"

namespace garment {

// Stage drivers behind the command-line tool. Every stage reads a manifest,
// writes its artifacts under the manifest's output directory (atomically, one
// file at a time) and emits a report as a plain-text table plus a JSON twin
// in <output>/reports/. Output bytes depend only on the inputs; --jobs never
// changes them.

struct SubspaceStageConfig {
    int k = 0;  // <= 0: min(n, 3v)
};

struct RegressionStageConfig {
    std::vector<std::string> joints;  // empty: every joint
    int history = 0;
    double holdout_fraction = 0.2;    // trailing block of frames kept out of the fit
};

struct BakeStageConfig {
    int resolution = 256;
    double cutoff = 0.02;         // meters, texel-to-scan search radius
    int dilate = 0;               // texel rings grown around UV islands
    bool tangent = true;          // also write tangent-space maps
    std::string source = "prediction";  // "prediction" | "registration"
};

struct FrameEntry {
    std::filesystem::path scan;
    std::filesystem::path scan_boundary;  // index list (.txt) or point cloud (.obj)
    std::optional<std::filesystem::path> ground_truth;
};

struct PipelineManifest {
    std::filesystem::path tmpl;
    std::filesystem::path weights;
    std::filesystem::path poses;
    std::filesystem::path template_boundary;
    std::vector<FrameEntry> frames;
    std::filesystem::path output;

    RegistrationConfig registration;
    SubspaceStageConfig subspace;
    RegressionStageConfig regression;
    BakeStageConfig bake;

    int frame_count() const { return static_cast<int>(frames.size()); }
};

// Relative paths resolve against the manifest's directory. `output_override`
// replaces the manifest's output directory. Throws ConfigError for malformed
// or unknown keys and DataError for missing referenced files.
PipelineManifest load_manifest(const std::filesystem::path& path,
                               const std::optional<std::filesystem::path>& output_override = std::nullopt);

// Paths are written relative to the manifest's directory when possible.
void save_manifest(const PipelineManifest& manifest, const std::filesystem::path& path);

// Strict parsers: unknown keys or wrong types throw ConfigError.
SynthConfig synth_config_from_json(const nlohmann::json& doc);
nlohmann::json synth_config_to_json(const SynthConfig& config);
RegistrationConfig registration_config_from_json(const nlohmann::json& doc);
nlohmann::json registration_config_to_json(const RegistrationConfig& config);

std::string frame_tag(int frame);  // zero-padded, "0007"

// Fixed artifact layout below the output directory.
namespace layout {
std::filesystem::path registered(const std::filesystem::path& out, int frame);  // posed
std::filesystem::path rest(const std::filesystem::path& out, int frame);        // pose-normalized
std::filesystem::path subspace(const std::filesystem::path& out);
std::filesystem::path regressor(const std::filesystem::path& out);
std::filesystem::path coefficients(const std::filesystem::path& out);
std::filesystem::path prediction(const std::filesystem::path& out, int frame);
std::filesystem::path maps_manifest(const std::filesystem::path& out);
std::filesystem::path report(const std::filesystem::path& out, const std::string& stage, const char* extension);
}  // namespace layout

// Writes template, weights, poses, boundaries, scans, ground truth and
// manifest.json into `directory`. Returns the manifest path.
std::filesystem::path run_synth(const SynthConfig& config, const std::filesystem::path& directory);

struct RegisterOptions {
    int jobs = 1;
    // Frame i starts from frame i-1's pose-normalized result, re-posed to
    // frame i, instead of from the skinned template. Forces one job.
    bool sequential = false;
};
void run_register(const PipelineManifest& manifest, const RegisterOptions& options);

void run_fit_subspace(const PipelineManifest& manifest);

struct RegressOptions {
    bool fit = false;
    bool predict = false;
    bool eval = false;
};
void run_regress(const PipelineManifest& manifest, const RegressOptions& options);

void run_bake(const PipelineManifest& manifest, int jobs);

struct EvalTemporalOptions {
    std::optional<std::filesystem::path> maps;  // default: the bake stage's maps.json
    std::string generated = "lr";
    std::string target = "hr";
    std::string space = "global";  // "global" | "tangent"
};
void run_eval_temporal(const PipelineManifest& manifest, const EvalTemporalOptions& options);

struct RetargetOptions {
    std::filesystem::path offsets;               // v rows "dx dy dz"
    std::optional<std::filesystem::path> poses;  // default: the manifest's poses
};
void run_retarget(const PipelineManifest& manifest, const RetargetOptions& options);

// Per-frame offsets file: one "dx dy dz" row per clothing vertex, '#' comments.
std::vector<Vec3> load_offsets(const std::filesystem::path& path);

// Runs body(i) for i in [0, n) on up to `jobs` threads. The exception of the
// lowest failing index is rethrown after all workers finish.
void parallel_for(int n, int jobs, const std::function<void(int)>& body);

}  // namespace garment
