#include "garment/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <numbers>
#include <set>
#include <sstream>
#include <thread>

#include "garment/array_file.hpp"
#include "garment/bake.hpp"
#include "garment/errors.hpp"
#include "garment/file_util.hpp"
#include "garment/normal_map.hpp"
#include "garment/obj_io.hpp"
#include "garment/pose_io.hpp"
#include "garment/regression.hpp"
#include "garment/skinning.hpp"
#include "garment/subspace.hpp"
#include "garment/temporal_loss.hpp"

namespace garment {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads keys of one JSON object into typed fields; anything left unread is
// an error so that typos in configs never pass silently.
class StrictObject {
public:
    StrictObject(const json& doc, std::string where) : doc_(doc), where_(std::move(where)) {
        if (!doc_.is_object()) throw ConfigError(where_ + ": expected an object");
    }

    template <class T>
    bool read(const char* key, T& out) {
        const auto it = doc_.find(key);
        if (it == doc_.end()) return false;
        seen_.insert(key);
        try {
            out = it->template get<T>();
        } catch (const json::exception&) {
            throw ConfigError(where_ + "." + key + ": wrong type (" + it->type_name() + ")");
        }
        return true;
    }

    const json* child(const char* key) {
        const auto it = doc_.find(key);
        if (it == doc_.end()) return nullptr;
        seen_.insert(key);
        return &*it;
    }

    void finish() const {
        for (const auto& item : doc_.items()) {
            if (!seen_.count(item.key())) throw ConfigError(where_ + ": unknown key '" + item.key() + "'");
        }
    }

private:
    const json& doc_;
    std::string where_;
    std::set<std::string> seen_;
};

json parse_config_file(const fs::path& path) {
    const std::string text = read_text_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

std::string relative_to(const fs::path& p, const fs::path& base) {
    const fs::path rel = p.lexically_relative(base);
    return rel.empty() ? p.generic_string() : rel.generic_string();
}

void require_file(const fs::path& path, const std::string& what) {
    if (!fs::is_regular_file(path)) throw DataError(what + " not found: " + path.string());
}

// ---- reports -------------------------------------------------------------

struct Report {
    std::string stage;
    std::vector<std::string> columns;
    std::vector<std::vector<json>> rows;
    json summary = json::object();
};

std::string cell_text(const json& v) {
    if (v.is_null()) return "-";
    if (v.is_boolean()) return v.get<bool>() ? "yes" : "no";
    if (v.is_number_integer()) return std::to_string(v.get<long long>());
    if (v.is_number_float()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.6g", v.get<double>());
        return buf;
    }
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
}

void write_report(const fs::path& out, const Report& report) {
    std::vector<std::size_t> width(report.columns.size());
    for (std::size_t c = 0; c < width.size(); ++c) width[c] = report.columns[c].size();
    std::vector<std::vector<std::string>> cells;
    for (const auto& row : report.rows) {
        std::vector<std::string> line;
        for (std::size_t c = 0; c < row.size(); ++c) {
            line.push_back(cell_text(row[c]));
            width[c] = std::max(width[c], line.back().size());
        }
        cells.push_back(std::move(line));
    }
    write_atomically(layout::report(out, report.stage, ".txt"), [&](std::ostream& os) {
        os << "# " << report.stage << '\n';
        for (const auto& item : report.summary.items()) os << "# " << item.key() << " = " << cell_text(item.value()) << '\n';
        auto emit = [&](const std::vector<std::string>& line) {
            for (std::size_t c = 0; c < line.size(); ++c) {
                if (c) os << "  ";
                os << std::string(width[c] - line[c].size(), ' ') << line[c];
            }
            os << '\n';
        };
        emit(report.columns);
        for (const auto& line : cells) emit(line);
    });

    json rows = json::array();
    for (const auto& row : report.rows) {
        json obj = json::object();
        for (std::size_t c = 0; c < row.size(); ++c) obj[report.columns[c]] = row[c];
        rows.push_back(std::move(obj));
    }
    const json doc = {{"stage", report.stage}, {"summary", report.summary}, {"columns", report.columns}, {"rows", rows}};
    write_atomically(layout::report(out, report.stage, ".json"), [&](std::ostream& os) { os << doc.dump(1) << '\n'; });
}

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// ---- shared inputs -------------------------------------------------------

struct Rig {
    Mesh tmpl;
    SkinWeights weights;
    PoseSequence poses;
    std::vector<int> template_boundary;
};

Rig load_rig(const PipelineManifest& m) {
    Rig rig;
    rig.tmpl = load_obj(m.tmpl);
    rig.weights = load_skin_weights(m.weights);
    rig.poses = load_pose_sequence(m.poses);
    rig.template_boundary = load_index_list(m.template_boundary);
    validate(rig.weights, rig.poses.skeleton, rig.tmpl.vertex_count());
    if (static_cast<int>(rig.poses.frames.size()) != m.frame_count()) {
        throw DataError("pose sequence has " + std::to_string(rig.poses.frames.size()) + " frames, manifest lists " +
                        std::to_string(m.frame_count()));
    }
    for (int i : rig.template_boundary) {
        if (i < 0 || i >= rig.tmpl.vertex_count()) throw DataError("template boundary index out of range: " + std::to_string(i));
    }
    return rig;
}

std::vector<Vec3> load_scan_boundary(const fs::path& path, const Mesh& scan) {
    if (path.extension() == ".obj") return load_obj(path).vertices;
    std::vector<Vec3> points;
    for (int i : load_index_list(path)) {
        if (i < 0 || i >= scan.vertex_count()) throw DataError(path.string() + ": scan index out of range: " + std::to_string(i));
        points.push_back(scan.vertices[static_cast<std::size_t>(i)]);
    }
    return points;
}

double rms_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    if (a.size() != b.size()) throw DataError("vertex count mismatch in comparison");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += (a[i] - b[i]).squaredNorm();
    return a.empty() ? 0.0 : std::sqrt(sum / static_cast<double>(a.size()));
}

double max_distance(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, (a[i] - b[i]).norm());
    return worst;
}

std::vector<Mesh> load_rest_registrations(const PipelineManifest& m) {
    std::vector<Mesh> rest;
    for (int i = 0; i < m.frame_count(); ++i) {
        const fs::path p = layout::rest(m.output, i);
        require_file(p, "pose-normalized registration (run `register` first)");
        rest.push_back(load_obj(p));
    }
    return rest;
}

Eigen::MatrixXd load_coefficients(const fs::path& path, const std::string& name) {
    require_file(path, "coefficient file");
    return load_array_file(path, "garment-coefficients").get(name);
}

void save_coefficients(const fs::path& path, const std::string& name, const Eigen::MatrixXd& lambda) {
    ArrayFile file;
    file.format = "garment-coefficients";
    file.meta = {{"k", lambda.rows()}, {"frames", lambda.cols()}};
    file.arrays.push_back({name, lambda});
    save_array_file(path, file);
}

std::vector<int> joint_indices(const RegressionStageConfig& c, const Skeleton& skeleton) {
    std::vector<int> out;
    if (c.joints.empty()) {
        for (int j = 0; j < skeleton.joint_count(); ++j) out.push_back(j);
        return out;
    }
    for (const std::string& name : c.joints) {
        const int j = skeleton.find(name);
        if (j < 0) throw ConfigError("regression joint '" + name + "' is not in the skeleton");
        out.push_back(j);
    }
    return out;
}

int training_frames(const RegressionStageConfig& c, int n) {
    const int held = static_cast<int>(std::floor(c.holdout_fraction * n + 0.5));
    return std::max(1, n - held);
}

fs::path map_path(const fs::path& dir, const std::string& stem) { return dir / (stem + ".png"); }
fs::path mask_path(const fs::path& dir, const std::string& stem) { return dir / (stem + "_mask.png"); }

}  // namespace

// ---- config parsing ------------------------------------------------------

SynthConfig synth_config_from_json(const json& doc) {
    SynthConfig c;
    StrictObject o(doc, "synth");
    o.read("frames", c.frames);
    o.read("frame_rate", c.frame_rate);
    o.read("rings", c.rings);
    o.read("segments", c.segments);
    o.read("scan_factor", c.scan_factor);
    o.read("radius", c.radius);
    o.read("upper_arm", c.upper_arm);
    o.read("forearm", c.forearm);
    o.read("ridge_count", c.ridge_count);
    o.read("ridge_amplitude", c.ridge_amplitude);
    o.read("ridge_width", c.ridge_width);
    o.read("ridge_spacing", c.ridge_spacing);
    o.read("angle_gain", c.angle_gain);
    o.read("max_elbow_angle", c.max_elbow_angle);
    o.read("noise", c.noise);
    o.read("hole_probability", c.hole_probability);
    o.read("hole_radius", c.hole_radius);
    o.read("seed", c.seed);
    o.finish();
    c.validate();
    return c;
}

json synth_config_to_json(const SynthConfig& c) {
    return {{"frames", c.frames},
            {"frame_rate", c.frame_rate},
            {"rings", c.rings},
            {"segments", c.segments},
            {"scan_factor", c.scan_factor},
            {"radius", c.radius},
            {"upper_arm", c.upper_arm},
            {"forearm", c.forearm},
            {"ridge_count", c.ridge_count},
            {"ridge_amplitude", c.ridge_amplitude},
            {"ridge_width", c.ridge_width},
            {"ridge_spacing", c.ridge_spacing},
            {"angle_gain", c.angle_gain},
            {"max_elbow_angle", c.max_elbow_angle},
            {"noise", c.noise},
            {"hole_probability", c.hole_probability},
            {"hole_radius", c.hole_radius},
            {"seed", c.seed}};
}

RegistrationConfig registration_config_from_json(const json& doc) {
    RegistrationConfig c;
    StrictObject o(doc, "registration");
    o.read("w_rigid", c.w_rigid);
    o.read("w_smooth", c.w_smooth);
    o.read("w_bound", c.w_bound);
    o.read("max_iterations", c.max_iterations);
    o.read("correspondence_cutoff", c.correspondence_cutoff);
    o.read("normal_cutoff_deg", c.normal_cutoff_deg);
    o.read("tolerance", c.tolerance);
    o.read("grid_spacing", c.grid_spacing);
    o.read("stiffness_relaxation", c.stiffness_relaxation);
    o.read("stiffness_floor", c.stiffness_floor);
    o.read("relax_threshold", c.relax_threshold);
    o.read("initial_damping", c.initial_damping);
    o.read("max_damping_retries", c.max_damping_retries);
    o.finish();
    c.validate();
    return c;
}

json registration_config_to_json(const RegistrationConfig& c) {
    return {{"w_rigid", c.w_rigid},
            {"w_smooth", c.w_smooth},
            {"w_bound", c.w_bound},
            {"max_iterations", c.max_iterations},
            {"correspondence_cutoff", c.correspondence_cutoff},
            {"normal_cutoff_deg", c.normal_cutoff_deg},
            {"tolerance", c.tolerance},
            {"grid_spacing", c.grid_spacing},
            {"stiffness_relaxation", c.stiffness_relaxation},
            {"stiffness_floor", c.stiffness_floor},
            {"relax_threshold", c.relax_threshold},
            {"initial_damping", c.initial_damping},
            {"max_damping_retries", c.max_damping_retries}};
}

// ---- manifest ------------------------------------------------------------

PipelineManifest load_manifest(const fs::path& path, const std::optional<fs::path>& output_override) {
    if (!fs::is_regular_file(path)) throw ConfigError("manifest not found: " + path.string());
    const json doc = parse_config_file(path);
    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
    PipelineManifest m;
    StrictObject top(doc, "manifest");
    std::string format, tmpl, weights, poses, boundary, output = "out";
    int version = 0;
    top.read("format", format);
    top.read("version", version);
    if (format != "garment-manifest" || version != 1) throw ConfigError(path.string() + ": not a version 1 garment manifest");
    if (!top.read("template", tmpl) || !top.read("weights", weights) || !top.read("poses", poses) ||
        !top.read("template_boundary", boundary)) {
        throw ConfigError(path.string() + ": template, weights, poses and template_boundary are required");
    }
    top.read("output", output);
    m.tmpl = resolve(base, tmpl);
    m.weights = resolve(base, weights);
    m.poses = resolve(base, poses);
    m.template_boundary = resolve(base, boundary);
    m.output = output_override ? *output_override : resolve(base, output);

    const json* frames = top.child("frames");
    if (!frames || !frames->is_array() || frames->empty()) throw ConfigError(path.string() + ": frames must be a non-empty array");
    for (std::size_t i = 0; i < frames->size(); ++i) {
        StrictObject f((*frames)[i], "frames[" + std::to_string(i) + "]");
        std::string scan, scan_boundary, gt;
        if (!f.read("scan", scan) || !f.read("scan_boundary", scan_boundary)) {
            throw ConfigError(path.string() + ": frames[" + std::to_string(i) + "] needs scan and scan_boundary");
        }
        FrameEntry e{resolve(base, scan), resolve(base, scan_boundary), std::nullopt};
        if (f.read("ground_truth", gt)) e.ground_truth = resolve(base, gt);
        f.finish();
        m.frames.push_back(std::move(e));
    }
    top.child("synth");  // provenance only

    if (const json* stages = top.child("stages")) {
        StrictObject s(*stages, "stages");
        if (const json* r = s.child("registration")) m.registration = registration_config_from_json(*r);
        if (const json* sub = s.child("subspace")) {
            StrictObject o(*sub, "stages.subspace");
            o.read("k", m.subspace.k);
            o.finish();
        }
        if (const json* reg = s.child("regression")) {
            StrictObject o(*reg, "stages.regression");
            o.read("joints", m.regression.joints);
            o.read("history", m.regression.history);
            o.read("holdout_fraction", m.regression.holdout_fraction);
            o.finish();
            if (m.regression.history < 0) throw ConfigError("stages.regression.history must be >= 0");
            if (!(m.regression.holdout_fraction >= 0.0 && m.regression.holdout_fraction < 1.0)) {
                throw ConfigError("stages.regression.holdout_fraction must be in [0, 1)");
            }
        }
        if (const json* b = s.child("bake")) {
            StrictObject o(*b, "stages.bake");
            o.read("resolution", m.bake.resolution);
            o.read("cutoff", m.bake.cutoff);
            o.read("dilate", m.bake.dilate);
            o.read("tangent", m.bake.tangent);
            o.read("source", m.bake.source);
            o.finish();
            if (m.bake.resolution < 1 || m.bake.resolution > 8192) throw ConfigError("stages.bake.resolution must be in [1, 8192]");
            if (!(m.bake.cutoff > 0.0)) throw ConfigError("stages.bake.cutoff must be > 0");
            if (m.bake.dilate < 0) throw ConfigError("stages.bake.dilate must be >= 0");
            if (m.bake.source != "prediction" && m.bake.source != "registration") {
                throw ConfigError("stages.bake.source must be 'prediction' or 'registration'");
            }
        }
        s.finish();
    }
    top.finish();

    require_file(m.tmpl, "template");
    require_file(m.weights, "skin weights");
    require_file(m.poses, "pose sequence");
    require_file(m.template_boundary, "template boundary");
    for (const FrameEntry& e : m.frames) {
        require_file(e.scan, "scan");
        require_file(e.scan_boundary, "scan boundary");
        if (e.ground_truth) require_file(*e.ground_truth, "ground truth");
    }
    return m;
}

void save_manifest(const PipelineManifest& m, const fs::path& path) {
    const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
    json frames = json::array();
    for (const FrameEntry& e : m.frames) {
        json f = {{"scan", relative_to(e.scan, base)}, {"scan_boundary", relative_to(e.scan_boundary, base)}};
        if (e.ground_truth) f["ground_truth"] = relative_to(*e.ground_truth, base);
        frames.push_back(std::move(f));
    }
    const json stages = {
        {"registration", registration_config_to_json(m.registration)},
        {"subspace", {{"k", m.subspace.k}}},
        {"regression",
         {{"joints", m.regression.joints}, {"history", m.regression.history}, {"holdout_fraction", m.regression.holdout_fraction}}},
        {"bake",
         {{"resolution", m.bake.resolution},
          {"cutoff", m.bake.cutoff},
          {"dilate", m.bake.dilate},
          {"tangent", m.bake.tangent},
          {"source", m.bake.source}}}};
    const json doc = {{"format", "garment-manifest"},
                      {"version", 1},
                      {"template", relative_to(m.tmpl, base)},
                      {"weights", relative_to(m.weights, base)},
                      {"poses", relative_to(m.poses, base)},
                      {"template_boundary", relative_to(m.template_boundary, base)},
                      {"output", relative_to(m.output, base)},
                      {"frames", frames},
                      {"stages", stages}};
    write_atomically(path, [&](std::ostream& os) { os << doc.dump(1) << '\n'; });
}

std::string frame_tag(int frame) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d", frame);
    return buf;
}

namespace layout {
fs::path registered(const fs::path& out, int frame) { return out / "registrations" / ("registered_" + frame_tag(frame) + ".obj"); }
fs::path rest(const fs::path& out, int frame) { return out / "registrations" / ("rest_" + frame_tag(frame) + ".obj"); }
fs::path subspace(const fs::path& out) { return out / "models" / "subspace.gsm"; }
fs::path regressor(const fs::path& out) { return out / "models" / "regressor.grm"; }
fs::path coefficients(const fs::path& out) { return out / "models" / "coefficients.gca"; }
fs::path prediction(const fs::path& out, int frame) { return out / "predictions" / ("predicted_" + frame_tag(frame) + ".obj"); }
fs::path maps_manifest(const fs::path& out) { return out / "maps" / "maps.json"; }
fs::path report(const fs::path& out, const std::string& stage, const char* extension) {
    return out / "reports" / (stage + extension);
}
}  // namespace layout

// ---- parallelism ---------------------------------------------------------

void parallel_for(int n, int jobs, const std::function<void(int)>& body) {
    if (n <= 0) return;
    jobs = std::clamp(jobs, 1, n);
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next++; i < n; i = next++) {
            try {
                body(i);
            } catch (...) {
                errors[static_cast<std::size_t>(i)] = std::current_exception();
            }
        }
    };
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < jobs; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

// ---- stages --------------------------------------------------------------

fs::path run_synth(const SynthConfig& config, const fs::path& dir) {
    const SynthSequence seq = generate(config);
    PipelineManifest m;
    m.tmpl = dir / "template.obj";
    m.weights = dir / "weights.json";
    m.poses = dir / "poses.json";
    m.template_boundary = dir / "template_boundary.txt";
    m.output = dir / "out";
    // The generated shape depends on the elbow angle alone; regressing on the
    // other joints only fits noise along unrelated, smooth trajectories.
    m.regression.joints = {"elbow"};

    save_obj(seq.tmpl, m.tmpl);
    save_skin_weights(seq.weights, m.weights);
    save_pose_sequence({seq.skeleton, seq.frame_rate, seq.poses}, m.poses);
    save_index_list(seq.template_boundary, m.template_boundary);
    for (int t = 0; t < config.frames; ++t) {
        const std::size_t i = static_cast<std::size_t>(t);
        FrameEntry e;
        e.scan = dir / "scans" / ("scan_" + frame_tag(t) + ".obj");
        e.scan_boundary = dir / "scans" / ("scan_" + frame_tag(t) + "_boundary.txt");
        e.ground_truth = dir / "ground_truth" / ("gt_" + frame_tag(t) + ".obj");
        Mesh scan = seq.scans[i];
        scan.vertex_normals.clear();  // recomputed by consumers
        save_obj(scan, e.scan);
        save_index_list(seq.scan_boundary[i], e.scan_boundary);
        save_obj(seq.ground_truth[i], *e.ground_truth);
        m.frames.push_back(std::move(e));
    }
    write_atomically(dir / "synth.json", [&](std::ostream& os) { os << synth_config_to_json(config).dump(1) << '\n'; });
    const fs::path manifest = dir / "manifest.json";
    save_manifest(m, manifest);

    Report report{"synth", {"frame", "scan_vertices", "scan_faces", "boundary_marks", "elbow_deg"}, {}, json::object()};
    for (int t = 0; t < config.frames; ++t) {
        const std::size_t i = static_cast<std::size_t>(t);
        report.rows.push_back({t, seq.scans[i].vertex_count(), seq.scans[i].face_count(),
                               static_cast<int>(seq.scan_boundary[i].size()), elbow_angle(config, t) * 180.0 / std::numbers::pi});
    }
    report.summary = {{"frames", config.frames}, {"template_vertices", seq.tmpl.vertex_count()}, {"seed", config.seed}};
    write_report(m.output, report);
    return manifest;
}

void run_register(const PipelineManifest& m, const RegisterOptions& options) {
    if (options.jobs < 1) throw ConfigError("--jobs must be >= 1");
    const Rig rig = load_rig(m);
    const int n = m.frame_count();

    struct Row {
        RegistrationResult result;
        std::optional<double> gt_rms;
    };
    std::vector<Row> rows(static_cast<std::size_t>(n));
    std::vector<Mesh> rest_results(static_cast<std::size_t>(n));

    auto register_frame = [&](int i) {
        const std::size_t s = static_cast<std::size_t>(i);
        const FrameEntry& e = m.frames[s];
        const Pose& pose = rig.poses.frames[s];
        const Mesh scan = load_obj(e.scan);
        const BoundarySets boundaries{rig.template_boundary, load_scan_boundary(e.scan_boundary, scan)};
        const Mesh& start_rest = (options.sequential && i > 0) ? rest_results[s - 1] : rig.tmpl;
        const Mesh start = skin(start_rest, rig.weights, rig.poses.skeleton, pose);
        Row row;
        row.result = register_template(start, scan, boundaries, std::nullopt, m.registration);
        Mesh rest = unskin(row.result.registered, rig.weights, rig.poses.skeleton, pose);
        if (e.ground_truth) row.gt_rms = rms_distance(row.result.registered.vertices, load_obj(*e.ground_truth).vertices);
        save_obj(row.result.registered, layout::registered(m.output, i));
        save_obj(rest, layout::rest(m.output, i));
        rest_results[s] = std::move(rest);
        row.result.registered = Mesh();
        rows[s] = std::move(row);
    };
    parallel_for(n, options.sequential ? 1 : options.jobs, register_frame);

    Report report{"register",
                  {"frame", "iterations", "converged", "energy_initial", "energy_final", "data", "rigid", "smooth", "bound",
                   "stiffness_scale", "gt_rms_mm"},
                  {},
                  json::object()};
    double gt_sum = 0.0, gt_max = 0.0;
    int gt_count = 0;
    for (int i = 0; i < n; ++i) {
        const Row& r = rows[static_cast<std::size_t>(i)];
        const EnergyTerms& f = r.result.final;
        std::optional<double> mm;
        if (r.gt_rms) {
            mm = *r.gt_rms * 1e3;
            gt_sum += *mm;
            gt_max = std::max(gt_max, *mm);
            ++gt_count;
        }
        report.rows.push_back({i, r.result.iterations, r.result.converged, r.result.initial.total, f.total, f.data, f.rigid,
                               f.smooth, f.bound, r.result.stiffness_scale, optional_number(mm)});
    }
    report.summary = {{"frames", n}, {"sequential", options.sequential}};
    if (gt_count) {
        report.summary["gt_rms_mm_mean"] = gt_sum / gt_count;
        report.summary["gt_rms_mm_max"] = gt_max;
    }
    write_report(m.output, report);
}

void run_fit_subspace(const PipelineManifest& m) {
    const Rig rig = load_rig(m);
    const std::vector<Mesh> rest = load_rest_registrations(m);
    const int n = static_cast<int>(rest.size());
    const int full = std::min(n, 3 * rig.tmpl.vertex_count());
    const int k = m.subspace.k > 0 ? m.subspace.k : full;
    const SubspaceModel model = fit_subspace(rest, k);
    save_subspace(layout::subspace(m.output), model);

    Eigen::MatrixXd lambda(model.k(), n);
    Report report{"fit-subspace", {"frame", "rest_rms_mm", "rest_max_mm", "posed_rms_mm", "posed_max_mm"}, {}, json::object()};
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
        const std::size_t s = static_cast<std::size_t>(i);
        lambda.col(i) = project(model, rest[s].vertices);
        const std::vector<Vec3> rest_rec = synthesize(model, lambda.col(i));
        const Mesh posed_rec = reconstruct(model, lambda.col(i), rig.weights, rig.poses.skeleton, rig.poses.frames[s]);
        const Mesh registered = load_obj(layout::registered(m.output, i));
        const double posed_max = max_distance(posed_rec.vertices, registered.vertices);
        worst = std::max(worst, posed_max);
        report.rows.push_back({i, rms_distance(rest_rec, rest[s].vertices) * 1e3, max_distance(rest_rec, rest[s].vertices) * 1e3,
                               rms_distance(posed_rec.vertices, registered.vertices) * 1e3, posed_max * 1e3});
    }
    save_coefficients(layout::coefficients(m.output), "lambda", lambda);

    const Eigen::VectorXd& sv = model.singular_values;
    report.summary = {{"frames", n},
                      {"k", model.k()},
                      {"vertices", model.vertex_count()},
                      {"posed_max_mm", worst * 1e3},
                      {"sigma_1", sv.size() ? sv(0) : 0.0},
                      {"sigma_k", sv.size() ? sv(sv.size() - 1) : 0.0}};
    write_report(m.output, report);
}

void run_regress(const PipelineManifest& m, const RegressOptions& options) {
    if (!options.fit && !options.predict && !options.eval) throw ConfigError("regress needs at least one of --fit, --predict, --eval");
    const Rig rig = load_rig(m);
    require_file(layout::subspace(m.output), "subspace model (run `fit-subspace` first)");
    const SubspaceModel model = load_subspace(layout::subspace(m.output));
    const Eigen::MatrixXd lambda = load_coefficients(layout::coefficients(m.output), "lambda");
    const int n = m.frame_count();
    if (lambda.cols() != n || lambda.rows() != model.k()) throw DataError("coefficient file does not match the subspace model");
    const int n_train = training_frames(m.regression, n);

    ControlLayout control;
    control.joints = joint_indices(m.regression, rig.poses.skeleton);
    control.history = m.regression.history;
    control.k = model.k();
    const Eigen::MatrixXd theta = build_control_sequence(rig.poses.frames, control, lambda);

    if (options.fit) {
        const LinearShapeRegressor reg = fit_linear(theta.leftCols(n_train), lambda.leftCols(n_train), control);
        save_regressor(layout::regressor(m.output), reg);
        Report report{"regress-fit", {"quantity", "value"}, {}, json::object()};
        report.rows = {{"train_frames", n_train},
                       {"holdout_frames", n - n_train},
                       {"control_dimension", control.dimension()},
                       {"k", model.k()},
                       {"rank", reg.rank},
                       {"train_mse", evaluate_mse(reg, theta.leftCols(n_train), lambda.leftCols(n_train))}};
        report.summary = {{"history", control.history}, {"joints", static_cast<int>(control.joints.size())}};
        write_report(m.output, report);
    }
    if (!options.predict && !options.eval) return;

    require_file(layout::regressor(m.output), "regressor (run `regress --fit` first)");
    const LinearShapeRegressor reg = load_regressor(layout::regressor(m.output));
    const Eigen::MatrixXd predicted = predict_sequence(reg, rig.poses.frames);
    std::vector<Mesh> meshes;
    for (int i = 0; i < n; ++i) {
        meshes.push_back(reconstruct(model, predicted.col(i), rig.weights, rig.poses.skeleton, rig.poses.frames[static_cast<std::size_t>(i)]));
    }
    if (options.predict) {
        save_coefficients(m.output / "predictions" / "coefficients.gca", "lambda", predicted);
        for (int i = 0; i < n; ++i) save_obj(meshes[static_cast<std::size_t>(i)], layout::prediction(m.output, i));
    }
    if (options.eval) {
        Report report{"regress-eval", {"frame", "split", "coefficient_se", "registration_rms_mm", "gt_rms_mm"}, {}, json::object()};
        double rms_sum[2] = {0.0, 0.0};
        int count[2] = {0, 0};
        for (int i = 0; i < n; ++i) {
            const std::size_t s = static_cast<std::size_t>(i);
            const int split = i < n_train ? 0 : 1;
            const double se = (predicted.col(i) - lambda.col(i)).squaredNorm() / static_cast<double>(model.k());
            const double reg_rms = rms_distance(meshes[s].vertices, load_obj(layout::registered(m.output, i)).vertices) * 1e3;
            std::optional<double> gt;
            if (m.frames[s].ground_truth) gt = rms_distance(meshes[s].vertices, load_obj(*m.frames[s].ground_truth).vertices) * 1e3;
            rms_sum[split] += reg_rms;
            ++count[split];
            report.rows.push_back({i, split ? "holdout" : "train", se, reg_rms, optional_number(gt)});
        }
        report.summary = {{"train_mse", evaluate_mse(reg, theta.leftCols(n_train), lambda.leftCols(n_train))},
                          {"train_rms_mm_mean", count[0] ? rms_sum[0] / count[0] : 0.0}};
        if (n_train < n) {
            report.summary["holdout_mse"] = evaluate_mse(reg, theta.rightCols(n - n_train), lambda.rightCols(n - n_train));
            report.summary["holdout_rms_mm_mean"] = rms_sum[1] / count[1];
        }
        write_report(m.output, report);
    }
}

void run_bake(const PipelineManifest& m, int jobs) {
    if (jobs < 1) throw ConfigError("--jobs must be >= 1");
    const BakeStageConfig& c = m.bake;
    const int n = m.frame_count();
    const fs::path dir = layout::maps_manifest(m.output).parent_path();
    for (int i = 0; i < n; ++i) {
        const fs::path p = c.source == "prediction" ? layout::prediction(m.output, i) : layout::registered(m.output, i);
        require_file(p, c.source == "prediction" ? "prediction (run `regress --predict` first)" : "registration");
    }

    struct Row {
        int lr = 0, hr = 0;
        double mean_angle = 0.0;
    };
    std::vector<Row> rows(static_cast<std::size_t>(n));
    parallel_for(n, jobs, [&](int i) {
        const Mesh recon = with_vertex_normals(
            load_obj(c.source == "prediction" ? layout::prediction(m.output, i) : layout::registered(m.output, i)));
        const Mesh scan = load_obj(m.frames[static_cast<std::size_t>(i)].scan);
        const UvRaster raster = rasterize_uvs(recon, c.resolution, c.resolution);
        const NormalMap lr = bake_lr(recon, raster);
        const NormalMap hr = bake_hr(scan, recon, c.resolution, c.resolution, c.cutoff);
        auto store = [&](const NormalMap& map, const std::string& stem) {
            const NormalMap out = c.dilate > 0 ? dilate(map, c.dilate) : map;
            save_normal_map(map_path(dir, stem), mask_path(dir, stem), out);
        };
        const std::string tag = frame_tag(i);
        store(lr, "lr_" + tag);
        store(hr, "hr_" + tag);
        if (c.tangent) {
            const TangentFrames frames = tangent_frames(recon, c.resolution, c.resolution);
            store(to_tangent(lr, frames), "lr_tangent_" + tag);
            store(to_tangent(hr, frames), "hr_tangent_" + tag);
        }
        Row row{lr.defined_count(), hr.defined_count(), 0.0};
        int both = 0;
        for (std::size_t k = 0; k < lr.normals.size(); ++k) {
            if (!lr.defined[k] || !hr.defined[k]) continue;
            row.mean_angle += std::acos(std::clamp(lr.normals[k].dot(hr.normals[k]), -1.0, 1.0));
            ++both;
        }
        row.mean_angle = both ? row.mean_angle / both * 180.0 / std::numbers::pi : 0.0;
        rows[static_cast<std::size_t>(i)] = row;
    });

    json frames = json::array();
    for (int i = 0; i < n; ++i) {
        const std::string tag = frame_tag(i);
        auto pair = [&](const std::string& stem) { return json{{"png", stem + ".png"}, {"mask", stem + "_mask.png"}}; };
        json f = {{"frame", i}, {"global", {{"lr", pair("lr_" + tag)}, {"hr", pair("hr_" + tag)}}}};
        if (c.tangent) f["tangent"] = {{"lr", pair("lr_tangent_" + tag)}, {"hr", pair("hr_tangent_" + tag)}};
        frames.push_back(std::move(f));
    }
    const json doc = {{"format", "garment-maps"},
                      {"version", 1},
                      {"width", c.resolution},
                      {"height", c.resolution},
                      {"encoding", "rgb = round(255 * (n + 1) / 2); mask bit 1 = defined"},
                      {"frames", frames}};
    write_atomically(layout::maps_manifest(m.output), [&](std::ostream& os) { os << doc.dump(1) << '\n'; });

    Report report{"bake", {"frame", "lr_texels", "hr_texels", "hr_coverage", "mean_lr_hr_angle_deg"}, {}, json::object()};
    for (int i = 0; i < n; ++i) {
        const Row& r = rows[static_cast<std::size_t>(i)];
        report.rows.push_back({i, r.lr, r.hr, r.lr ? static_cast<double>(r.hr) / r.lr : 0.0, r.mean_angle});
    }
    report.summary = {{"resolution", c.resolution}, {"source", c.source}, {"tangent", c.tangent}, {"dilate", c.dilate}};
    write_report(m.output, report);
}

void run_eval_temporal(const PipelineManifest& m, const EvalTemporalOptions& o) {
    if (o.space != "global" && o.space != "tangent") throw ConfigError("--space must be 'global' or 'tangent'");
    const fs::path maps = o.maps ? *o.maps : layout::maps_manifest(m.output);
    require_file(maps, "maps manifest (run `bake` first)");
    const json doc = parse_config_file(maps);
    const fs::path base = maps.parent_path();
    const NormalFrame frame = o.space == "tangent" ? NormalFrame::Tangent : NormalFrame::Global;
    std::vector<NormalMap> generated, target;
    try {
        for (const json& f : doc.at("frames")) {
            if (!f.contains(o.space)) throw DataError(maps.string() + ": frame without '" + o.space + "' maps");
            const json& space = f.at(o.space);
            for (const auto& [key, list] : {std::pair{o.generated, &generated}, std::pair{o.target, &target}}) {
                if (!space.contains(key)) throw ConfigError(maps.string() + ": no maps named '" + key + "'");
                const json& pair = space.at(key);
                list->push_back(load_normal_map(resolve(base, pair.at("png").get<std::string>()),
                                                resolve(base, pair.at("mask").get<std::string>()), frame));
            }
        }
    } catch (const json::exception& e) {
        throw DataError(maps.string() + ": malformed maps manifest: " + e.what());
    }
    if (generated.empty()) throw DataError(maps.string() + ": no frames");
    const TemporalLossReport loss = evaluate_sequence(generated, target);

    Report report{"eval-temporal", {"frame", "data", "temporal"}, {}, json::object()};
    for (const auto& f : loss.frames) report.rows.push_back({f.frame, f.data, optional_number(f.temporal)});
    report.summary = {{"generated", o.generated},
                      {"target", o.target},
                      {"space", o.space},
                      {"mean_data", loss.mean_data},
                      {"mean_temporal", loss.mean_temporal},
                      {"data_normalization", "mean over texels defined in both maps of the L1 norm of the normal difference"},
                      {"temporal_normalization", "sum over channels of |sum over all texels of (generated - previous target)|, "
                                                 "undefined texels as zero"}};
    write_report(m.output, report);
}

std::vector<Vec3> load_offsets(const fs::path& path) {
    std::istringstream in(read_text_file(path));
    std::vector<Vec3> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        std::vector<std::string> tokens;
        for (std::string t; ls >> t;) tokens.push_back(t);
        if (tokens.empty()) continue;
        double v[3] = {0.0, 0.0, 0.0};
        bool ok = tokens.size() == 3;
        for (std::size_t c = 0; ok && c < 3; ++c) {
            std::size_t used = 0;
            try {
                v[c] = std::stod(tokens[c], &used);
            } catch (const std::exception&) {
                ok = false;
            }
            ok = ok && used == tokens[c].size() && std::isfinite(v[c]);
        }
        if (!ok) throw ParseError(path.string(), line_no, "expected three finite numbers");
        out.emplace_back(v[0], v[1], v[2]);
    }
    return out;
}

void run_retarget(const PipelineManifest& m, const RetargetOptions& o) {
    const Rig rig = load_rig(m);
    require_file(layout::subspace(m.output), "subspace model (run `fit-subspace` first)");
    require_file(layout::regressor(m.output), "regressor (run `regress --fit` first)");
    const SubspaceModel model = load_subspace(layout::subspace(m.output));
    const LinearShapeRegressor reg = load_regressor(layout::regressor(m.output));
    const std::vector<Vec3> offsets = load_offsets(o.offsets);
    if (static_cast<int>(offsets.size()) != model.vertex_count()) {
        throw DataError(o.offsets.string() + ": " + std::to_string(offsets.size()) + " offsets for " +
                        std::to_string(model.vertex_count()) + " clothing vertices");
    }
    const SubspaceModel moved = retarget_mean(model, flatten(offsets));
    save_subspace(m.output / "retarget" / "subspace.gsm", moved);

    const PoseSequence poses = o.poses ? load_pose_sequence(*o.poses) : rig.poses;
    validate(rig.weights, poses.skeleton, model.vertex_count());
    const Eigen::MatrixXd lambda = predict_sequence(reg, poses.frames);
    Report report{"retarget", {"frame", "shift_rms_mm", "shift_max_mm"}, {}, json::object()};
    for (int i = 0; i < lambda.cols(); ++i) {
        const Pose& pose = poses.frames[static_cast<std::size_t>(i)];
        const Mesh before = reconstruct(model, lambda.col(i), rig.weights, poses.skeleton, pose);
        const Mesh after = reconstruct(moved, lambda.col(i), rig.weights, poses.skeleton, pose);
        save_obj(after, m.output / "retarget" / ("frame_" + frame_tag(i) + ".obj"));
        report.rows.push_back({i, rms_distance(after.vertices, before.vertices) * 1e3, max_distance(after.vertices, before.vertices) * 1e3});
    }
    report.summary = {{"frames", static_cast<int>(lambda.cols())}, {"vertices", model.vertex_count()}};
    write_report(m.output, report);
}

}  // namespace garment
