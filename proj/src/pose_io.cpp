#include "garment/pose_io.hpp"

#include <sstream>

#include <json.hpp>

#include "garment/errors.hpp"
#include "garment/file_util.hpp"

namespace garment {

using nlohmann::json;

namespace {

json quat_json(const Quat& q) { return json::array({q.w(), q.x(), q.y(), q.z()}); }
json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

Quat quat_from(const json& j) { return Quat(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()); }
Vec3 vec_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

json parse_json(const std::filesystem::path& path) {
    const std::string text = read_text_file(path);
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void dump(const json& doc, const std::filesystem::path& path) {
    write_atomically(path, [&](std::ostream& out) { out << doc.dump(1) << '\n'; });
}

}  // namespace

void save_pose_sequence(const PoseSequence& sequence, const std::filesystem::path& path) {
    json joints = json::array();
    for (const Joint& j : sequence.skeleton.joints) {
        joints.push_back({{"name", j.name}, {"parent", j.parent}, {"offset", vec_json(j.offset)},
                          {"rest_rotation", quat_json(j.rest_rotation)}});
    }
    json frames = json::array();
    for (const Pose& p : sequence.frames) {
        json rots = json::array();
        for (const Quat& q : p.rotations) rots.push_back(quat_json(q));
        json frame = {{"root_translation", vec_json(p.root_translation)}, {"rotations", rots}};
        if (!p.bone_scales.empty()) frame["bone_scales"] = p.bone_scales;
        frames.push_back(std::move(frame));
    }
    dump({{"frame_rate", sequence.frame_rate}, {"skeleton", {{"joints", joints}}}, {"frames", frames}}, path);
}

PoseSequence load_pose_sequence(const std::filesystem::path& path) {
    const json doc = parse_json(path);
    PoseSequence seq;
    try {
        seq.frame_rate = doc.at("frame_rate").get<double>();
        for (const json& j : doc.at("skeleton").at("joints")) {
            Joint joint;
            joint.name = j.at("name").get<std::string>();
            joint.parent = j.at("parent").get<int>();
            joint.offset = vec_from(j.at("offset"));
            joint.rest_rotation = quat_from(j.at("rest_rotation"));
            seq.skeleton.joints.push_back(joint);
        }
        for (const json& f : doc.at("frames")) {
            Pose pose;
            pose.root_translation = vec_from(f.at("root_translation"));
            for (const json& q : f.at("rotations")) pose.rotations.push_back(quat_from(q));
            if (f.contains("bone_scales")) pose.bone_scales = f.at("bone_scales").get<std::vector<double>>();
            seq.frames.push_back(std::move(pose));
        }
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": malformed pose document: " + e.what());
    }
    validate(seq.skeleton);
    for (const Pose& p : seq.frames) validate(p, seq.skeleton);
    return seq;
}

void save_skin_weights(const SkinWeights& weights, const std::filesystem::path& path) {
    json per_vertex = json::array();
    for (const auto& inf : weights.per_vertex) {
        json row = json::array();
        for (const Influence& i : inf) row.push_back(json::array({i.joint, i.weight}));
        per_vertex.push_back(std::move(row));
    }
    dump({{"vertex_count", weights.vertex_count()}, {"influences", per_vertex}}, path);
}

SkinWeights load_skin_weights(const std::filesystem::path& path) {
    const json doc = parse_json(path);
    SkinWeights weights;
    try {
        for (const json& row : doc.at("influences")) {
            std::vector<Influence> inf;
            for (const json& pair : row) inf.push_back({pair.at(0).get<int>(), pair.at(1).get<double>()});
            weights.per_vertex.push_back(std::move(inf));
        }
        if (doc.at("vertex_count").get<int>() != weights.vertex_count()) {
            throw DataError(path.string() + ": vertex_count does not match influence rows");
        }
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": malformed skin weights: " + e.what());
    }
    return weights;
}

void save_index_list(const std::vector<int>& indices, const std::filesystem::path& path) {
    write_atomically(path, [&](std::ostream& out) {
        for (int i : indices) out << i << '\n';
    });
}

std::vector<int> load_index_list(const std::filesystem::path& path) {
    std::istringstream in(read_text_file(path));
    std::vector<int> indices;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        std::istringstream ls(line);
        int value = 0;
        while (ls >> value) indices.push_back(value);
        if (!ls.eof()) throw ParseError(path.string(), line_no, "expected integer indices");
    }
    return indices;
}

}  // namespace garment
