#include "garment/obj_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <string_view>

#include "garment/errors.hpp"
#include "garment/file_util.hpp"

namespace garment {

namespace {

struct Corner {
    int v = -1;
    int vt = -1;
    int vn = -1;
};

class LineParser {
public:
    LineParser(const std::string& source, int line, std::string_view text)
        : source_(source), line_(line), text_(text) {}

    bool next_token(std::string_view& token) {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\r')) ++pos_;
        if (pos_ >= text_.size()) return false;
        const std::size_t start = pos_;
        while (pos_ < text_.size() && text_[pos_] != ' ' && text_[pos_] != '\t' && text_[pos_] != '\r') ++pos_;
        token = text_.substr(start, pos_ - start);
        return true;
    }

    double number() {
        std::string_view token;
        if (!next_token(token)) fail("missing coordinate");
        double value = 0.0;
        const auto res = std::from_chars(token.data(), token.data() + token.size(), value);
        if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
            fail("invalid number '" + std::string(token) + "'");
        }
        return value;
    }

    // Resolves a 1-based (or negative relative) OBJ index into [0, count).
    int index(std::string_view token, int count, const char* what) {
        int raw = 0;
        const auto res = std::from_chars(token.data(), token.data() + token.size(), raw);
        if (res.ec != std::errc() || res.ptr != token.data() + token.size() || raw == 0) {
            fail(std::string("invalid ") + what + " index '" + std::string(token) + "'");
        }
        const int resolved = raw > 0 ? raw - 1 : count + raw;
        if (resolved < 0 || resolved >= count) {
            fail(std::string(what) + " index " + std::to_string(raw) + " out of range (have " +
                 std::to_string(count) + ")");
        }
        return resolved;
    }

    [[noreturn]] void fail(const std::string& what) const { throw ParseError(source_, line_, what); }

private:
    const std::string& source_;
    int line_;
    std::string_view text_;
    std::size_t pos_ = 0;
};

void append_number(std::string& out, double value) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    out.append(buf, res.ptr);
}

}  // namespace

Mesh read_obj(std::istream& in, const std::string& source_name) {
    Mesh mesh;
    std::vector<Vec3> normals;
    std::vector<int> normal_of_vertex;
    bool normals_consistent = true;
    bool any_vt = false;
    bool any_missing_vt = false;

    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        LineParser parser(source_name, line_no, line);
        std::string_view keyword;
        if (!parser.next_token(keyword) || keyword.front() == '#') continue;

        if (keyword == "v") {
            const double x = parser.number();
            const double y = parser.number();
            const double z = parser.number();
            mesh.vertices.emplace_back(x, y, z);
        } else if (keyword == "vt") {
            const double u = parser.number();
            const double v = parser.number();
            mesh.uvs.emplace_back(u, v);
        } else if (keyword == "vn") {
            const double x = parser.number();
            const double y = parser.number();
            const double z = parser.number();
            normals.emplace_back(x, y, z);
        } else if (keyword == "f") {
            std::vector<Corner> corners;
            std::string_view token;
            while (parser.next_token(token)) {
                Corner c;
                const std::size_t s1 = token.find('/');
                c.v = parser.index(token.substr(0, s1), mesh.vertex_count(), "vertex");
                if (s1 != std::string_view::npos) {
                    const std::string_view rest = token.substr(s1 + 1);
                    const std::size_t s2 = rest.find('/');
                    const std::string_view vt = rest.substr(0, s2);
                    if (!vt.empty()) c.vt = parser.index(vt, static_cast<int>(mesh.uvs.size()), "uv");
                    if (s2 != std::string_view::npos) {
                        const std::string_view vn = rest.substr(s2 + 1);
                        if (!vn.empty()) c.vn = parser.index(vn, static_cast<int>(normals.size()), "normal");
                    }
                }
                corners.push_back(c);
            }
            if (corners.size() < 3) parser.fail("face needs at least 3 corners");
            for (std::size_t k = 1; k + 1 < corners.size(); ++k) {
                const Corner tri[3] = {corners[0], corners[k], corners[k + 1]};
                const Face f{tri[0].v, tri[1].v, tri[2].v};
                if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) parser.fail("degenerate face (repeated vertex)");
                mesh.faces.push_back(f);
                const bool has_vt = tri[0].vt >= 0 && tri[1].vt >= 0 && tri[2].vt >= 0;
                if (has_vt) {
                    any_vt = true;
                    mesh.uv_faces.push_back({tri[0].vt, tri[1].vt, tri[2].vt});
                } else {
                    any_missing_vt = true;
                    mesh.uv_faces.push_back({0, 0, 0});
                }
                for (const Corner& c : tri) {
                    if (c.vn < 0) continue;
                    if (normal_of_vertex.empty()) normal_of_vertex.assign(mesh.vertices.size(), -1);
                    if (normal_of_vertex.size() < mesh.vertices.size()) normal_of_vertex.resize(mesh.vertices.size(), -1);
                    int& slot = normal_of_vertex[c.v];
                    if (slot >= 0 && slot != c.vn && normals[slot] != normals[c.vn]) normals_consistent = false;
                    slot = c.vn;
                }
            }
        }
        // Other records (o, g, s, usemtl, mtllib, l, p) carry nothing we use.
    }

    if (!any_vt || any_missing_vt) mesh.uv_faces.clear();
    if (!normals.empty()) {
        if (!normal_of_vertex.empty() && normals_consistent) {
            normal_of_vertex.resize(mesh.vertices.size(), -1);
            mesh.vertex_normals.assign(mesh.vertices.size(), Vec3::Zero());
            for (std::size_t i = 0; i < normal_of_vertex.size(); ++i) {
                if (normal_of_vertex[i] >= 0) mesh.vertex_normals[i] = normals[normal_of_vertex[i]];
            }
        } else if (normal_of_vertex.empty() && normals.size() == mesh.vertices.size()) {
            mesh.vertex_normals = normals;
        }
    }
    return mesh;
}

Mesh load_obj(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path.string());
    return read_obj(in, path.string());
}

void write_obj(std::ostream& out, const Mesh& mesh) {
    std::string buf;
    buf.reserve(64 * (mesh.vertices.size() + mesh.faces.size()));
    for (const Vec3& p : mesh.vertices) {
        buf += "v ";
        append_number(buf, p.x());
        buf += ' ';
        append_number(buf, p.y());
        buf += ' ';
        append_number(buf, p.z());
        buf += '\n';
    }
    for (const Vec2& uv : mesh.uvs) {
        buf += "vt ";
        append_number(buf, uv.x());
        buf += ' ';
        append_number(buf, uv.y());
        buf += '\n';
    }
    for (const Vec3& n : mesh.vertex_normals) {
        buf += "vn ";
        append_number(buf, n.x());
        buf += ' ';
        append_number(buf, n.y());
        buf += ' ';
        append_number(buf, n.z());
        buf += '\n';
    }
    const bool uv = mesh.has_uvs();
    const bool vn = mesh.has_normals();
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        buf += 'f';
        for (int c = 0; c < 3; ++c) {
            const int v = mesh.faces[f][c] + 1;
            buf += ' ';
            buf += std::to_string(v);
            if (uv || vn) {
                buf += '/';
                if (uv) buf += std::to_string(mesh.uv_faces[f][c] + 1);
                if (vn) {
                    buf += '/';
                    buf += std::to_string(v);
                }
            }
        }
        buf += '\n';
    }
    out << buf;
}

void save_obj(const Mesh& mesh, const std::filesystem::path& path) {
    write_atomically(path, [&](std::ostream& out) { write_obj(out, mesh); });
}

}  // namespace garment
