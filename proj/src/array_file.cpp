#include "garment/array_file.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>

#include "garment/errors.hpp"
#include "garment/file_util.hpp"

namespace garment {

using nlohmann::json;

namespace {

constexpr int kVersion = 1;

void put_le(std::ostream& out, double value) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(value);
    char bytes[8];
    for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xffu);
    out.write(bytes, 8);
}

bool get_le(std::istream& in, double& value) {
    unsigned char bytes[8];
    if (!in.read(reinterpret_cast<char*>(bytes), 8)) return false;
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
    value = std::bit_cast<double>(bits);
    return true;
}

}  // namespace

const Eigen::MatrixXd& ArrayFile::get(const std::string& name) const {
    for (const NamedArray& a : arrays) {
        if (a.name == name) return a.data;
    }
    throw DataError("array '" + name + "' missing from " + format + " file");
}

void save_array_file(const std::filesystem::path& path, const ArrayFile& file) {
    json header;
    header["format"] = file.format;
    header["version"] = kVersion;
    header["meta"] = file.meta;
    header["arrays"] = json::array();
    for (const NamedArray& a : file.arrays) {
        header["arrays"].push_back({{"name", a.name}, {"rows", a.data.rows()}, {"cols", a.data.cols()}});
    }
    write_atomically(
        path,
        [&](std::ostream& out) {
            out << header.dump() << '\n';
            for (const NamedArray& a : file.arrays) {
                for (Eigen::Index i = 0; i < a.data.size(); ++i) put_le(out, a.data.data()[i]);
            }
        },
        true);
}

ArrayFile load_array_file(const std::filesystem::path& path, const std::string& expected_format) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw DataError(path.string() + ": missing header");
    ArrayFile file;
    try {
        const json header = json::parse(line);
        file.format = header.at("format").get<std::string>();
        if (file.format != expected_format) {
            throw DataError(path.string() + ": expected format " + expected_format + ", found " + file.format);
        }
        if (header.at("version").get<int>() != kVersion) throw DataError(path.string() + ": unsupported version");
        file.meta = header.at("meta");
        for (const json& a : header.at("arrays")) {
            const auto rows = a.at("rows").get<Eigen::Index>();
            const auto cols = a.at("cols").get<Eigen::Index>();
            if (rows < 0 || cols < 0) throw DataError(path.string() + ": negative array extent");
            file.arrays.push_back({a.at("name").get<std::string>(), Eigen::MatrixXd(rows, cols)});
        }
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": malformed header: " + e.what());
    }
    for (NamedArray& a : file.arrays) {
        for (Eigen::Index i = 0; i < a.data.size(); ++i) {
            if (!get_le(in, a.data.data()[i])) throw DataError(path.string() + ": truncated array '" + a.name + "'");
        }
    }
    if (in.peek() != std::char_traits<char>::eof()) throw DataError(path.string() + ": trailing bytes");
    return file;
}

}  // namespace garment
