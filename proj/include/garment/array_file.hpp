#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <json.hpp>

namespace garment {

// Container for model files: one JSON header line, then each array as
// little-endian float64 in column-major order. The header carries caller
// metadata under "meta" and the array table under "arrays".
struct NamedArray {
    std::string name;
    Eigen::MatrixXd data;
};

struct ArrayFile {
    std::string format;  // e.g. "garment-subspace"
    nlohmann::json meta = nlohmann::json::object();
    std::vector<NamedArray> arrays;

    // Throws DataError when `name` is missing.
    const Eigen::MatrixXd& get(const std::string& name) const;
};

void save_array_file(const std::filesystem::path& path, const ArrayFile& file);

// Throws DataError on a malformed header, truncated payload, or when the
// format tag differs from `expected_format`.
ArrayFile load_array_file(const std::filesystem::path& path, const std::string& expected_format);

}  // namespace garment
