#include "garment/subspace.hpp"

#include <string>

#include <Eigen/SVD>

#include "garment/array_file.hpp"
#include "garment/errors.hpp"

namespace garment {

namespace {

constexpr const char* kFormat = "garment-subspace";

void require_vertex_count(const SubspaceModel& model, std::size_t count, const char* what) {
    if (static_cast<int>(count) != model.vertex_count()) {
        throw DataError(std::string(what) + ": expected " + std::to_string(model.vertex_count()) +
                        " vertices, got " + std::to_string(count));
    }
}

void require_lambda(const SubspaceModel& model, const Eigen::VectorXd& lambda) {
    if (lambda.size() != model.k()) {
        throw DataError("shape coefficients: expected " + std::to_string(model.k()) + " entries, got " +
                        std::to_string(lambda.size()));
    }
    if (!lambda.allFinite()) throw DataError("shape coefficients are not finite");
}

Eigen::MatrixXd faces_matrix(const std::vector<Face>& faces) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(faces.size()), 3);
    for (std::size_t f = 0; f < faces.size(); ++f) {
        for (int c = 0; c < 3; ++c) m(static_cast<Eigen::Index>(f), c) = faces[f][c];
    }
    return m;
}

std::vector<Face> faces_from(const Eigen::MatrixXd& m) {
    if (m.rows() > 0 && m.cols() != 3) throw DataError("face array must have 3 columns");
    std::vector<Face> faces(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index f = 0; f < m.rows(); ++f) {
        for (int c = 0; c < 3; ++c) faces[static_cast<std::size_t>(f)][c] = static_cast<int>(m(f, c));
    }
    return faces;
}

}  // namespace

SubspaceModel fit_subspace(const std::vector<Mesh>& registrations, int k) {
    const int n = static_cast<int>(registrations.size());
    if (n < 2) throw DataError("subspace fit needs at least 2 registrations, got " + std::to_string(n));
    const Mesh& first = registrations.front();
    for (int i = 1; i < n; ++i) {
        if (!same_topology(first, registrations[i])) {
            throw DataError("registration " + std::to_string(i) + " does not share the template topology");
        }
    }
    const Eigen::Index dim = 3 * static_cast<Eigen::Index>(first.vertex_count());
    if (k < 1 || k > n || k > dim) {
        throw ConfigError("subspace rank k=" + std::to_string(k) + " outside [1, min(n=" + std::to_string(n) +
                          ", 3v=" + std::to_string(dim) + ")]");
    }

    Eigen::MatrixXd frames(dim, n);
    for (int i = 0; i < n; ++i) frames.col(i) = flatten(registrations[i].vertices);
    SubspaceModel model;
    model.mean = frames.rowwise().mean();
    const Eigen::MatrixXd offsets = frames.colwise() - model.mean;

    Eigen::BDCSVD<Eigen::MatrixXd> svd(offsets, Eigen::ComputeThinU);
    model.basis = svd.matrixU().leftCols(k);
    model.singular_values = svd.singularValues().head(k);
    for (int c = 0; c < k; ++c) {
        Eigen::Index arg = 0;
        model.basis.col(c).cwiseAbs().maxCoeff(&arg);
        if (model.basis(arg, c) < 0.0) model.basis.col(c) *= -1.0;
    }
    model.topology = first;
    model.topology.vertices = unflatten(model.mean);
    model.topology.vertex_normals.clear();
    return model;
}

Eigen::VectorXd project(const SubspaceModel& model, const std::vector<Vec3>& vertices) {
    require_vertex_count(model, vertices.size(), "project");
    return model.basis.transpose() * (flatten(vertices) - model.mean);
}

std::vector<Vec3> synthesize(const SubspaceModel& model, const Eigen::VectorXd& lambda) {
    require_lambda(model, lambda);
    return unflatten(model.mean + model.basis * lambda);
}

Mesh reconstruct(const SubspaceModel& model, const Eigen::VectorXd& lambda, const SkinWeights& weights,
                 const Skeleton& skeleton, const Pose& pose) {
    Mesh rest = model.topology;
    rest.vertices = synthesize(model, lambda);
    return skin(rest, weights, skeleton, pose);
}

SubspaceModel retarget_mean(const SubspaceModel& model, const Eigen::VectorXd& offsets) {
    if (offsets.size() != model.mean.size()) {
        throw DataError("retarget offsets: expected " + std::to_string(model.mean.size()) + " entries, got " +
                        std::to_string(offsets.size()));
    }
    SubspaceModel out = model;
    out.mean += offsets;
    out.topology.vertices = unflatten(out.mean);
    return out;
}

void save_subspace(const std::filesystem::path& path, const SubspaceModel& model) {
    ArrayFile file;
    file.format = kFormat;
    file.meta = {{"k", model.k()},
                 {"vertex_count", model.vertex_count()},
                 {"topology_hash", std::to_string(topology_hash(model.topology))}};
    Eigen::MatrixXd uvs(static_cast<Eigen::Index>(model.topology.uvs.size()), 2);
    for (std::size_t i = 0; i < model.topology.uvs.size(); ++i) uvs.row(static_cast<Eigen::Index>(i)) = model.topology.uvs[i];
    file.arrays = {{"mean", model.mean},
                   {"basis", model.basis},
                   {"singular_values", model.singular_values},
                   {"faces", faces_matrix(model.topology.faces)},
                   {"uvs", uvs},
                   {"uv_faces", faces_matrix(model.topology.uv_faces)}};
    save_array_file(path, file);
}

SubspaceModel load_subspace(const std::filesystem::path& path) {
    const ArrayFile file = load_array_file(path, kFormat);
    SubspaceModel model;
    const Eigen::MatrixXd& mean = file.get("mean");
    const Eigen::MatrixXd& sv = file.get("singular_values");
    if (mean.cols() != 1 || sv.cols() != 1) throw DataError(path.string() + ": mean and singular values must be vectors");
    model.mean = mean.col(0);
    model.basis = file.get("basis");
    model.singular_values = sv.col(0);
    if (model.mean.size() % 3 != 0 || model.basis.rows() != model.mean.size() ||
        model.singular_values.size() != model.basis.cols()) {
        throw DataError(path.string() + ": inconsistent subspace array shapes");
    }
    model.topology.vertices = unflatten(model.mean);
    model.topology.faces = faces_from(file.get("faces"));
    const Eigen::MatrixXd& uvs = file.get("uvs");
    for (Eigen::Index i = 0; i < uvs.rows(); ++i) model.topology.uvs.emplace_back(uvs(i, 0), uvs(i, 1));
    model.topology.uv_faces = faces_from(file.get("uv_faces"));
    validate(model.topology);
    const std::string expected = file.meta.value("topology_hash", std::string());
    if (expected != std::to_string(topology_hash(model.topology))) {
        throw DataError(path.string() + ": topology hash mismatch");
    }
    return model;
}

}  // namespace garment
