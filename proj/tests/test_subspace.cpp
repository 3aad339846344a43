#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "garment/errors.hpp"
#include "garment/subspace.hpp"
#include "subspace_fixtures.hpp"
#include "test_util.hpp"

using namespace garment;
using namespace garment::testing;

namespace {

Eigen::MatrixXd frame_matrix(const std::vector<Mesh>& frames) {
    Eigen::MatrixXd m(3 * frames.front().vertex_count(), static_cast<Eigen::Index>(frames.size()));
    for (std::size_t i = 0; i < frames.size(); ++i) m.col(static_cast<Eigen::Index>(i)) = flatten(frames[i].vertices);
    return m;
}

double max_vertex_error(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    double e = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, (a[i] - b[i]).norm());
    return e;
}

}  // namespace

TEST_CASE("fit: identical frames give the frame as mean and zero singular values") {
    std::mt19937_64 rng(1);
    const Mesh frame = random_frames(4, 3, 1, rng).front();
    const SubspaceModel m = fit_subspace({frame, frame, frame, frame}, 3);
    CHECK(max_vertex_error(unflatten(m.mean), frame.vertices) < 1e-15);
    CHECK(m.singular_values.cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("fit: rank-one offsets are captured by the first component") {
    std::mt19937_64 rng(2);
    const Mesh base = random_frames(4, 3, 1, rng).front();
    Eigen::VectorXd dir = Eigen::VectorXd::Random(3 * base.vertex_count()).normalized();
    std::vector<Mesh> frames;
    for (double c : {-0.03, -0.01, 0.01, 0.03}) {
        Mesh m = base;
        m.vertices = unflatten(flatten(base.vertices) + c * dir);
        frames.push_back(m);
    }
    const SubspaceModel m = fit_subspace(frames, 2);
    CHECK(std::abs(std::abs(m.basis.col(0).dot(dir)) - 1.0) < 1e-12);
    CHECK(m.singular_values(1) < 1e-12 * m.singular_values(0));
    Eigen::Index arg = 0;
    m.basis.col(0).cwiseAbs().maxCoeff(&arg);
    CHECK(m.basis(arg, 0) > 0.0);
}

TEST_CASE("fit agrees with a dense eigendecomposition of O O^T") {
    std::mt19937_64 rng(3);
    const std::vector<Mesh> frames = random_frames(9, 4, 20, rng);  // v = 50
    REQUIRE(frames.front().vertex_count() == 50);
    const SubspaceModel m = fit_subspace(frames, 20);

    const Eigen::MatrixXd X = frame_matrix(frames);
    const Eigen::VectorXd mean = X.rowwise().mean();
    const Eigen::MatrixXd O = X.colwise() - mean;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(O * O.transpose());
    const Eigen::Index d = O.rows();
    // Offsets have rank n-1; compare the nonzero spectrum and its eigenvectors.
    for (int l = 0; l < 19; ++l) {
        const double lambda = eig.eigenvalues()(d - 1 - l);
        CHECK(std::abs(m.singular_values(l) - std::sqrt(lambda)) < 1e-10 * m.singular_values(0));
        CHECK(std::abs(std::abs(m.basis.col(l).dot(eig.eigenvectors().col(d - 1 - l))) - 1.0) < 1e-8);
    }
    for (const Mesh& f : frames) {
        const std::vector<Vec3> rec = synthesize(m, project(m, f.vertices));
        const double rel = (flatten(rec) - flatten(f.vertices)).norm() / flatten(f.vertices).norm();
        CHECK(rel <= 1e-6);
    }
}

TEST_CASE("basis is orthonormal and singular values non-increasing") {
    std::mt19937_64 rng(4);
    const SubspaceModel m = fit_subspace(random_frames(9, 4, 30, rng), 25);
    const Eigen::MatrixXd gram = m.basis.transpose() * m.basis - Eigen::MatrixXd::Identity(25, 25);
    CHECK(gram.cwiseAbs().maxCoeff() < 1e-8);
    for (int l = 1; l < m.k(); ++l) CHECK(m.singular_values(l) <= m.singular_values(l - 1));
}

TEST_CASE("project: mean maps to zero and mean + 3 V1 to (3, 0, ...)") {
    std::mt19937_64 rng(5);
    const SubspaceModel m = fit_subspace(random_frames(5, 4, 8, rng), 5);
    CHECK(project(m, unflatten(m.mean)).cwiseAbs().maxCoeff() < 1e-15);
    const Eigen::VectorXd lambda = project(m, unflatten(m.mean + 3.0 * m.basis.col(0)));
    CHECK(std::abs(lambda(0) - 3.0) < 1e-12);
    CHECK(lambda.tail(4).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("truncated reconstruction error equals the tail energy of a dense SVD") {
    std::mt19937_64 rng(6);
    const std::vector<Mesh> frames = random_frames(6, 5, 12, rng);
    const Eigen::MatrixXd X = frame_matrix(frames);
    const Eigen::MatrixXd O = X.colwise() - X.rowwise().mean();
    Eigen::JacobiSVD<Eigen::MatrixXd> dense(O, Eigen::ComputeThinU);
    for (int k : {1, 4, 8}) {
        const SubspaceModel m = fit_subspace(frames, k);
        for (int i = 0; i < 12; ++i) {
            const Eigen::VectorXd full = dense.matrixU().transpose() * O.col(i);
            const double tail = full.tail(full.size() - k).norm();
            const double err = (flatten(synthesize(m, project(m, frames[static_cast<std::size_t>(i)].vertices))) - X.col(i)).norm();
            CHECK(std::abs(err - tail) < 1e-10);
        }
    }
}

TEST_CASE("reconstruction error is non-increasing in k") {
    std::mt19937_64 rng(7);
    const std::vector<Mesh> frames = random_frames(6, 5, 15, rng);
    double previous = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 15; ++k) {
        const SubspaceModel m = fit_subspace(frames, k);
        double total = 0.0;
        for (const Mesh& f : frames) total += (flatten(synthesize(m, project(m, f.vertices))) - flatten(f.vertices)).squaredNorm();
        CHECK(total <= previous + 1e-18);
        previous = total;
    }
}

TEST_CASE("frame order does not change the subspace") {
    std::mt19937_64 rng(8);
    std::vector<Mesh> frames = random_frames(5, 4, 10, rng);
    const SubspaceModel a = fit_subspace(frames, 6);
    std::shuffle(frames.begin(), frames.end(), rng);
    const SubspaceModel b = fit_subspace(frames, 6);
    const Eigen::MatrixXd pa = a.basis * a.basis.transpose();
    const Eigen::MatrixXd pb = b.basis * b.basis.transpose();
    CHECK((pa - pb).cwiseAbs().maxCoeff() < 1e-9);
    CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("coefficients round trip through synthesis") {
    std::mt19937_64 rng(9);
    const SubspaceModel m = fit_subspace(random_frames(5, 4, 10, rng), 7);
    std::normal_distribution<double> g(0.0, 0.05);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::VectorXd lambda(7);
        for (int i = 0; i < 7; ++i) lambda(i) = g(rng);
        CHECK((project(m, synthesize(m, lambda)) - lambda).cwiseAbs().maxCoeff() < 1e-9);
    }
}

TEST_CASE("reconstruct: zero coefficients in the identity pose give the mean") {
    std::mt19937_64 rng(10);
    const SubspaceModel m = fit_subspace(random_frames(4, 4, 6, rng), 3);
    const Mesh r = reconstruct(m, Eigen::VectorXd::Zero(3), rigid_weights(m.vertex_count()), single_joint_skeleton(),
                               Pose::identity(1));
    CHECK(max_vertex_error(r.vertices, unflatten(m.mean)) < 1e-15);
    CHECK(same_topology(r, m.topology));
}

TEST_CASE("reconstruct: projected training frame in its pose matches the posed registration") {
    std::mt19937_64 rng(11);
    const std::vector<Mesh> frames = random_frames(6, 5, 10, rng);
    const SubspaceModel m = fit_subspace(frames, 10);
    const Skeleton skel = single_joint_skeleton();
    const SkinWeights w = rigid_weights(m.vertex_count());
    for (int i = 0; i < 10; ++i) {
        Pose p = Pose::identity(1);
        p.rotations[0] = Quat(random_rotation(rng));
        p.root_translation = random_vec(rng, -0.5, 0.5);
        const Mesh posed = skin(frames[static_cast<std::size_t>(i)], w, skel, p);
        const Mesh rec = reconstruct(m, project(m, frames[static_cast<std::size_t>(i)].vertices), w, skel, p);
        CHECK(max_vertex_error(rec.vertices, posed.vertices) <= 1e-5);
    }
}

TEST_CASE("retarget_mean shifts every reconstruction by the offsets") {
    std::mt19937_64 rng(12);
    const SubspaceModel m = fit_subspace(random_frames(6, 5, 10, rng), 6);
    const Skeleton skel = single_joint_skeleton();
    const SkinWeights w = rigid_weights(m.vertex_count());
    const Pose id = Pose::identity(1);

    const SubspaceModel same = retarget_mean(m, Eigen::VectorXd::Zero(m.mean.size()));
    CHECK(same.mean == m.mean);
    CHECK(same.basis == m.basis);

    Eigen::VectorXd uniform(m.mean.size());
    for (Eigen::Index i = 0; i < uniform.size(); i += 3) uniform.segment<3>(i) = Vec3(0.01, -0.02, 0.005);
    const Eigen::VectorXd lambda = Eigen::VectorXd::Random(6) * 0.02;
    const Mesh before = reconstruct(m, lambda, w, skel, id);
    const Mesh shifted = reconstruct(retarget_mean(m, uniform), lambda, w, skel, id);
    for (int v = 0; v < m.vertex_count(); ++v) {
        CHECK((shifted.vertices[static_cast<std::size_t>(v)] - before.vertices[static_cast<std::size_t>(v)] -
               Vec3(0.01, -0.02, 0.005)).norm() < 1e-12);
    }

    for (int trial = 0; trial < 10; ++trial) {
        const Eigen::VectorXd offsets = Eigen::VectorXd::Random(m.mean.size()) * 0.03;
        const Eigen::VectorXd l = Eigen::VectorXd::Random(6) * 0.05;
        const SubspaceModel r = retarget_mean(m, offsets);
        CHECK(r.basis == m.basis);
        CHECK(r.singular_values == m.singular_values);
        const Eigen::VectorXd diff = flatten(reconstruct(r, l, w, skel, id).vertices) - flatten(reconstruct(m, l, w, skel, id).vertices);
        CHECK((diff - offsets).cwiseAbs().maxCoeff() <= 1e-12);
    }
    CHECK_THROWS_AS(retarget_mean(m, Eigen::VectorXd::Zero(5)), DataError);
}

TEST_CASE("model file round trip is exact") {
    std::mt19937_64 rng(13);
    const SubspaceModel m = fit_subspace(random_frames(5, 4, 8, rng), 4);
    const auto path = std::filesystem::temp_directory_path() / "garment_test_subspace.bin";
    save_subspace(path, m);
    const SubspaceModel back = load_subspace(path);
    CHECK(back.mean == m.mean);
    CHECK(back.basis == m.basis);
    CHECK(back.singular_values == m.singular_values);
    CHECK(same_topology(back.topology, m.topology));

    // Corrupting one face index breaks the stored topology hash.
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        std::string header;
        std::getline(f, header);
        const std::streamoff faces_at = static_cast<std::streamoff>(header.size() + 1) +
                                        8 * (m.mean.size() + m.basis.size() + m.singular_values.size());
        f.seekp(faces_at);
        const double bogus = 1.0;
        f.write(reinterpret_cast<const char*>(&bogus), 8);
    }
    CHECK_THROWS_AS(load_subspace(path), DataError);
    std::filesystem::remove(path);
}

TEST_CASE("fit: invalid inputs") {
    std::mt19937_64 rng(14);
    std::vector<Mesh> frames = random_frames(3, 3, 4, rng);
    CHECK_THROWS_AS(fit_subspace({frames[0]}, 1), DataError);
    CHECK_THROWS_AS(fit_subspace(frames, 0), ConfigError);
    CHECK_THROWS_AS(fit_subspace(frames, 5), ConfigError);
    frames[2].faces[0] = {0, 2, 1};
    CHECK_THROWS_AS(fit_subspace(frames, 2), DataError);
    const SubspaceModel m = fit_subspace(random_frames(3, 3, 4, rng), 2);
    CHECK_THROWS_AS(project(m, std::vector<Vec3>(3)), DataError);
    CHECK_THROWS_AS(synthesize(m, Eigen::VectorXd::Zero(3)), DataError);
}
