#include "garment/regression.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SVD>

#include "garment/array_file.hpp"
#include "garment/errors.hpp"

namespace garment {

namespace {

constexpr const char* kFormat = "garment-regressor";

// Rows: joint rotation vectors, root velocity, root acceleration.
Eigen::MatrixXd pose_features(const std::vector<Pose>& poses, const std::vector<int>& joints) {
    const int n = static_cast<int>(poses.size());
    const int nj = static_cast<int>(joints.size());
    Eigen::MatrixXd out(3 * nj + 6, n);
    for (int t = 0; t < n; ++t) {
        for (int j = 0; j < nj; ++j) {
            const int joint = joints[static_cast<std::size_t>(j)];
            if (joint < 0 || joint >= static_cast<int>(poses[static_cast<std::size_t>(t)].rotations.size())) {
                throw DataError("control layout joint " + std::to_string(joint) + " missing from pose " +
                                std::to_string(t));
            }
            out.block<3, 1>(3 * j, t) = rotation_vector(poses[static_cast<std::size_t>(t)].rotations[static_cast<std::size_t>(joint)]);
        }
    }
    auto root = [&](int t) -> const Vec3& { return poses[static_cast<std::size_t>(t)].root_translation; };
    const int vrow = 3 * nj;
    for (int t = 0; t < n; ++t) {
        Vec3 vel;
        if (t == 0) vel = root(1) - root(0);
        else if (t == n - 1) vel = root(n - 1) - root(n - 2);
        else vel = 0.5 * (root(t + 1) - root(t - 1));
        Vec3 acc = Vec3::Zero();
        if (n >= 3) {
            const int c = std::clamp(t, 1, n - 2);
            acc = root(c + 1) - 2.0 * root(c) + root(c - 1);
        }
        out.block<3, 1>(vrow, t) = vel;
        out.block<3, 1>(vrow + 3, t) = acc;
    }
    return out;
}

void check_layout(const ControlLayout& layout) {
    if (layout.history < 0) throw ConfigError("control history length must be >= 0");
    if (layout.history > 0 && layout.k < 1) throw ConfigError("control history needs a coefficient count k >= 1");
}

}  // namespace

Eigen::MatrixXd build_control_sequence(const std::vector<Pose>& poses, const ControlLayout& layout,
                                       const Eigen::MatrixXd& coefficients) {
    check_layout(layout);
    const int n = static_cast<int>(poses.size());
    if (n < layout.history + 2) {
        throw DataError("control sequence needs at least " + std::to_string(layout.history + 2) + " frames, got " +
                        std::to_string(n));
    }
    if (layout.history > 0 && (coefficients.rows() != layout.k || coefficients.cols() != n)) {
        throw DataError("history coefficients must be k x n");
    }
    const Eigen::MatrixXd features = pose_features(poses, layout.joints);
    Eigen::MatrixXd theta = Eigen::MatrixXd::Zero(layout.dimension(), n);
    theta.topRows(features.rows()) = features;
    for (int t = 0; t < n; ++t) {
        for (int j = 1; j <= layout.history; ++j) {
            if (t - j >= 0) theta.block(features.rows() + (j - 1) * layout.k, t, layout.k, 1) = coefficients.col(t - j);
        }
    }
    theta.row(layout.dimension() - 1).setOnes();
    return theta;
}

Eigen::VectorXd LinearShapeRegressor::standardize(const Eigen::VectorXd& theta) const {
    if (theta.size() != theta_mean.size()) {
        throw DataError("control vector has " + std::to_string(theta.size()) + " entries, regressor expects " +
                        std::to_string(theta_mean.size()));
    }
    return (theta - theta_mean).cwiseQuotient(theta_scale);
}

Eigen::VectorXd LinearShapeRegressor::predict(const Eigen::VectorXd& theta) const { return F * standardize(theta); }

Eigen::MatrixXd LinearShapeRegressor::predict_all(const Eigen::MatrixXd& theta) const {
    Eigen::MatrixXd out(F.rows(), theta.cols());
    for (Eigen::Index t = 0; t < theta.cols(); ++t) out.col(t) = predict(theta.col(t));
    return out;
}

Eigen::MatrixXd LinearShapeRegressor::raw_matrix() const {
    // F z = F D^-1 theta - F D^-1 mu; the constant folds into the intercept row.
    Eigen::MatrixXd raw = F * theta_scale.cwiseInverse().asDiagonal();
    const Eigen::VectorXd offset = raw * theta_mean;
    if (offset.isZero(0.0)) return raw;
    if (intercept_row < 0) throw NumericalError("regressor has a centering offset but no intercept row");
    // The intercept row holds a constant c, so subtracting offset / c absorbs the shift.
    raw.col(intercept_row) -= offset / intercept_value;
    return raw;
}

LinearShapeRegressor fit_linear(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& lambda,
                                const ControlLayout& layout) {
    if (theta.cols() < 1) throw DataError("regression needs at least one frame");
    if (theta.cols() != lambda.cols()) {
        throw DataError("Theta has " + std::to_string(theta.cols()) + " frames, Lambda has " +
                        std::to_string(lambda.cols()));
    }
    if (!theta.allFinite() || !lambda.allFinite()) throw DataError("regression inputs are not finite");
    const Eigen::Index dim = theta.rows();
    const double n = static_cast<double>(theta.cols());

    LinearShapeRegressor reg;
    reg.layout = layout;
    reg.theta_mean = Eigen::VectorXd::Zero(dim);
    reg.theta_scale = Eigen::VectorXd::Ones(dim);
    const Eigen::VectorXd mean = theta.rowwise().mean();
    std::vector<bool> constant(static_cast<std::size_t>(dim));
    for (Eigen::Index r = 0; r < dim; ++r) {
        constant[static_cast<std::size_t>(r)] = (theta.row(r).array() == theta(r, 0)).all();
        if (reg.intercept_row < 0 && constant[static_cast<std::size_t>(r)] && theta(r, 0) != 0.0) {
            reg.intercept_row = r;
            reg.intercept_value = theta(r, 0);
        }
    }
    for (Eigen::Index r = 0; r < dim; ++r) {
        if (constant[static_cast<std::size_t>(r)]) continue;
        const double mu = reg.intercept_row >= 0 ? mean(r) : 0.0;
        const double ss = (theta.row(r).array() - mu).square().sum() / n;
        reg.theta_mean(r) = mu;
        reg.theta_scale(r) = std::sqrt(ss);
    }
    const Eigen::MatrixXd z = (theta.colwise() - reg.theta_mean).array().colwise() / reg.theta_scale.array();

    Eigen::BDCSVD<Eigen::MatrixXd> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double cutoff = s.size() > 0 ? 1e-10 * s(0) : 0.0;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) {
        if (s(i) > cutoff && s(i) > 0.0) {
            inv(i) = 1.0 / s(i);
            reg.rank++;
        }
    }
    reg.F = (lambda * svd.matrixV()) * inv.asDiagonal() * svd.matrixU().transpose();
    return reg;
}

double evaluate_mse(const LinearShapeRegressor& regressor, const Eigen::MatrixXd& theta,
                    const Eigen::MatrixXd& lambda) {
    if (theta.cols() < 1 || theta.cols() != lambda.cols()) throw DataError("evaluation set is empty or inconsistent");
    const Eigen::MatrixXd pred = regressor.predict_all(theta);
    if (pred.rows() != lambda.rows()) throw DataError("coefficient count differs from the regressor's");
    return (pred - lambda).squaredNorm() / static_cast<double>(lambda.size());
}

Eigen::MatrixXd predict_sequence(const LinearShapeRegressor& regressor, const std::vector<Pose>& poses) {
    const ControlLayout& layout = regressor.layout;
    const int n = static_cast<int>(poses.size());
    if (layout.history == 0) return regressor.predict_all(build_control_sequence(poses, layout));
    Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(regressor.F.rows(), n);
    const Eigen::MatrixXd base = build_control_sequence(poses, layout, lambda);
    const Eigen::Index hist_row = 3 * static_cast<Eigen::Index>(layout.joints.size()) + 6;
    for (int t = 0; t < n; ++t) {
        Eigen::VectorXd theta = base.col(t);
        for (int j = 1; j <= layout.history && t - j >= 0; ++j) {
            theta.segment(hist_row + (j - 1) * layout.k, layout.k) = lambda.col(t - j);
        }
        lambda.col(t) = regressor.predict(theta);
    }
    return lambda;
}

void save_regressor(const std::filesystem::path& path, const LinearShapeRegressor& regressor) {
    ArrayFile file;
    file.format = kFormat;
    file.meta = {{"joints", regressor.layout.joints},
                 {"history", regressor.layout.history},
                 {"k", regressor.layout.k},
                 {"rank", regressor.rank},
                 {"intercept_row", regressor.intercept_row},
                 {"intercept_value", regressor.intercept_value}};
    file.arrays = {{"F", regressor.F}, {"theta_mean", regressor.theta_mean}, {"theta_scale", regressor.theta_scale}};
    save_array_file(path, file);
}

LinearShapeRegressor load_regressor(const std::filesystem::path& path) {
    const ArrayFile file = load_array_file(path, kFormat);
    LinearShapeRegressor reg;
    try {
        reg.layout.joints = file.meta.at("joints").get<std::vector<int>>();
        reg.layout.history = file.meta.at("history").get<int>();
        reg.layout.k = file.meta.at("k").get<int>();
        reg.rank = file.meta.at("rank").get<int>();
        reg.intercept_row = file.meta.at("intercept_row").get<Eigen::Index>();
        reg.intercept_value = file.meta.at("intercept_value").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": malformed regressor metadata: " + e.what());
    }
    reg.F = file.get("F");
    const Eigen::MatrixXd& mean = file.get("theta_mean");
    const Eigen::MatrixXd& scale = file.get("theta_scale");
    if (mean.cols() != 1 || scale.cols() != 1 || mean.rows() != reg.F.cols() || scale.rows() != reg.F.cols()) {
        throw DataError(path.string() + ": inconsistent regressor array shapes");
    }
    reg.theta_mean = mean.col(0);
    reg.theta_scale = scale.col(0);
    if ((reg.theta_scale.array() <= 0.0).any()) throw DataError(path.string() + ": non-positive Theta scale");
    return reg;
}

}  // namespace garment
