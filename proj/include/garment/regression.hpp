#pragma once

#include <filesystem>
#include <vector>

#include <Eigen/Core>

#include "garment/skinning.hpp"

namespace garment {

// Layout of one control vector (column of Theta), in order:
//   for each joint in `joints`: rotation vector of its pose rotation (3)
//   root velocity (3), root acceleration (3), in meters per frame (squared)
//   for j = 1..history: shape coefficients of frame t-j (k each), zero before frame 0
//   bias entry 1
struct ControlLayout {
    std::vector<int> joints;
    int history = 0;
    int k = 0;  // coefficient count; only used when history > 0

    int dimension() const { return 3 * static_cast<int>(joints.size()) + 6 + history * k + 1; }
};

// One column per frame. Derivatives use central differences, one-sided at
// the ends; with exactly two frames the acceleration is zero.
// `coefficients` (k x n) supplies the history entries and may be empty
// when layout.history == 0. Requires n >= history + 2.
Eigen::MatrixXd build_control_sequence(const std::vector<Pose>& poses, const ControlLayout& layout,
                                       const Eigen::MatrixXd& coefficients = Eigen::MatrixXd());

// lambda = F * z, where z is theta standardized with the stored statistics.
struct LinearShapeRegressor {
    ControlLayout layout;
    Eigen::MatrixXd F;             // k x dim
    Eigen::VectorXd theta_mean;    // dim
    Eigen::VectorXd theta_scale;   // dim, > 0
    int rank = 0;                  // numerical rank of the standardized training Theta
    Eigen::Index intercept_row = -1;  // first nonzero constant row of training Theta, if any
    double intercept_value = 1.0;     // its constant value

    Eigen::VectorXd standardize(const Eigen::VectorXd& theta) const;
    Eigen::VectorXd predict(const Eigen::VectorXd& theta) const;  // throws DataError on dimension mismatch
    Eigen::MatrixXd predict_all(const Eigen::MatrixXd& theta) const;
    // Equivalent matrix acting on raw theta.
    Eigen::MatrixXd raw_matrix() const;
};

// Least-squares F minimizing ||F Z - Lambda||_F through the SVD
// pseudoinverse (singular values below 1e-10 sigma_max dropped).
// Rows with zero variance are left as they are. If some row is a nonzero
// constant (an intercept), the other rows are centered and scaled to unit
// variance; otherwise they are only scaled, which keeps the fit identical
// to the raw least-squares fit.
// An all-zero Theta yields F = 0 and rank 0.
LinearShapeRegressor fit_linear(const Eigen::MatrixXd& theta, const Eigen::MatrixXd& lambda,
                                const ControlLayout& layout = {});

// Mean over frames and coefficient dimensions of the squared error.
double evaluate_mse(const LinearShapeRegressor& regressor, const Eigen::MatrixXd& theta,
                    const Eigen::MatrixXd& lambda);

// Frame-by-frame prediction for a pose sequence; history entries are fed
// back from earlier predictions.
Eigen::MatrixXd predict_sequence(const LinearShapeRegressor& regressor, const std::vector<Pose>& poses);

void save_regressor(const std::filesystem::path& path, const LinearShapeRegressor& regressor);
LinearShapeRegressor load_regressor(const std::filesystem::path& path);

}  // namespace garment
