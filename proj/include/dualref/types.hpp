#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <vector>

namespace dualref {

/// Dense row-major matrix; row i is the embedding of sample i.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Feature matrices are plain matrices; normalization is tracked by the caller.
using FeatureMatrix = Matrix;

using Labels = std::vector<int>;

/// Label value for samples that belong to no cluster.
inline constexpr int kOutlier = -1;

/// Copy of `m` with every row scaled to unit L2 norm. Zero rows are left untouched.
Matrix l2_normalized_rows(const Matrix& m);

/// True when every row of `m` has unit L2 norm within `tol`.
bool rows_unit_norm(const Matrix& m, double tol = 1e-6);

}  // namespace dualref
