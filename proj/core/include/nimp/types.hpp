#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace nimp {

/// Row-major so that one row is one sample.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

/// Raw input features are stored in single precision to halve the memory
/// footprint of the image datasets; every computation widens to double.
using FeatureMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Labels = std::vector<int>;

}  // namespace nimp
