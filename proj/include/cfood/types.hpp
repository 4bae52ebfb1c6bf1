#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace cfood {

using ClassLabel = std::int32_t;
using RowIndex = std::int64_t;

// Storage is float32 (bit-exact with the on-disk format); arithmetic is double.
using StorageMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using StorageVector = Eigen::VectorXf;

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using LabelVector = Eigen::Matrix<ClassLabel, Eigen::Dynamic, 1>;

} // namespace cfood
