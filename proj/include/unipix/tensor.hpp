// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

namespace unipix {

// Row-major so that a (tokens x channels) matrix is laid out token by token.
template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;
template <typename T>
using MatMap = Eigen::Map<Mat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const Mat<T>>;

using Tensor = Mat<float>;

inline bool same_shape(const Tensor& a, const Tensor& b) {
    return a.rows() == b.rows() && a.cols() == b.cols();
}

}  // namespace unipix
