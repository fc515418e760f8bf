// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <stdexcept>

#include "bfgrad/tensor.hpp"

namespace bfgrad {

using EMatrix = Eigen::MatrixXcd;

// Rank-2 tensors map directly; rank-1 vectors become columns.
inline EMatrix to_matrix(const ComplexTensor& t) {
  std::size_t r, c;
  if (t.rank() == 2) {
    r = t.shape()[0];
    c = t.shape()[1];
  } else if (t.rank() == 1) {
    r = t.shape()[0];
    c = 1;
  } else {
    throw std::invalid_argument("to_matrix: expects rank 1 or 2");
  }
  EMatrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = t[i * c + j];
  return m;
}

inline ComplexTensor from_matrix(const EMatrix& m) {
  std::vector<cdouble> data(static_cast<std::size_t>(m.rows() * m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      data[static_cast<std::size_t>(i * m.cols() + j)] = m(i, j);
  return ComplexTensor({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())},
                       std::move(data));
}

// Same entries, reshaped to the given tensor's shape (vector vs column).
inline ComplexTensor from_matrix_like(const EMatrix& m, const ComplexTensor& like) {
  ComplexTensor out = from_matrix(m);
  if (like.rank() == 1) {
    return ComplexTensor(like.shape(), out.data());
  }
  return out;
}

}  // namespace bfgrad
