// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace bfgrad {

using cdouble = std::complex<double>;

/// Dense N-dimensional array of complex double scalars, row-major.
/// Values are immutable by convention once they land on a tape.
class ComplexTensor {
 public:
  ComplexTensor() = default;

  ComplexTensor(std::vector<std::size_t> shape, std::vector<cdouble> data);

  // Zero-filled tensor of the given shape.
  static ComplexTensor zeros(std::vector<std::size_t> shape);

  // Rank-0 scalar.
  static ComplexTensor scalar(cdouble value);

  // Rank-1 vector from explicit entries.
  static ComplexTensor vector(std::vector<cdouble> entries);

  // D x D identity.
  static ComplexTensor identity(std::size_t dim);

  const std::vector<std::size_t>& shape() const { return shape_; }
  const std::vector<cdouble>& data() const { return data_; }
  std::vector<cdouble>& mutable_data() { return data_; }

  std::size_t size() const { return data_.size(); }
  std::size_t rank() const { return shape_.size(); }
  bool is_scalar() const { return data_.size() == 1; }

  std::size_t rows() const;
  std::size_t cols() const;

  cdouble operator[](std::size_t flat) const { return data_[flat]; }
  cdouble& operator[](std::size_t flat) { return data_[flat]; }
  cdouble at(std::size_t r, std::size_t c) const;

  bool same_shape(const ComplexTensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  double max_abs() const;
  bool is_real(double tol = 0.0) const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<cdouble> data_;
};

std::size_t shape_numel(const std::vector<std::size_t>& shape);

// Elementwise helpers used by the backward rules. All of them allocate.
ComplexTensor conj(const ComplexTensor& t);
ComplexTensor neg(const ComplexTensor& t);
ComplexTensor real_part(const ComplexTensor& t);
ComplexTensor imag_part(const ComplexTensor& t);
ComplexTensor add(const ComplexTensor& a, const ComplexTensor& b);
ComplexTensor sub(const ComplexTensor& a, const ComplexTensor& b);
ComplexTensor hadamard(const ComplexTensor& a, const ComplexTensor& b);
ComplexTensor scale(const ComplexTensor& t, cdouble factor);
cdouble sum_all(const ComplexTensor& t);

// max_i |a_i - b_i|; shapes must match.
double max_abs_diff(const ComplexTensor& a, const ComplexTensor& b);

}  // namespace bfgrad
