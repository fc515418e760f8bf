// SPDX-License-Identifier: Apache-2.0
#include "bfgrad/tensor.hpp"

#include <algorithm>
#include <cmath>

namespace bfgrad {

std::size_t shape_numel(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

ComplexTensor::ComplexTensor(std::vector<std::size_t> shape, std::vector<cdouble> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_numel(shape_) != data_.size()) {
    throw std::invalid_argument("ComplexTensor: data length does not match shape extents");
  }
  if (!all_finite()) {
    throw std::invalid_argument("ComplexTensor: non-finite entry on construction");
  }
}

ComplexTensor ComplexTensor::zeros(std::vector<std::size_t> shape) {
  std::size_t n = shape_numel(shape);
  return ComplexTensor(std::move(shape), std::vector<cdouble>(n, cdouble{0.0, 0.0}));
}

ComplexTensor ComplexTensor::scalar(cdouble value) {
  return ComplexTensor({}, {value});
}

ComplexTensor ComplexTensor::vector(std::vector<cdouble> entries) {
  std::size_t n = entries.size();
  return ComplexTensor({n}, std::move(entries));
}

ComplexTensor ComplexTensor::identity(std::size_t dim) {
  ComplexTensor out = zeros({dim, dim});
  for (std::size_t i = 0; i < dim; ++i) out[i * dim + i] = 1.0;
  return out;
}

std::size_t ComplexTensor::rows() const {
  if (shape_.size() != 2) throw std::invalid_argument("ComplexTensor: rows() requires rank 2");
  return shape_[0];
}

std::size_t ComplexTensor::cols() const {
  if (shape_.size() != 2) throw std::invalid_argument("ComplexTensor: cols() requires rank 2");
  return shape_[1];
}

cdouble ComplexTensor::at(std::size_t r, std::size_t c) const {
  return data_[r * cols() + c];
}

bool ComplexTensor::all_finite() const {
  for (const cdouble& v : data_) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return true;
}

double ComplexTensor::max_abs() const {
  double m = 0.0;
  for (const cdouble& v : data_) m = std::max(m, std::abs(v));
  return m;
}

bool ComplexTensor::is_real(double tol) const {
  for (const cdouble& v : data_) {
    if (std::abs(v.imag()) > tol) return false;
  }
  return true;
}

namespace {

void require_same_shape(const ComplexTensor& a, const ComplexTensor& b, const char* what) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch");
  }
}

template <typename Fn>
ComplexTensor map(const ComplexTensor& t, Fn fn) {
  std::vector<cdouble> out(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) out[i] = fn(t[i]);
  return ComplexTensor(t.shape(), std::move(out));
}

template <typename Fn>
ComplexTensor zip(const ComplexTensor& a, const ComplexTensor& b, Fn fn, const char* what) {
  require_same_shape(a, b, what);
  std::vector<cdouble> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = fn(a[i], b[i]);
  return ComplexTensor(a.shape(), std::move(out));
}

}  // namespace

ComplexTensor conj(const ComplexTensor& t) {
  return map(t, [](cdouble v) { return std::conj(v); });
}

ComplexTensor neg(const ComplexTensor& t) {
  return map(t, [](cdouble v) { return -v; });
}

ComplexTensor real_part(const ComplexTensor& t) {
  return map(t, [](cdouble v) { return cdouble{v.real(), 0.0}; });
}

ComplexTensor imag_part(const ComplexTensor& t) {
  return map(t, [](cdouble v) { return cdouble{v.imag(), 0.0}; });
}

ComplexTensor add(const ComplexTensor& a, const ComplexTensor& b) {
  return zip(a, b, [](cdouble x, cdouble y) { return x + y; }, "add");
}

ComplexTensor sub(const ComplexTensor& a, const ComplexTensor& b) {
  return zip(a, b, [](cdouble x, cdouble y) { return x - y; }, "sub");
}

ComplexTensor hadamard(const ComplexTensor& a, const ComplexTensor& b) {
  return zip(a, b, [](cdouble x, cdouble y) { return x * y; }, "hadamard");
}

ComplexTensor scale(const ComplexTensor& t, cdouble factor) {
  return map(t, [factor](cdouble v) { return v * factor; });
}

cdouble sum_all(const ComplexTensor& t) {
  cdouble acc{0.0, 0.0};
  for (const cdouble& v : t.data()) acc += v;
  return acc;
}

double max_abs_diff(const ComplexTensor& a, const ComplexTensor& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace bfgrad
