// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

#include "bfgrad/tensor.hpp"

namespace bfgrad {

/// Seeded generator for reproducible complex test data and scenes.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  double gaussian(double mean = 0.0, double stddev = 1.0) {
    return std::normal_distribution<double>(mean, stddev)(engine_);
  }

  // Circularly-symmetric complex gaussian, unit variance.
  cdouble cgaussian() {
    constexpr double kScale = 0.7071067811865476;  // 1/sqrt(2)
    return {gaussian() * kScale, gaussian() * kScale};
  }

  // Complex entry with modulus drawn from [lo, hi] and uniform phase.
  cdouble annulus(double lo, double hi) {
    double r = uniform(lo, hi);
    double phi = uniform(0.0, 6.283185307179586);
    return {r * std::cos(phi), r * std::sin(phi)};
  }

  ComplexTensor tensor(std::vector<std::size_t> shape, double lo = 0.1, double hi = 10.0) {
    std::size_t n = shape_numel(shape);
    std::vector<cdouble> data(n);
    for (auto& v : data) v = annulus(lo, hi);
    return ComplexTensor(std::move(shape), std::move(data));
  }

  ComplexTensor gaussian_tensor(std::vector<std::size_t> shape) {
    std::size_t n = shape_numel(shape);
    std::vector<cdouble> data(n);
    for (auto& v : data) v = cgaussian();
    return ComplexTensor(std::move(shape), std::move(data));
  }

  ComplexTensor real_tensor(std::vector<std::size_t> shape, double lo, double hi) {
    std::size_t n = shape_numel(shape);
    std::vector<cdouble> data(n);
    for (auto& v : data) v = cdouble{uniform(lo, hi), 0.0};
    return ComplexTensor(std::move(shape), std::move(data));
  }

  // Unit-norm complex vector, D x 1.
  ComplexTensor unit_vector(std::size_t dim) {
    std::vector<cdouble> data(dim);
    double n2 = 0.0;
    for (auto& v : data) {
      v = cgaussian();
      n2 += std::norm(v);
    }
    double inv = 1.0 / std::sqrt(n2);
    for (auto& v : data) v *= inv;
    return ComplexTensor({dim, 1}, std::move(data));
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace bfgrad
