// SPDX-License-Identifier: Apache-2.0
#include "bfgrad/fourier_ops.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace bfgrad {
namespace fourier_ops {
namespace {

cdouble twiddle(double sign, std::size_t n, std::size_t f, std::size_t len) {
  double angle = sign * 2.0 * std::numbers::pi * static_cast<double>(n) *
                 static_cast<double>(f) / static_cast<double>(len);
  return {std::cos(angle), std::sin(angle)};
}

void require_vector(const ComplexTensor& z, const char* what) {
  if (z.rank() != 1 || z.size() == 0) {
    throw std::invalid_argument(std::string(what) + ": expects a nonempty rank-1 vector");
  }
}

std::size_t half_spectrum_len(const ComplexTensor& z, const char* what) {
  require_vector(z, what);
  std::size_t n = 2 * (z.size() - 1);
  if (n == 0) throw std::invalid_argument(std::string(what) + ": half spectrum needs >= 2 bins");
  return n;
}

}  // namespace

ComplexTensor dft_fwd(const ComplexTensor& z) {
  require_vector(z, "dft");
  std::size_t n = z.size();
  std::vector<cdouble> out(n);
  for (std::size_t f = 0; f < n; ++f) {
    cdouble acc{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) acc += z[i] * twiddle(-1.0, i, f, n);
    out[f] = acc;
  }
  return ComplexTensor(z.shape(), std::move(out));
}

ComplexTensor idft_fwd(const ComplexTensor& z) {
  require_vector(z, "idft");
  std::size_t n = z.size();
  std::vector<cdouble> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    cdouble acc{0.0, 0.0};
    for (std::size_t f = 0; f < n; ++f) acc += z[f] * twiddle(1.0, i, f, n);
    out[i] = acc / static_cast<double>(n);
  }
  return ComplexTensor(z.shape(), std::move(out));
}

ComplexTensor rdft_fwd(const ComplexTensor& z) {
  require_vector(z, "rdft");
  std::size_t n = z.size();
  if (n % 2 != 0) throw std::invalid_argument("rdft: length must be even");
  std::vector<cdouble> out(n / 2 + 1);
  for (std::size_t f = 0; f <= n / 2; ++f) {
    cdouble acc{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) acc += z[i] * twiddle(-1.0, i, f, n);
    out[f] = acc;
  }
  return ComplexTensor({n / 2 + 1}, std::move(out));
}

ComplexTensor irdft_fwd(const ComplexTensor& z) {
  std::size_t n = half_spectrum_len(z, "irdft");
  if (n % 2 != 0) throw std::invalid_argument("irdft: implied length must be even");
  std::vector<cdouble> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    cdouble acc{0.0, 0.0};
    for (std::size_t f = 0; f <= n / 2; ++f) acc += z[f] * twiddle(1.0, i, f, n);
    for (std::size_t f = 1; f < n / 2; ++f) acc += std::conj(z[f]) * twiddle(-1.0, i, f, n);
    // Real by construction for hermitian-consistent half spectra; the real
    // part keeps the contract exact for arbitrary DC/Nyquist bins.
    out[i] = cdouble{acc.real() / static_cast<double>(n), 0.0};
  }
  return ComplexTensor({n}, std::move(out));
}

ComplexTensor dft_bwd(const ComplexTensor& g) {
  return scale(idft_fwd(g), static_cast<double>(g.size()));
}

ComplexTensor idft_bwd(const ComplexTensor& g) {
  return scale(dft_fwd(g), 1.0 / static_cast<double>(g.size()));
}

ComplexTensor rdft_bwd(const ComplexTensor& g) {
  std::size_t n = half_spectrum_len(g, "rdft_bwd");
  std::vector<cdouble> filtered(g.size());
  for (std::size_t f = 0; f < g.size(); ++f) {
    if (f == 0 || f == n / 2) {
      filtered[f] = cdouble{g[f].real(), 0.0};
    } else {
      filtered[f] = 0.5 * g[f];
    }
  }
  ComplexTensor grad = irdft_fwd(ComplexTensor(g.shape(), std::move(filtered)));
  return scale(grad, static_cast<double>(n));
}

ComplexTensor irdft_bwd(const ComplexTensor& g) {
  require_vector(g, "irdft_bwd");
  std::size_t n = g.size();
  if (n % 2 != 0) throw std::invalid_argument("irdft_bwd: length must be even");
  ComplexTensor half = rdft_fwd(real_part(g));
  std::vector<cdouble> out(half.size());
  for (std::size_t f = 0; f < half.size(); ++f) {
    double factor = (f == 0 || f == n / 2) ? 1.0 : 2.0;
    out[f] = half[f] * (factor / static_cast<double>(n));
  }
  return ComplexTensor(half.shape(), std::move(out));
}

}  // namespace fourier_ops

namespace ops {

NodeId dft(Tape& t, NodeId z) {
  return t.record(OpKind::kDft, {z}, fourier_ops::dft_fwd(t.value(z)));
}

NodeId idft(Tape& t, NodeId z) {
  return t.record(OpKind::kIdft, {z}, fourier_ops::idft_fwd(t.value(z)));
}

NodeId rdft(Tape& t, NodeId z) {
  if (!t.node(z).real_constrained) {
    throw std::invalid_argument("rdft: input must be real-constrained");
  }
  return t.record(OpKind::kRdft, {z}, fourier_ops::rdft_fwd(t.value(z)));
}

NodeId irdft(Tape& t, NodeId z) {
  return t.record(OpKind::kIrdft, {z}, fourier_ops::irdft_fwd(t.value(z)), {}, 0, true);
}

}  // namespace ops
}  // namespace bfgrad
