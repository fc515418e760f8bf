// SPDX-License-Identifier: Apache-2.0
#include "bfgrad/scalar_ops.hpp"

#include <cmath>
#include <stdexcept>

namespace bfgrad {
namespace {

constexpr double kLn10 = 2.302585092994045684;

// Broadcast-aware elementwise combine: shapes must match or one side must be
// a single element.
template <typename Fn>
ComplexTensor broadcast_zip(const ComplexTensor& a, const ComplexTensor& b, Fn fn,
                            const char* what) {
  if (a.same_shape(b)) {
    std::vector<cdouble> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = fn(a[i], b[i]);
    return ComplexTensor(a.shape(), std::move(out));
  }
  if (b.is_scalar()) {
    std::vector<cdouble> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = fn(a[i], b[0]);
    return ComplexTensor(a.shape(), std::move(out));
  }
  if (a.is_scalar()) {
    std::vector<cdouble> out(b.size());
    for (std::size_t i = 0; i < b.size(); ++i) out[i] = fn(a[0], b[i]);
    return ComplexTensor(b.shape(), std::move(out));
  }
  throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

// Reduce an elementwise cotangent back to the shape of input x that may have
// been broadcast from a single element.
ComplexTensor reduce_to_shape(const ComplexTensor& cot, const ComplexTensor& x) {
  if (cot.same_shape(x)) return cot;
  if (!x.is_scalar()) throw std::invalid_argument("broadcast reduce: shape mismatch");
  return ComplexTensor(x.shape(), {sum_all(cot)});
}

// Exact integer power by repeated squaring; avoids the exp(n log z) route.
cdouble ipow(cdouble z, std::int64_t n) {
  if (n < 0) {
    if (z == cdouble{0.0, 0.0}) throw std::domain_error("pow: z = 0 with negative exponent");
    return 1.0 / ipow(z, -n);
  }
  cdouble acc{1.0, 0.0};
  cdouble base = z;
  while (n > 0) {
    if (n & 1) acc *= base;
    base *= base;
    n >>= 1;
  }
  return acc;
}

}  // namespace

namespace scalar_ops {

ComplexTensor identity_bwd(const ComplexTensor& g) { return g; }

ComplexTensor conj_bwd(const ComplexTensor& g) { return bfgrad::conj(g); }

ComplexTensor neg_bwd(const ComplexTensor& g) { return bfgrad::neg(g); }

std::pair<ComplexTensor, ComplexTensor> add_bwd(const ComplexTensor& g,
                                                const ComplexTensor& z1,
                                                const ComplexTensor& z2) {
  return {reduce_to_shape(g, z1), reduce_to_shape(g, z2)};
}

std::pair<ComplexTensor, ComplexTensor> mul_bwd(const ComplexTensor& g,
                                                const ComplexTensor& z1,
                                                const ComplexTensor& z2) {
  ComplexTensor g1 = broadcast_zip(g, z2, [](cdouble gv, cdouble z) { return gv * std::conj(z); }, "mul_bwd");
  ComplexTensor g2 = broadcast_zip(g, z1, [](cdouble gv, cdouble z) { return gv * std::conj(z); }, "mul_bwd");
  return {reduce_to_shape(g1, z1), reduce_to_shape(g2, z2)};
}

ComplexTensor pow_bwd(const ComplexTensor& g, const ComplexTensor& z, std::int64_t n) {
  if (n == 0) throw std::invalid_argument("pow_bwd: exponent must be a nonzero integer");
  return broadcast_zip(g, z,
                       [n](cdouble gv, cdouble zv) {
                         if (zv == cdouble{0.0, 0.0} && n <= 0) {
                           throw std::domain_error("pow_bwd: z = 0 with non-positive exponent");
                         }
                         return gv * static_cast<double>(n) * ipow(std::conj(zv), n - 1);
                       },
                       "pow_bwd");
}

std::pair<ComplexTensor, ComplexTensor> div_bwd(const ComplexTensor& g,
                                                const ComplexTensor& z1,
                                                const ComplexTensor& z2) {
  ComplexTensor g1 = broadcast_zip(g, z2,
                                   [](cdouble gv, cdouble z) {
                                     if (z == cdouble{0.0, 0.0}) throw std::domain_error("div_bwd: divisor is zero");
                                     return gv / std::conj(z);
                                   },
                                   "div_bwd");
  // -g * z1^* / (z2^*)^2, evaluated with both operands broadcast against g.
  ComplexTensor gz1 = broadcast_zip(g, z1, [](cdouble gv, cdouble z) { return gv * std::conj(z); }, "div_bwd");
  ComplexTensor g2 = broadcast_zip(gz1, z2,
                                   [](cdouble v, cdouble z) {
                                     if (z == cdouble{0.0, 0.0}) throw std::domain_error("div_bwd: divisor is zero");
                                     cdouble zc = std::conj(z);
                                     return -v / (zc * zc);
                                   },
                                   "div_bwd");
  return {reduce_to_shape(g1, z1), reduce_to_shape(g2, z2)};
}

ComplexTensor abs_bwd(const ComplexTensor& g, const ComplexTensor& z) {
  return broadcast_zip(g, z,
                       [](cdouble gv, cdouble zv) {
                         double m = std::abs(zv);
                         if (m == 0.0) throw std::domain_error("abs_bwd: phase undefined at z = 0");
                         return gv * (zv / m);
                       },
                       "abs_bwd");
}

ComplexTensor phase_factor_bwd(const ComplexTensor& g, const ComplexTensor& z) {
  return broadcast_zip(g, z,
                       [](cdouble gv, cdouble zv) {
                         double m = std::abs(zv);
                         if (m == 0.0) throw std::domain_error("phase_factor_bwd: phase undefined at z = 0");
                         cdouble phase = zv / m;
                         return gv / m - (gv / zv).real() * phase;
                       },
                       "phase_factor_bwd");
}

ComplexTensor re_bwd(const ComplexTensor& g) { return g; }

ComplexTensor im_bwd(const ComplexTensor& g) { return scale(g, cdouble{0.0, 1.0}); }

ComplexTensor sigmoid_bwd(const ComplexTensor& g, const ComplexTensor& s) {
  return broadcast_zip(g, s, [](cdouble gv, cdouble sv) { return gv * sv * (1.0 - sv); },
                       "sigmoid_bwd");
}

std::pair<ComplexTensor, ComplexTensor> neg_log_ratio_db_bwd(const ComplexTensor& g,
                                                             const ComplexTensor& px,
                                                             const ComplexTensor& pn) {
  double x = px[0].real();
  double n = pn[0].real();
  double gv = g[0].real();
  ComplexTensor gx = ComplexTensor(px.shape(), {cdouble{gv * (-10.0 / kLn10) / x, 0.0}});
  ComplexTensor gn = ComplexTensor(pn.shape(), {cdouble{gv * (10.0 / kLn10) / n, 0.0}});
  return {gx, gn};
}

ComplexTensor abs_fwd(const ComplexTensor& z) {
  std::vector<cdouble> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = cdouble{std::abs(z[i]), 0.0};
  return ComplexTensor(z.shape(), std::move(out));
}

ComplexTensor phase_factor_fwd(const ComplexTensor& z) {
  std::vector<cdouble> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    double m = std::abs(z[i]);
    if (m == 0.0) throw std::domain_error("phase_factor: phase undefined at z = 0");
    out[i] = z[i] / m;
  }
  return ComplexTensor(z.shape(), std::move(out));
}

ComplexTensor pow_fwd(const ComplexTensor& z, std::int64_t n) {
  if (n == 0) throw std::invalid_argument("pow: exponent must be a nonzero integer");
  std::vector<cdouble> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = ipow(z[i], n);
  return ComplexTensor(z.shape(), std::move(out));
}

ComplexTensor div_fwd(const ComplexTensor& z1, const ComplexTensor& z2) {
  return broadcast_zip(z1, z2,
                       [](cdouble a, cdouble b) {
                         if (b == cdouble{0.0, 0.0}) throw std::domain_error("div: divisor is zero");
                         return a / b;
                       },
                       "div");
}

ComplexTensor mul_fwd(const ComplexTensor& z1, const ComplexTensor& z2) {
  return broadcast_zip(z1, z2, [](cdouble a, cdouble b) { return a * b; }, "mul");
}

ComplexTensor add_fwd(const ComplexTensor& z1, const ComplexTensor& z2) {
  return broadcast_zip(z1, z2, [](cdouble a, cdouble b) { return a + b; }, "add");
}

ComplexTensor sigmoid_fwd(const ComplexTensor& z) {
  std::vector<cdouble> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = cdouble{1.0 / (1.0 + std::exp(-z[i].real())), 0.0};
  }
  return ComplexTensor(z.shape(), std::move(out));
}

}  // namespace scalar_ops

namespace ops {

namespace {
bool both_real(const Tape& t, NodeId a, NodeId b) {
  return t.node(a).real_constrained && t.node(b).real_constrained;
}
}  // namespace

NodeId identity(Tape& t, NodeId z) {
  return t.record(OpKind::kIdentity, {z}, t.value(z), {}, 0, t.node(z).real_constrained);
}

NodeId conj(Tape& t, NodeId z) {
  return t.record(OpKind::kConj, {z}, bfgrad::conj(t.value(z)), {}, 0,
                  t.node(z).real_constrained);
}

NodeId neg(Tape& t, NodeId z) {
  return t.record(OpKind::kNeg, {z}, bfgrad::neg(t.value(z)), {}, 0,
                  t.node(z).real_constrained);
}

NodeId add(Tape& t, NodeId z1, NodeId z2) {
  return t.record(OpKind::kAdd, {z1, z2}, scalar_ops::add_fwd(t.value(z1), t.value(z2)), {}, 0,
                  both_real(t, z1, z2));
}

NodeId mul(Tape& t, NodeId z1, NodeId z2) {
  return t.record(OpKind::kMul, {z1, z2}, scalar_ops::mul_fwd(t.value(z1), t.value(z2)), {}, 0,
                  both_real(t, z1, z2));
}

NodeId pow(Tape& t, NodeId z, std::int64_t n) {
  return t.record(OpKind::kPow, {z}, scalar_ops::pow_fwd(t.value(z), n), {}, n,
                  t.node(z).real_constrained);
}

NodeId div(Tape& t, NodeId z1, NodeId z2) {
  return t.record(OpKind::kDiv, {z1, z2}, scalar_ops::div_fwd(t.value(z1), t.value(z2)), {}, 0,
                  both_real(t, z1, z2));
}

NodeId abs(Tape& t, NodeId z) {
  return t.record(OpKind::kAbs, {z}, scalar_ops::abs_fwd(t.value(z)), {}, 0, true);
}

NodeId phase_factor(Tape& t, NodeId z) {
  return t.record(OpKind::kPhaseFactor, {z}, scalar_ops::phase_factor_fwd(t.value(z)));
}

NodeId re(Tape& t, NodeId z) {
  return t.record(OpKind::kRe, {z}, real_part(t.value(z)), {}, 0, true);
}

NodeId im(Tape& t, NodeId z) {
  return t.record(OpKind::kIm, {z}, imag_part(t.value(z)), {}, 0, true);
}

NodeId sigmoid(Tape& t, NodeId z) {
  if (!t.node(z).real_constrained) {
    throw std::invalid_argument("sigmoid: input must be real-constrained");
  }
  return t.record(OpKind::kSigmoid, {z}, scalar_ops::sigmoid_fwd(t.value(z)), {}, 0, true);
}

NodeId neg_log_ratio_db(Tape& t, NodeId px, NodeId pn) {
  const ComplexTensor& x = t.value(px);
  const ComplexTensor& n = t.value(pn);
  if (!x.is_scalar() || !n.is_scalar()) {
    throw std::invalid_argument("neg_log_ratio_db: inputs must be scalars");
  }
  if (!t.node(px).real_constrained || !t.node(pn).real_constrained) {
    throw std::invalid_argument("neg_log_ratio_db: inputs must be real-constrained");
  }
  if (x[0].real() <= 0.0 || n[0].real() <= 0.0) {
    throw std::domain_error("neg_log_ratio_db: ratio requires positive powers");
  }
  double j = -10.0 * std::log10(x[0].real() / n[0].real());
  return t.record(OpKind::kNegLogRatioDb, {px, pn}, ComplexTensor(x.shape(), {cdouble{j, 0.0}}),
                  {}, 0, true);
}

}  // namespace ops
}  // namespace bfgrad
