// SPDX-License-Identifier: Apache-2.0
#include "bfgrad/linalg_ops.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "bfgrad/scalar_ops.hpp"
#include "eigen_bridge.hpp"

namespace bfgrad {
namespace linalg_ops {
namespace {

void require_square(const ComplexTensor& a, const char* what) {
  if (a.rank() != 2 || a.shape()[0] != a.shape()[1] || a.shape()[0] == 0) {
    throw std::invalid_argument(std::string(what) + ": expects a nonempty square matrix");
  }
}

EMatrix guarded_inverse(const ComplexTensor& a, const char* what) {
  require_square(a, what);
  EMatrix m = to_matrix(a);
  Eigen::FullPivLU<EMatrix> lu(m);
  if (!lu.isInvertible()) {
    throw std::domain_error(std::string(what) + ": matrix is singular");
  }
  EMatrix inv = lu.inverse();
  double cond = m.norm() * inv.norm();
  if (!(cond < 1e12)) {
    std::ostringstream msg;
    msg << what << ": condition estimate " << cond << " exceeds 1e12";
    throw std::domain_error(msg.str());
  }
  return inv;
}

// Lower-triangular ones with one-half on the diagonal.
EMatrix cholesky_mask(Eigen::Index d) {
  EMatrix m = EMatrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) m(i, j) = 1.0;
    m(i, i) = 0.5;
  }
  return m;
}

double eig_gap_tolerance(const ComplexTensor& values) {
  return 1e-8 * values.max_abs();
}

}  // namespace

double condition_estimate(const ComplexTensor& a) {
  require_square(a, "condition_estimate");
  EMatrix m = to_matrix(a);
  Eigen::FullPivLU<EMatrix> lu(m);
  if (!lu.isInvertible()) return std::numeric_limits<double>::infinity();
  return m.norm() * lu.inverse().norm();
}

EigGapMatrix eig_gaps(const ComplexTensor& values, double gap_tol) {
  std::size_t d = values.size();
  ComplexTensor e = ComplexTensor::zeros({d, d});
  ComplexTensor f = ComplexTensor::zeros({d, d});
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (i == j) continue;
      cdouble diff = values[j] - values[i];
      e[i * d + j] = diff;
      if (std::abs(diff) <= gap_tol) {
        std::ostringstream msg;
        msg << "eigendecomposition: degenerate spectrum, |lambda_" << j << " - lambda_" << i
            << "| = " << std::abs(diff) << " <= gap tolerance " << gap_tol;
        throw std::domain_error(msg.str());
      }
      f[i * d + j] = 1.0 / diff;
    }
  }
  return {std::move(e), std::move(f)};
}

ComplexTensor normalize_vec_fwd(const ComplexTensor& z) {
  double n2 = 0.0;
  for (const cdouble& v : z.data()) n2 += std::norm(v);
  if (n2 == 0.0) throw std::domain_error("normalize_vec: zero vector");
  return scale(z, 1.0 / std::sqrt(n2));
}

ComplexTensor normalize_vec_bwd(const ComplexTensor& g, const ComplexTensor& z) {
  if (!g.same_shape(z)) throw std::invalid_argument("normalize_vec_bwd: shape mismatch");
  double n2 = 0.0;
  cdouble zg{0.0, 0.0};
  for (std::size_t i = 0; i < z.size(); ++i) {
    n2 += std::norm(z[i]);
    zg += std::conj(z[i]) * g[i];
  }
  if (n2 == 0.0) throw std::domain_error("normalize_vec_bwd: zero vector");
  double radial = zg.real() / n2;
  std::vector<cdouble> out(z.size());
  double inv_norm = 1.0 / std::sqrt(n2);
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = (g[i] - z[i] * radial) * inv_norm;
  return ComplexTensor(z.shape(), std::move(out));
}

ComplexTensor matmul_fwd(const ComplexTensor& a, const ComplexTensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw std::invalid_argument("matmul: inner dimensions disagree");
  }
  return from_matrix(to_matrix(a) * to_matrix(b));
}

std::pair<ComplexTensor, ComplexTensor> matmul_bwd(const ComplexTensor& g,
                                                   const ComplexTensor& a,
                                                   const ComplexTensor& b) {
  EMatrix gm = to_matrix(g);
  ComplexTensor ga = from_matrix(gm * to_matrix(b).adjoint());
  ComplexTensor gb = from_matrix(to_matrix(a).adjoint() * gm);
  return {std::move(ga), std::move(gb)};
}

ComplexTensor inv_fwd(const ComplexTensor& a) { return from_matrix(guarded_inverse(a, "inv")); }

ComplexTensor inv_bwd(const ComplexTensor& g, const ComplexTensor& c) {
  EMatrix ch = to_matrix(c).adjoint();
  return from_matrix(-ch * to_matrix(g) * ch);
}

ComplexTensor solve_left_fwd(const ComplexTensor& a, const ComplexTensor& b) {
  require_square(a, "solve_left");
  if (b.rank() != 2 || b.rows() != a.rows()) {
    throw std::invalid_argument("solve_left: dimension mismatch");
  }
  EMatrix inv = guarded_inverse(a, "solve_left");
  return from_matrix(inv * to_matrix(b));
}

std::pair<ComplexTensor, ComplexTensor> solve_left_bwd(const ComplexTensor& g,
                                                       const ComplexTensor& a,
                                                       const ComplexTensor& c) {
  EMatrix ah = to_matrix(a).adjoint();
  EMatrix gb = ah.partialPivLu().solve(to_matrix(g));
  EMatrix ga = -gb * to_matrix(c).adjoint();
  return {from_matrix(ga), from_matrix(gb)};
}

ComplexTensor solve_right_fwd(const ComplexTensor& a, const ComplexTensor& b) {
  require_square(b, "solve_right");
  if (a.rank() != 2 || a.cols() != b.rows()) {
    throw std::invalid_argument("solve_right: dimension mismatch");
  }
  EMatrix inv = guarded_inverse(b, "solve_right");
  return from_matrix(to_matrix(a) * inv);
}

std::pair<ComplexTensor, ComplexTensor> solve_right_bwd(const ComplexTensor& g,
                                                        const ComplexTensor& b,
                                                        const ComplexTensor& c) {
  // grad_A = g B^-H = (B^-1 g^H)^H
  EMatrix bm = to_matrix(b);
  EMatrix ga = bm.partialPivLu().solve(to_matrix(g).adjoint()).adjoint();
  EMatrix gb = -to_matrix(c).adjoint() * ga;
  return {from_matrix(ga), from_matrix(gb)};
}

ComplexTensor cholesky_fwd(const ComplexTensor& a) {
  require_square(a, "cholesky");
  EMatrix m = to_matrix(a);
  double dev = (m - m.adjoint()).norm();
  if (dev > 1e-10 * std::max(m.norm(), 1e-300)) {
    throw std::domain_error("cholesky: input is not hermitian");
  }
  Eigen::LLT<EMatrix> llt(m);
  if (llt.info() != Eigen::Success) {
    throw std::domain_error("cholesky: input is not positive definite");
  }
  return from_matrix(EMatrix(llt.matrixL()));
}

ComplexTensor cholesky_bwd(const ComplexTensor& g, const ComplexTensor& l) {
  EMatrix lm = to_matrix(l);
  EMatrix lh = lm.adjoint();
  Eigen::Index d = lm.rows();
  EMatrix inner = (lh * to_matrix(g)).cwiseProduct(cholesky_mask(d));
  // L^-H inner L^-1 via two triangular solves against the upper factor.
  EMatrix left = lh.triangularView<Eigen::Upper>().solve(inner);
  EMatrix raw = lh.triangularView<Eigen::Upper>().solve(left.adjoint()).adjoint();
  EMatrix sym = 0.5 * (raw + raw.adjoint());
  return from_matrix(sym);
}

EigPair eig_fwd(const ComplexTensor& phi, double gap_tol_factor) {
  require_square(phi, "eig");
  EMatrix m = to_matrix(phi);
  Eigen::ComplexEigenSolver<EMatrix> solver(m, true);
  if (solver.info() != Eigen::Success) {
    throw std::domain_error("eig: factorization failed to converge");
  }
  Eigen::Index d = m.rows();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), 0);
  const auto& lam = solver.eigenvalues();
  std::sort(order.begin(), order.end(), [&](Eigen::Index i, Eigen::Index j) {
    if (lam(i).real() != lam(j).real()) return lam(i).real() > lam(j).real();
    return lam(i).imag() > lam(j).imag();
  });
  EMatrix vectors(d, d);
  std::vector<cdouble> values(static_cast<std::size_t>(d));
  for (Eigen::Index k = 0; k < d; ++k) {
    Eigen::VectorXcd col = solver.eigenvectors().col(order[static_cast<std::size_t>(k)]);
    vectors.col(k) = col / col.norm();
    values[static_cast<std::size_t>(k)] = lam(order[static_cast<std::size_t>(k)]);
  }
  ComplexTensor value_vec({static_cast<std::size_t>(d)}, std::move(values));
  eig_gaps(value_vec, gap_tol_factor * value_vec.max_abs());  // throws on degenerate spectra
  return {from_matrix(vectors), std::move(value_vec)};
}

ComplexTensor eig_extension_term(const ComplexTensor& g_vectors, const ComplexTensor& vectors,
                                 const ComplexTensor& values) {
  EMatrix w = to_matrix(vectors);
  Eigen::Index d = w.rows();
  EigGapMatrix gaps = eig_gaps(values, eig_gap_tolerance(values));
  EMatrix f_conj = to_matrix(gaps.inverses).conjugate();
  EMatrix whgw = w.adjoint() * to_matrix(g_vectors);
  EMatrix diag_re = EMatrix::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) diag_re(i, i) = whgw(i, i).real();
  EMatrix core = -f_conj.cwiseProduct(w.adjoint() * w * diag_re);
  EMatrix wh = w.adjoint();
  EMatrix grad = wh.partialPivLu().solve(core * wh);
  return from_matrix(grad);
}

ComplexTensor eig_bwd(const ComplexTensor& g_vectors, const ComplexTensor& g_values,
                      const ComplexTensor& vectors, const ComplexTensor& values,
                      bool magnitude_extension) {
  EMatrix w = to_matrix(vectors);
  Eigen::Index d = w.rows();
  EMatrix core = EMatrix::Zero(d, d);
  if (g_values.size() > 0) {
    for (Eigen::Index i = 0; i < d; ++i) core(i, i) = g_values[static_cast<std::size_t>(i)];
  }
  if (g_vectors.size() > 0) {
    EigGapMatrix gaps = eig_gaps(values, eig_gap_tolerance(values));
    EMatrix f_conj = to_matrix(gaps.inverses).conjugate();
    EMatrix whgw = w.adjoint() * to_matrix(g_vectors);
    core += f_conj.cwiseProduct(whgw);
    if (magnitude_extension) {
      EMatrix diag_re = EMatrix::Zero(d, d);
      for (Eigen::Index i = 0; i < d; ++i) diag_re(i, i) = whgw(i, i).real();
      core -= f_conj.cwiseProduct(w.adjoint() * w * diag_re);
    }
  }
  EMatrix wh = w.adjoint();
  EMatrix grad = wh.partialPivLu().solve(core * wh);
  return from_matrix(grad);
}

ComplexTensor transpose_fwd(const ComplexTensor& a) {
  if (a.rank() != 2) throw std::invalid_argument("transpose: expects rank 2");
  std::size_t r = a.rows(), c = a.cols();
  std::vector<cdouble> out(a.size());
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
  return ComplexTensor({c, r}, std::move(out));
}

}  // namespace linalg_ops

namespace ops {

NodeId normalize_vec(Tape& t, NodeId z) {
  return t.record(OpKind::kNormalizeVec, {z}, linalg_ops::normalize_vec_fwd(t.value(z)));
}

NodeId matmul(Tape& t, NodeId a, NodeId b) {
  return t.record(OpKind::kMatmul, {a, b}, linalg_ops::matmul_fwd(t.value(a), t.value(b)), {}, 0,
                  t.node(a).real_constrained && t.node(b).real_constrained);
}

NodeId inv(Tape& t, NodeId a) {
  return t.record(OpKind::kInv, {a}, linalg_ops::inv_fwd(t.value(a)));
}

NodeId solve_left(Tape& t, NodeId a, NodeId b) {
  return t.record(OpKind::kSolveLeft, {a, b},
                  linalg_ops::solve_left_fwd(t.value(a), t.value(b)));
}

NodeId solve_right(Tape& t, NodeId a, NodeId b) {
  return t.record(OpKind::kSolveRight, {a, b},
                  linalg_ops::solve_right_fwd(t.value(a), t.value(b)));
}

NodeId cholesky(Tape& t, NodeId a) {
  return t.record(OpKind::kCholesky, {a}, linalg_ops::cholesky_fwd(t.value(a)));
}

EigNodes eig(Tape& t, NodeId phi, bool magnitude_extension) {
  linalg_ops::EigPair pair = linalg_ops::eig_fwd(t.value(phi));
  NodeId values = t.record(OpKind::kEigValues, {phi}, pair.values, {pair.vectors});
  NodeId vectors = t.record(OpKind::kEigVectors, {phi}, pair.vectors, {pair.values},
                            magnitude_extension ? 1 : 0);
  return {values, vectors};
}

NodeId transpose(Tape& t, NodeId a) {
  return t.record(OpKind::kTranspose, {a}, linalg_ops::transpose_fwd(t.value(a)), {}, 0,
                  t.node(a).real_constrained);
}

NodeId sum(Tape& t, NodeId z) {
  return t.record(OpKind::kSumAll, {z}, ComplexTensor::scalar(sum_all(t.value(z))), {}, 0,
                  t.node(z).real_constrained);
}

NodeId element(Tape& t, NodeId z, std::size_t flat_index) {
  const ComplexTensor& v = t.value(z);
  if (flat_index >= v.size()) throw std::invalid_argument("element: index out of range");
  return t.record(OpKind::kElement, {z}, ComplexTensor::scalar(v[flat_index]), {},
                  static_cast<std::int64_t>(flat_index), t.node(z).real_constrained);
}

NodeId column(Tape& t, NodeId m, std::size_t col) {
  const ComplexTensor& v = t.value(m);
  if (v.rank() != 2 || col >= v.cols()) throw std::invalid_argument("column: index out of range");
  std::size_t r = v.rows();
  std::vector<cdouble> out(r);
  for (std::size_t i = 0; i < r; ++i) out[i] = v[i * v.cols() + col];
  return t.record(OpKind::kColumn, {m}, ComplexTensor({r, 1}, std::move(out)), {},
                  static_cast<std::int64_t>(col), t.node(m).real_constrained);
}

NodeId diag_embed(Tape& t, NodeId v) {
  const ComplexTensor& x = t.value(v);
  std::size_t d = x.size();
  ComplexTensor out = ComplexTensor::zeros({d, d});
  for (std::size_t i = 0; i < d; ++i) out[i * d + i] = x[i];
  return t.record(OpKind::kDiagEmbed, {v}, std::move(out), {}, 0, t.node(v).real_constrained);
}

NodeId diag_part(Tape& t, NodeId m) {
  const ComplexTensor& x = t.value(m);
  if (x.rank() != 2 || x.rows() != x.cols()) {
    throw std::invalid_argument("diag_part: expects a square matrix");
  }
  std::size_t d = x.rows();
  std::vector<cdouble> out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = x[i * d + i];
  return t.record(OpKind::kDiagPart, {m}, ComplexTensor({d, 1}, std::move(out)), {}, 0,
                  t.node(m).real_constrained);
}

NodeId hermitian(Tape& t, NodeId a) { return transpose(t, ops::conj(t, a)); }

NodeId phase_normalize(Tape& t, NodeId w) {
  NodeId first = element(t, w, 0);
  if (t.value(first)[0] == cdouble{0.0, 0.0}) {
    throw std::domain_error("phase_normalize: first entry is zero");
  }
  NodeId factor = ops::phase_factor(t, ops::conj(t, first));
  return ops::mul(t, w, factor);
}

}  // namespace ops
}  // namespace bfgrad
