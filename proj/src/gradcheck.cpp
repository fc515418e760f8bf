// SPDX-License-Identifier: Apache-2.0
#include "bfgrad/gradcheck.hpp"

#include <cmath>
#include <stdexcept>

namespace bfgrad::gradcheck {

namespace {

double require_real(cdouble j) {
  if (std::abs(j.imag()) > 1e-12 * std::max(1.0, std::abs(j.real()))) {
    throw std::invalid_argument("gradcheck: pipeline output is not real-valued");
  }
  return j.real();
}

}  // namespace

double relative_error(cdouble analytic, cdouble numeric) {
  double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-12});
  return std::abs(analytic - numeric) / denom;
}

const ElementRecord& CheckReport::worst() const {
  if (elements.empty()) throw std::logic_error("CheckReport: no elements");
  const ElementRecord* w = &elements.front();
  for (const ElementRecord& e : elements) {
    if (e.rel_err > w->rel_err) w = &e;
  }
  return *w;
}

ComplexTensor numeric_grad(const std::function<cdouble(const ComplexTensor&)>& f,
                           const ComplexTensor& z, double eps, bool real_constrained) {
  if (eps <= 0.0) throw std::invalid_argument("numeric_grad: eps must be positive");
  ComplexTensor work = z;
  std::vector<cdouble> grad(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    cdouble original = work[i];
    work[i] = original + eps;
    double jp = require_real(f(work));
    work[i] = original - eps;
    double jm = require_real(f(work));
    double djdx = (jp - jm) / (2.0 * eps);
    double djdy = 0.0;
    if (!real_constrained) {
      work[i] = original + cdouble{0.0, eps};
      jp = require_real(f(work));
      work[i] = original - cdouble{0.0, eps};
      jm = require_real(f(work));
      djdy = (jp - jm) / (2.0 * eps);
    }
    work[i] = original;
    grad[i] = 0.5 * cdouble{djdx, djdy};
  }
  return ComplexTensor(z.shape(), std::move(grad));
}

namespace {

// Central difference of J along joint conjugate perturbations of a square
// matrix, returning the hermitian gradient the analytic side should match:
// H_ii = (dJ/d a_ii)/2, H_ij = (dJ/d Re + j dJ/d Im)/4 for i < j.
ComplexTensor numeric_grad_hermitian(const std::function<cdouble(const ComplexTensor&)>& f,
                                     const ComplexTensor& z, double eps) {
  if (z.rank() != 2 || z.rows() != z.cols()) {
    throw std::invalid_argument("numeric_grad: hermitian mode expects a square matrix");
  }
  std::size_t d = z.rows();
  ComplexTensor work = z;
  ComplexTensor grad = ComplexTensor::zeros(z.shape());
  auto eval = [&]() { return require_real(f(work)); };
  for (std::size_t i = 0; i < d; ++i) {
    std::size_t ii = i * d + i;
    cdouble keep = work[ii];
    work[ii] = keep + eps;
    double jp = eval();
    work[ii] = keep - eps;
    double jm = eval();
    work[ii] = keep;
    grad[ii] = cdouble{(jp - jm) / (2.0 * eps) / 2.0, 0.0};
    for (std::size_t j = i + 1; j < d; ++j) {
      std::size_t ij = i * d + j;
      std::size_t ji = j * d + i;
      cdouble kij = work[ij], kji = work[ji];
      work[ij] = kij + eps;
      work[ji] = kji + eps;
      jp = eval();
      work[ij] = kij - eps;
      work[ji] = kji - eps;
      jm = eval();
      double dre = (jp - jm) / (2.0 * eps);
      work[ij] = kij + cdouble{0.0, eps};
      work[ji] = kji - cdouble{0.0, eps};
      jp = eval();
      work[ij] = kij - cdouble{0.0, eps};
      work[ji] = kji + cdouble{0.0, eps};
      jm = eval();
      double dim = (jp - jm) / (2.0 * eps);
      work[ij] = kij;
      work[ji] = kji;
      grad[ij] = cdouble{dre / 4.0, dim / 4.0};
      grad[ji] = std::conj(grad[ij]);
    }
  }
  return grad;
}

}  // namespace

CheckReport check(const PipelineFn& build, const std::vector<LeafSpec>& leaves, double eps,
                  double tol) {
  // Analytic pass.
  Tape tape;
  std::vector<NodeId> ids;
  ids.reserve(leaves.size());
  for (const LeafSpec& leaf : leaves) ids.push_back(tape.input(leaf.value, leaf.real_constrained));
  NodeId objective = build(tape, ids);
  require_real(tape.value(objective)[0]);
  GradientMap grads = tape.backward(objective);

  CheckReport report;
  report.tol = tol;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    // Re-evaluate the whole pipeline with leaf l replaced.
    auto eval = [&](const ComplexTensor& replaced) -> cdouble {
      Tape t;
      std::vector<NodeId> new_ids;
      new_ids.reserve(leaves.size());
      for (std::size_t k = 0; k < leaves.size(); ++k) {
        new_ids.push_back(
            t.input(k == l ? replaced : leaves[k].value, leaves[k].real_constrained));
      }
      return t.value(build(t, new_ids))[0];
    };
    ComplexTensor numeric = leaves[l].hermitian_pairs
                                ? numeric_grad_hermitian(eval, leaves[l].value, eps)
                                : numeric_grad(eval, leaves[l].value, eps,
                                               leaves[l].real_constrained);
    ComplexTensor analytic =
        grads.has(ids[l]) ? grads.at(ids[l]) : ComplexTensor::zeros(leaves[l].value.shape());
    for (std::size_t i = 0; i < numeric.size(); ++i) {
      ElementRecord rec;
      rec.leaf = l;
      rec.index = i;
      rec.analytic = analytic[i];
      rec.numeric = numeric[i];
      rec.abs_err = std::abs(rec.analytic - rec.numeric);
      rec.rel_err = relative_error(rec.analytic, rec.numeric);
      report.max_rel_err = std::max(report.max_rel_err, rec.rel_err);
      report.elements.push_back(rec);
    }
  }
  report.pass = report.max_rel_err <= tol;
  return report;
}

}  // namespace bfgrad::gradcheck
