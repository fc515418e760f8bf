// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <vector>

#include "bfgrad/tape.hpp"
#include "bfgrad/tensor.hpp"

namespace bfgrad::gradcheck {

/// A leaf fed to a pipeline under test. hermitian_pairs switches the
/// perturbation to joint conjugate (i,j)/(j,i) steps so the finite
/// difference stays on the hermitian manifold.
struct LeafSpec {
  ComplexTensor value;
  bool real_constrained = false;
  bool hermitian_pairs = false;
};

/// Builds the objective node from freshly recorded leaves; called once for
/// the analytic pass and once per perturbed evaluation.
using PipelineFn = std::function<NodeId(Tape&, const std::vector<NodeId>&)>;

struct ElementRecord {
  std::size_t leaf = 0;
  std::size_t index = 0;
  cdouble analytic{0.0, 0.0};
  cdouble numeric{0.0, 0.0};
  double abs_err = 0.0;
  double rel_err = 0.0;
};

struct CheckReport {
  std::vector<ElementRecord> elements;
  double max_rel_err = 0.0;
  double tol = 0.0;
  bool pass = false;

  const ElementRecord& worst() const;
};

// Central-difference conjugate cotangent of a real scalar function:
// per element (dJ/dx + j dJ/dy)/2; real-constrained inputs take only the
// x-perturbation and the result is real.
ComplexTensor numeric_grad(const std::function<cdouble(const ComplexTensor&)>& f,
                           const ComplexTensor& z, double eps = 1e-6,
                           bool real_constrained = false);

// Runs the tape backward and the numeric gradient on every leaf.
CheckReport check(const PipelineFn& build, const std::vector<LeafSpec>& leaves,
                  double eps = 1e-6, double tol = 1e-5);

double relative_error(cdouble analytic, cdouble numeric);

}  // namespace bfgrad::gradcheck
