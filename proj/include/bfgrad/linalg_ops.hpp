// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <utility>

#include "bfgrad/tape.hpp"
#include "bfgrad/tensor.hpp"

namespace bfgrad::linalg_ops {

struct EigPair {
  ComplexTensor vectors;  // D x D, unit-norm columns, sorted by descending Re(lambda)
  ComplexTensor values;   // length-D vector
};

// E_ij = lambda_j - lambda_i and its Hadamard inverse with zero diagonal.
struct EigGapMatrix {
  ComplexTensor differences;  // E
  ComplexTensor inverses;     // F
};

EigGapMatrix eig_gaps(const ComplexTensor& values, double gap_tol);

// Forward computations. Factorizations are delegated to a dense solver; the
// backward rules below are what this module is for.
ComplexTensor normalize_vec_fwd(const ComplexTensor& z);
ComplexTensor matmul_fwd(const ComplexTensor& a, const ComplexTensor& b);
ComplexTensor inv_fwd(const ComplexTensor& a);
ComplexTensor solve_left_fwd(const ComplexTensor& a, const ComplexTensor& b);   // A^-1 B
ComplexTensor solve_right_fwd(const ComplexTensor& a, const ComplexTensor& b);  // A B^-1
ComplexTensor cholesky_fwd(const ComplexTensor& a);
EigPair eig_fwd(const ComplexTensor& phi, double gap_tol_factor = 1e-8);

ComplexTensor transpose_fwd(const ComplexTensor& a);

// Backward rules; g is the upstream cotangent dJ/ds*.
ComplexTensor normalize_vec_bwd(const ComplexTensor& g, const ComplexTensor& z);
std::pair<ComplexTensor, ComplexTensor> matmul_bwd(const ComplexTensor& g,
                                                   const ComplexTensor& a,
                                                   const ComplexTensor& b);
ComplexTensor inv_bwd(const ComplexTensor& g, const ComplexTensor& c);
// returns (grad_A, grad_B)
std::pair<ComplexTensor, ComplexTensor> solve_left_bwd(const ComplexTensor& g,
                                                       const ComplexTensor& a,
                                                       const ComplexTensor& c);
std::pair<ComplexTensor, ComplexTensor> solve_right_bwd(const ComplexTensor& g,
                                                        const ComplexTensor& b,
                                                        const ComplexTensor& c);
ComplexTensor cholesky_bwd(const ComplexTensor& g, const ComplexTensor& l);

// Full eigendecomposition gradient, including the magnitude-normalization
// term unless ablated. Either cotangent may be empty (treated as zero).
ComplexTensor eig_bwd(const ComplexTensor& g_vectors, const ComplexTensor& g_values,
                      const ComplexTensor& vectors, const ComplexTensor& values,
                      bool magnitude_extension = true);
// The magnitude-normalization term alone (the second line of the full rule).
ComplexTensor eig_extension_term(const ComplexTensor& g_vectors, const ComplexTensor& vectors,
                                 const ComplexTensor& values);

// Condition-number guard used by inv / solve forwards. Throws on estimates
// beyond 1e12.
double condition_estimate(const ComplexTensor& a);

}  // namespace bfgrad::linalg_ops

namespace bfgrad::ops {

NodeId normalize_vec(Tape& t, NodeId z);
NodeId matmul(Tape& t, NodeId a, NodeId b);
NodeId inv(Tape& t, NodeId a);
NodeId solve_left(Tape& t, NodeId a, NodeId b);
NodeId solve_right(Tape& t, NodeId a, NodeId b);
NodeId cholesky(Tape& t, NodeId a);
// Records both halves of the factorization; iparam on the vectors node
// carries the extension flag.
struct EigNodes {
  NodeId values;
  NodeId vectors;
};
EigNodes eig(Tape& t, NodeId phi, bool magnitude_extension = true);

NodeId transpose(Tape& t, NodeId a);
NodeId sum(Tape& t, NodeId z);
NodeId element(Tape& t, NodeId z, std::size_t flat_index);
NodeId column(Tape& t, NodeId m, std::size_t col);
NodeId diag_embed(Tape& t, NodeId v);
NodeId diag_part(Tape& t, NodeId m);

// conj + transpose
NodeId hermitian(Tape& t, NodeId a);
// w * exp(-j angle(w_0)): removes the absolute-phase freedom, built from
// element / conj / phase_factor / mul.
NodeId phase_normalize(Tape& t, NodeId w);

}  // namespace bfgrad::ops
