// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <utility>

#include "bfgrad/tape.hpp"
#include "bfgrad/tensor.hpp"

namespace bfgrad::scalar_ops {

// Backward rules, elementwise over tensors. g is the upstream cotangent
// dJ/ds*. Binary ops support equal shapes or scalar-vs-tensor broadcasting;
// the cotangent delivered to a broadcast scalar is the sum over elements.

ComplexTensor identity_bwd(const ComplexTensor& g);
ComplexTensor conj_bwd(const ComplexTensor& g);
ComplexTensor neg_bwd(const ComplexTensor& g);
std::pair<ComplexTensor, ComplexTensor> add_bwd(const ComplexTensor& g,
                                                const ComplexTensor& z1,
                                                const ComplexTensor& z2);
std::pair<ComplexTensor, ComplexTensor> mul_bwd(const ComplexTensor& g,
                                                const ComplexTensor& z1,
                                                const ComplexTensor& z2);
ComplexTensor pow_bwd(const ComplexTensor& g, const ComplexTensor& z, std::int64_t n);
std::pair<ComplexTensor, ComplexTensor> div_bwd(const ComplexTensor& g,
                                                const ComplexTensor& z1,
                                                const ComplexTensor& z2);
ComplexTensor abs_bwd(const ComplexTensor& g, const ComplexTensor& z);
ComplexTensor phase_factor_bwd(const ComplexTensor& g, const ComplexTensor& z);
ComplexTensor re_bwd(const ComplexTensor& g);
ComplexTensor im_bwd(const ComplexTensor& g);

// Real-valued auxiliary rules (inputs are real-constrained by contract).
ComplexTensor sigmoid_bwd(const ComplexTensor& g, const ComplexTensor& s);
// J = -10*log10(px/pn) for real positive scalars.
std::pair<ComplexTensor, ComplexTensor> neg_log_ratio_db_bwd(const ComplexTensor& g,
                                                             const ComplexTensor& px,
                                                             const ComplexTensor& pn);

// Forward values (shared by the tape builders and the rules' tests).
ComplexTensor abs_fwd(const ComplexTensor& z);
ComplexTensor phase_factor_fwd(const ComplexTensor& z);
ComplexTensor pow_fwd(const ComplexTensor& z, std::int64_t n);
ComplexTensor div_fwd(const ComplexTensor& z1, const ComplexTensor& z2);
ComplexTensor mul_fwd(const ComplexTensor& z1, const ComplexTensor& z2);
ComplexTensor add_fwd(const ComplexTensor& z1, const ComplexTensor& z2);
ComplexTensor sigmoid_fwd(const ComplexTensor& z);

}  // namespace bfgrad::scalar_ops

namespace bfgrad::ops {

// Tape builders: compute the forward value and record the node.
NodeId identity(Tape& t, NodeId z);
NodeId conj(Tape& t, NodeId z);
NodeId neg(Tape& t, NodeId z);
NodeId add(Tape& t, NodeId z1, NodeId z2);
NodeId mul(Tape& t, NodeId z1, NodeId z2);
NodeId pow(Tape& t, NodeId z, std::int64_t n);
NodeId div(Tape& t, NodeId z1, NodeId z2);
NodeId abs(Tape& t, NodeId z);
NodeId phase_factor(Tape& t, NodeId z);
NodeId re(Tape& t, NodeId z);
NodeId im(Tape& t, NodeId z);
NodeId sigmoid(Tape& t, NodeId z);
NodeId neg_log_ratio_db(Tape& t, NodeId px, NodeId pn);

}  // namespace bfgrad::ops
