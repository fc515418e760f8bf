// SPDX-License-Identifier: Apache-2.0
#include "bfgrad/tape.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

#include "bfgrad/fourier_ops.hpp"
#include "bfgrad/linalg_ops.hpp"
#include "bfgrad/scalar_ops.hpp"

namespace bfgrad {

const char* op_name(OpKind op) {
  switch (op) {
    case OpKind::kConstant: return "constant";
    case OpKind::kIdentity: return "identity";
    case OpKind::kConj: return "conj";
    case OpKind::kNeg: return "neg";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kPow: return "pow";
    case OpKind::kDiv: return "div";
    case OpKind::kAbs: return "abs";
    case OpKind::kPhaseFactor: return "phase_factor";
    case OpKind::kRe: return "re";
    case OpKind::kIm: return "im";
    case OpKind::kDft: return "dft";
    case OpKind::kIdft: return "idft";
    case OpKind::kRdft: return "rdft";
    case OpKind::kIrdft: return "irdft";
    case OpKind::kNormalizeVec: return "normalize_vec";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kInv: return "inv";
    case OpKind::kSolveLeft: return "solve_left";
    case OpKind::kSolveRight: return "solve_right";
    case OpKind::kCholesky: return "cholesky";
    case OpKind::kEigValues: return "eig_values";
    case OpKind::kEigVectors: return "eig_vectors";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kSumAll: return "sum";
    case OpKind::kElement: return "element";
    case OpKind::kColumn: return "column";
    case OpKind::kDiagEmbed: return "diag_embed";
    case OpKind::kDiagPart: return "diag_part";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kNegLogRatioDb: return "neg_log_ratio_db";
  }
  return "unknown";
}

ComplexTensor project_real(const ComplexTensor& g) { return real_part(g); }

const ComplexTensor& GradientMap::at(NodeId id) const {
  if (!has(id)) {
    throw std::out_of_range("GradientMap: no gradient recorded for node (unreachable)");
  }
  return *grads_[id];
}

void GradientMap::accumulate(NodeId id, const ComplexTensor& delta, bool real_constrained) {
  ComplexTensor contribution = real_constrained ? project_real(delta) : delta;
  if (!grads_[id].has_value()) {
    grads_[id] = std::move(contribution);
  } else {
    grads_[id] = add(*grads_[id], contribution);
  }
}

NodeId Tape::record(OpKind op, std::vector<NodeId> inputs, ComplexTensor value,
                    std::vector<ComplexTensor> saved, std::int64_t iparam,
                    bool real_constrained) {
  for (NodeId in : inputs) {
    if (in >= nodes_.size()) {
      throw std::invalid_argument("Tape::record: input id does not exist on the tape");
    }
  }
  if (real_constrained && !value.is_real(0.0)) {
    throw std::invalid_argument("Tape::record: real-constrained node with nonzero imaginary part");
  }
  Node n;
  n.id = nodes_.size();
  n.op = op;
  n.inputs = std::move(inputs);
  n.value = std::move(value);
  n.saved = std::move(saved);
  n.iparam = iparam;
  n.real_constrained = real_constrained;
  nodes_.push_back(std::move(n));
  return nodes_.back().id;
}

NodeId Tape::constant(ComplexTensor value) {
  bool real = value.is_real(0.0);
  return record(OpKind::kConstant, {}, std::move(value), {}, 0, real);
}

NodeId Tape::input(ComplexTensor value, bool real_constrained) {
  if (real_constrained && !value.is_real(0.0)) {
    throw std::invalid_argument("Tape::input: real-constrained leaf must have zero imaginary part");
  }
  return record(OpKind::kConstant, {}, std::move(value), {}, 0, real_constrained);
}

const Node& Tape::node(NodeId id) const {
  if (id >= nodes_.size()) throw std::invalid_argument("Tape: node id out of range");
  return nodes_[id];
}

namespace {

// Cotangents delivered to each input of a node, aligned with node.inputs.
std::vector<ComplexTensor> dispatch_backward(const Tape& tape, const Node& n,
                                             const ComplexTensor& g) {
  auto in_value = [&](std::size_t k) -> const ComplexTensor& {
    return tape.value(n.inputs[k]);
  };
  switch (n.op) {
    case OpKind::kConstant:
      return {};
    case OpKind::kIdentity:
      return {scalar_ops::identity_bwd(g)};
    case OpKind::kConj:
      return {scalar_ops::conj_bwd(g)};
    case OpKind::kNeg:
      return {scalar_ops::neg_bwd(g)};
    case OpKind::kAdd: {
      auto [g1, g2] = scalar_ops::add_bwd(g, in_value(0), in_value(1));
      return {std::move(g1), std::move(g2)};
    }
    case OpKind::kMul: {
      auto [g1, g2] = scalar_ops::mul_bwd(g, in_value(0), in_value(1));
      return {std::move(g1), std::move(g2)};
    }
    case OpKind::kPow:
      return {scalar_ops::pow_bwd(g, in_value(0), n.iparam)};
    case OpKind::kDiv: {
      auto [g1, g2] = scalar_ops::div_bwd(g, in_value(0), in_value(1));
      return {std::move(g1), std::move(g2)};
    }
    case OpKind::kAbs:
      return {scalar_ops::abs_bwd(g, in_value(0))};
    case OpKind::kPhaseFactor:
      return {scalar_ops::phase_factor_bwd(g, in_value(0))};
    case OpKind::kRe:
      return {scalar_ops::re_bwd(g)};
    case OpKind::kIm:
      return {scalar_ops::im_bwd(g)};
    case OpKind::kDft:
      return {fourier_ops::dft_bwd(g)};
    case OpKind::kIdft:
      return {fourier_ops::idft_bwd(g)};
    case OpKind::kRdft:
      return {fourier_ops::rdft_bwd(g)};
    case OpKind::kIrdft:
      return {fourier_ops::irdft_bwd(g)};
    case OpKind::kNormalizeVec:
      return {linalg_ops::normalize_vec_bwd(g, in_value(0))};
    case OpKind::kMatmul: {
      auto [ga, gb] = linalg_ops::matmul_bwd(g, in_value(0), in_value(1));
      return {std::move(ga), std::move(gb)};
    }
    case OpKind::kInv:
      return {linalg_ops::inv_bwd(g, n.value)};
    case OpKind::kSolveLeft: {
      auto [ga, gb] = linalg_ops::solve_left_bwd(g, in_value(0), n.value);
      return {std::move(ga), std::move(gb)};
    }
    case OpKind::kSolveRight: {
      auto [ga, gb] = linalg_ops::solve_right_bwd(g, in_value(1), n.value);
      return {std::move(ga), std::move(gb)};
    }
    case OpKind::kCholesky:
      return {linalg_ops::cholesky_bwd(g, n.value)};
    case OpKind::kEigValues:
      return {linalg_ops::eig_bwd(ComplexTensor{}, g, n.saved[0], n.value)};
    case OpKind::kEigVectors:
      return {linalg_ops::eig_bwd(g, ComplexTensor{}, n.value, n.saved[0], n.iparam != 0)};
    case OpKind::kTranspose:
      return {linalg_ops::transpose_fwd(g)};
    case OpKind::kSumAll: {
      const ComplexTensor& in = in_value(0);
      return {ComplexTensor(in.shape(), std::vector<cdouble>(in.size(), g[0]))};
    }
    case OpKind::kElement: {
      ComplexTensor out = ComplexTensor::zeros(in_value(0).shape());
      out[static_cast<std::size_t>(n.iparam)] = g[0];
      return {std::move(out)};
    }
    case OpKind::kColumn: {
      const ComplexTensor& in = in_value(0);
      ComplexTensor out = ComplexTensor::zeros(in.shape());
      std::size_t c = in.cols();
      std::size_t col = static_cast<std::size_t>(n.iparam);
      for (std::size_t i = 0; i < in.rows(); ++i) out[i * c + col] = g[i];
      return {std::move(out)};
    }
    case OpKind::kDiagEmbed: {
      const ComplexTensor& in = in_value(0);
      std::size_t d = in.size();
      std::vector<cdouble> out(d);
      for (std::size_t i = 0; i < d; ++i) out[i] = g[i * d + i];
      return {ComplexTensor(in.shape(), std::move(out))};
    }
    case OpKind::kDiagPart: {
      const ComplexTensor& in = in_value(0);
      std::size_t d = in.rows();
      ComplexTensor out = ComplexTensor::zeros(in.shape());
      for (std::size_t i = 0; i < d; ++i) out[i * d + i] = g[i];
      return {std::move(out)};
    }
    case OpKind::kSigmoid:
      return {scalar_ops::sigmoid_bwd(g, n.value)};
    case OpKind::kNegLogRatioDb: {
      auto [gx, gn] = scalar_ops::neg_log_ratio_db_bwd(g, in_value(0), in_value(1));
      return {std::move(gx), std::move(gn)};
    }
  }
  throw std::logic_error("dispatch_backward: unhandled op");
}

}  // namespace

GradientMap Tape::backward(NodeId objective) const {
  const Node& obj = node(objective);
  if (obj.value.size() != 1) {
    throw std::invalid_argument("backward: objective must be a scalar");
  }
  cdouble j = obj.value[0];
  if (std::abs(j.imag()) > 1e-12 * std::max(1.0, std::abs(j.real()))) {
    throw std::invalid_argument("backward: objective must be real-valued");
  }
  // dJ/dJ* = (dJ/dx + j dJ/dy)/2 evaluated on the objective itself.
  return backward_with_seed(objective, ComplexTensor(obj.value.shape(), {cdouble{0.5, 0.0}}));
}

GradientMap Tape::backward_with_seed(NodeId start, const ComplexTensor& seed) const {
  const Node& first = node(start);
  if (!seed.same_shape(first.value)) {
    throw std::invalid_argument("backward_with_seed: seed shape must match the node value");
  }
  GradientMap grads(nodes_.size());
  grads.accumulate(start, seed, first.real_constrained);
  for (NodeId id = start + 1; id-- > 0;) {
    if (!grads.has(id)) continue;
    const Node& n = nodes_[id];
    if (n.inputs.empty()) continue;
    std::vector<ComplexTensor> cotangents = dispatch_backward(*this, n, grads.at(id));
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      grads.accumulate(n.inputs[k], cotangents[k], nodes_[n.inputs[k]].real_constrained);
    }
  }
  return grads;
}

ComplexTensor sgd_step(const ComplexTensor& z, const ComplexTensor& g, double mu,
                       bool real_constrained) {
  if (!z.same_shape(g)) throw std::invalid_argument("sgd_step: shape mismatch");
  if (mu < 0.0) throw std::invalid_argument("sgd_step: step size must be non-negative");
  ComplexTensor grad = real_constrained ? project_real(g) : g;
  return sub(z, scale(grad, mu));
}

}  // namespace bfgrad
