// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "bfgrad/tensor.hpp"

namespace bfgrad {

using NodeId = std::size_t;

enum class OpKind {
  kConstant,  // leaf, no inputs
  // elementwise
  kIdentity,
  kConj,
  kNeg,
  kAdd,
  kMul,
  kPow,  // integer exponent in iparam
  kDiv,
  kAbs,
  kPhaseFactor,
  kRe,
  kIm,
  // discrete Fourier transforms
  kDft,
  kIdft,
  kRdft,
  kIrdft,
  // matrix / vector
  kNormalizeVec,
  kMatmul,
  kInv,
  kSolveLeft,   // A^-1 B
  kSolveRight,  // A B^-1
  kCholesky,
  kEigValues,   // eigenvalue half of an eig factorization
  kEigVectors,  // eigenvector half; iparam 0 ablates the magnitude term
  // structural plumbing
  kTranspose,
  kSumAll,
  kElement,  // flat index in iparam
  kColumn,   // column index in iparam
  kDiagEmbed,
  kDiagPart,
  // real-valued rules for the objective and mask parameterization
  kSigmoid,
  kNegLogRatioDb,
};

const char* op_name(OpKind op);

/// One recorded forward step. Inputs always reference earlier ids, so the
/// tape is topologically ordered by construction.
struct Node {
  NodeId id = 0;
  OpKind op = OpKind::kConstant;
  std::vector<NodeId> inputs;
  ComplexTensor value;
  std::vector<ComplexTensor> saved;  // forward byproducts a backward rule needs
  std::int64_t iparam = 0;
  bool real_constrained = false;
};

/// Per-node gradient accumulator. The stored quantity is the conjugate
/// cotangent dJ/dz* = (dJ/dx + j dJ/dy)/2; nodes with no path to the
/// objective carry no entry at all.
class GradientMap {
 public:
  explicit GradientMap(std::size_t node_count) : grads_(node_count) {}

  bool has(NodeId id) const { return id < grads_.size() && grads_[id].has_value(); }
  const ComplexTensor& at(NodeId id) const;

  // The dJ/dz convention, obtained by conjugating the stored gradient.
  ComplexTensor at_z(NodeId id) const { return bfgrad::conj(at(id)); }

  void accumulate(NodeId id, const ComplexTensor& delta, bool real_constrained);

 private:
  std::vector<std::optional<ComplexTensor>> grads_;
};

// Re{g}: the projection delivered to real-constrained nodes.
ComplexTensor project_real(const ComplexTensor& g);

/// Dynamic define-by-run tape. Recording and backward are single-threaded
/// per tape; independent tapes may run in parallel.
class Tape {
 public:
  NodeId record(OpKind op, std::vector<NodeId> inputs, ComplexTensor value,
                std::vector<ComplexTensor> saved = {}, std::int64_t iparam = 0,
                bool real_constrained = false);

  NodeId constant(ComplexTensor value);
  NodeId input(ComplexTensor value, bool real_constrained = false);

  const Node& node(NodeId id) const;
  std::size_t size() const { return nodes_.size(); }
  const ComplexTensor& value(NodeId id) const { return node(id).value; }

  // Reverse sweep from a real scalar objective. The objective is seeded with
  // dJ/dJ* = 1/2 so every delivered gradient is exactly (dJ/dx + j dJ/dy)/2.
  GradientMap backward(NodeId objective) const;

  // Reverse sweep from an arbitrary node with an injected cotangent; used by
  // identities that push a chosen upstream gradient through a subgraph.
  GradientMap backward_with_seed(NodeId start, const ComplexTensor& seed) const;

 private:
  std::vector<Node> nodes_;
};

// One complex gradient-descent step z - mu * g. Real-constrained values get
// the real-projected gradient.
ComplexTensor sgd_step(const ComplexTensor& z, const ComplexTensor& g, double mu,
                       bool real_constrained = false);

}  // namespace bfgrad
