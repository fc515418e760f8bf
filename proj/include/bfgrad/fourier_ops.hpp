// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "bfgrad/tape.hpp"
#include "bfgrad/tensor.hpp"

namespace bfgrad::fourier_ops {

// Direct O(N^2) transforms. Convention: unscaled forward sum
// s_f = sum_n z_n exp(-j 2 pi n f / N), inverse carries the 1/N. The
// real-input pair keeps bins 0..N/2 of an even-length transform.

ComplexTensor dft_fwd(const ComplexTensor& z);
ComplexTensor idft_fwd(const ComplexTensor& z);
// Input must be a real vector of even length; output has N/2+1 bins.
ComplexTensor rdft_fwd(const ComplexTensor& z);
// Hermitian-completion sum over a half spectrum; output is exactly real.
ComplexTensor irdft_fwd(const ComplexTensor& z);

ComplexTensor dft_bwd(const ComplexTensor& g);
ComplexTensor idft_bwd(const ComplexTensor& g);
// g has N/2+1 bins; returns the exactly-real length-N gradient.
ComplexTensor rdft_bwd(const ComplexTensor& g);
// g is the real length-N cotangent; returns the N/2+1-bin gradient.
ComplexTensor irdft_bwd(const ComplexTensor& g);

}  // namespace bfgrad::fourier_ops

namespace bfgrad::ops {

NodeId dft(Tape& t, NodeId z);
NodeId idft(Tape& t, NodeId z);
NodeId rdft(Tape& t, NodeId z);
NodeId irdft(Tape& t, NodeId z);

}  // namespace bfgrad::ops
