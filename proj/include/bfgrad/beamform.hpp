// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "bfgrad/tape.hpp"
#include "bfgrad/tensor.hpp"

namespace bfgrad::beamform {

/// Multichannel STFT-domain scene: clean speech X, noise N, observation
/// Y = X + N, all [F, T, D], plus speech/noise masks in [0, 1].
struct MaskedScene {
  std::size_t bins = 0;      // F
  std::size_t frames = 0;    // T
  std::size_t channels = 0;  // D
  ComplexTensor clean;
  ComplexTensor noise;
  ComplexTensor observed;
  ComplexTensor mask_x;
  ComplexTensor mask_n;
};

// Throws unless Y = X + N holds to 1e-12 and masks stay within [0, 1].
void validate_scene(const MaskedScene& scene);

// Slices of the [F,T,D] layout: per-bin channel-by-frame matrix and
// frame-by-channel mask.
ComplexTensor bin_matrix(const ComplexTensor& t, std::size_t bins, std::size_t frames,
                         std::size_t channels, std::size_t f);
ComplexTensor bin_mask(const ComplexTensor& m, std::size_t bins, std::size_t frames,
                       std::size_t channels, std::size_t f);
// Writes a [T,D] mask slice back into the full [F,T,D] tensor.
void set_bin_mask(ComplexTensor& full, std::size_t bins, std::size_t frames,
                  std::size_t channels, std::size_t f, const ComplexTensor& slice);

enum class BeamformerKind { kMvdr, kGev, kGevWhitening };
const char* beamformer_name(BeamformerKind kind);

// --- On-tape pipeline pieces -------------------------------------------

// Mask-weighted power spectral density: sum_t (sum_d M_td) y_t y_t^H over
// the mask total. y is [D,T], mask is [T,D].
NodeId psd_node(Tape& t, NodeId y, NodeId mask);

// phi + delta * trace(phi)/D * I. delta = 0 returns phi unchanged.
NodeId condition_psd_node(Tape& t, NodeId phi, double delta);

NodeId mvdr_weight_node(Tape& t, NodeId phi_xx, NodeId phi_nn);
NodeId gev_weight_node_eig(Tape& t, NodeId phi_xx, NodeId phi_nn);
// Whitening route: cholesky of the noise PSD, whiten the observation,
// hermitian eigenproblem, transform back.
NodeId gev_weight_node_whitening(Tape& t, NodeId phi_nn, NodeId y, NodeId mask_x);

// w^H S for w [D,1] and S [D,T]; returns [1,T].
NodeId apply_beamformer_node(Tape& t, NodeId w, NodeId s);

// Negative dB SNR of the beamformer output on per-bin unit-energy
// normalized clean/noise signals. x_norm / n_norm are per-bin [D,T]
// constants produced by normalize_bins().
NodeId snr_objective_node(Tape& t, const std::vector<NodeId>& weights,
                          const std::vector<ComplexTensor>& x_norm,
                          const std::vector<ComplexTensor>& n_norm);

// Per-bin unit-total-energy normalization of a [F,T,D] signal, returned as
// per-bin [D,T] matrices. Throws on a zero-energy bin.
std::vector<ComplexTensor> normalize_bins(const ComplexTensor& signal, std::size_t bins,
                                          std::size_t frames, std::size_t channels);

struct PipelineNodes {
  std::vector<NodeId> weights;  // per-bin [D,1]
  NodeId objective = 0;
};

// Full differentiable chain from per-bin mask and observation nodes to the
// SNR objective. delta conditions the noise PSD only.
PipelineNodes build_snr_pipeline(Tape& t, const MaskedScene& scene, BeamformerKind kind,
                                 const std::vector<NodeId>& mask_x_nodes,
                                 const std::vector<NodeId>& mask_n_nodes,
                                 const std::vector<NodeId>& y_nodes, double delta);

// Recommended noise-PSD conditioning for the scene size.
double default_psd_delta(std::size_t frames, std::size_t channels);

// --- Direct (off-tape) evaluation ---------------------------------------

ComplexTensor estimate_psd_direct(const ComplexTensor& y, const ComplexTensor& mask);

double snr_in_db(const MaskedScene& scene);
// weights: per-bin [D,1] tensors.
double snr_out_db(const MaskedScene& scene, const std::vector<ComplexTensor>& weights);

// Convenience: beamformer weights for a scene with its stored masks,
// computed on a throwaway tape.
std::vector<ComplexTensor> compute_weights(const MaskedScene& scene, BeamformerKind kind);

}  // namespace bfgrad::beamform
