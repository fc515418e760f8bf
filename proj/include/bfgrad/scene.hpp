// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "bfgrad/beamform.hpp"
#include "bfgrad/random.hpp"

namespace bfgrad::scene {

enum class MaskInit { kUniform, kOracle, kRandom };
const char* mask_init_name(MaskInit init);

struct ExperimentConfig {
  std::size_t channels = 2;
  std::size_t bins = 8;
  std::size_t frames = 32;
  double snr_in_db = 0.0;
  std::uint64_t seed = 1;
  double mu = 0.7;
  std::size_t iterations = 50;
  beamform::BeamformerKind beamformer = beamform::BeamformerKind::kGev;
  MaskInit init = MaskInit::kUniform;
  double eps = 1e-6;
  double tol = 1e-5;
  std::string out_dir;
  bool inject_sign_flip = false;  // gradcheck regression canary
};

void validate_config(const ExperimentConfig& config);

// Synthetic desk-scale scene: one random unit steering vector per bin with a
// random source spectrum, colored gaussian noise from a random hermitian-PD
// spatial covariance, noise scaled to hit the target input SNR, and oracle
// masks |X|^2 / (|X|^2 + |N|^2).
beamform::MaskedScene synth_scene(const ExperimentConfig& config);

}  // namespace bfgrad::scene
