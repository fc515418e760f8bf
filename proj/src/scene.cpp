// SPDX-License-Identifier: Apache-2.0
#include "bfgrad/scene.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

#include "eigen_bridge.hpp"

namespace bfgrad::scene {

const char* mask_init_name(MaskInit init) {
  switch (init) {
    case MaskInit::kUniform: return "uniform";
    case MaskInit::kOracle: return "oracle";
    case MaskInit::kRandom: return "random";
  }
  return "unknown";
}

void validate_config(const ExperimentConfig& config) {
  if (config.channels < 1 || config.bins < 1 || config.frames < 1) {
    throw std::invalid_argument("config: channels, bins and frames must be >= 1");
  }
  if (!(config.mu > 0.0)) throw std::invalid_argument("config: mu must be positive");
  if (!(config.eps > 0.0)) throw std::invalid_argument("config: eps must be positive");
  if (config.tol < 0.0) throw std::invalid_argument("config: tol must be >= 0");
}

beamform::MaskedScene synth_scene(const ExperimentConfig& config) {
  validate_config(config);
  std::size_t F = config.bins, T = config.frames, D = config.channels;
  Rng rng(config.seed);

  beamform::MaskedScene scene;
  scene.bins = F;
  scene.frames = T;
  scene.channels = D;
  ComplexTensor clean = ComplexTensor::zeros({F, T, D});
  ComplexTensor noise = ComplexTensor::zeros({F, T, D});

  for (std::size_t f = 0; f < F; ++f) {
    ComplexTensor steering = rng.unit_vector(D);
    // Colored noise: spatial covariance G G^H + tr/20D * I, applied as its
    // Cholesky factor to white samples. The small floor keeps the coloring
    // strongly anisotropic, which is where the beamformers differ.
    EMatrix g(D, D);
    for (std::size_t i = 0; i < D; ++i)
      for (std::size_t j = 0; j < D; ++j) g(static_cast<Eigen::Index>(i),
                                            static_cast<Eigen::Index>(j)) = rng.cgaussian();
    EMatrix cov = g * g.adjoint();
    cov += (0.05 * cov.trace().real() / static_cast<double>(D)) * EMatrix::Identity(D, D);
    EMatrix chol = Eigen::LLT<EMatrix>(cov).matrixL();

    // Source activity gate: speech pauses make the oracle masks close to
    // binary. Keep at least one active and one inactive frame per bin.
    std::vector<bool> active(T);
    std::size_t active_count = 0;
    for (std::size_t t = 0; t < T; ++t) {
      active[t] = rng.uniform() < 0.5;
      if (active[t]) ++active_count;
    }
    if (active_count == 0) active[0] = true;
    if (active_count == T && T > 1) active[T - 1] = false;

    double bin_clean = 0.0, bin_noise = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      cdouble source = active[t] ? rng.cgaussian() : cdouble{0.0, 0.0};
      Eigen::VectorXcd white(D);
      for (std::size_t d = 0; d < D; ++d) white(static_cast<Eigen::Index>(d)) = rng.cgaussian();
      Eigen::VectorXcd colored = chol * white;
      for (std::size_t d = 0; d < D; ++d) {
        std::size_t idx = (f * T + t) * D + d;
        clean[idx] = steering[d] * source;
        noise[idx] = colored(static_cast<Eigen::Index>(d));
        bin_clean += std::norm(clean[idx]);
        bin_noise += std::norm(noise[idx]);
      }
    }
    // Equalize per-bin energies so every bin carries the target SNR. Without
    // this the unit-norm weight convention lets a few loud bins dominate the
    // summed output SNR.
    double cs = std::sqrt(static_cast<double>(T) / bin_clean);
    double ns = std::sqrt(static_cast<double>(T) / bin_noise);
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t d = 0; d < D; ++d) {
        std::size_t idx = (f * T + t) * D + d;
        clean[idx] *= cs;
        noise[idx] *= ns;
      }
    }
  }

  // Scale the noise so the input SNR matches the target exactly.
  double ex = 0.0, en = 0.0;
  for (const cdouble& v : clean.data()) ex += std::norm(v);
  for (const cdouble& v : noise.data()) en += std::norm(v);
  double alpha = std::sqrt(ex / en / std::pow(10.0, config.snr_in_db / 10.0));
  noise = scale(noise, alpha);

  ComplexTensor observed = add(clean, noise);
  std::size_t n = clean.size();
  ComplexTensor mask_x = ComplexTensor::zeros({F, T, D});
  ComplexTensor mask_n = ComplexTensor::zeros({F, T, D});
  for (std::size_t i = 0; i < n; ++i) {
    double px = std::norm(clean[i]);
    double pn = std::norm(noise[i]);
    double denom = px + pn;
    mask_x[i] = cdouble{denom > 0.0 ? px / denom : 0.5, 0.0};
    mask_n[i] = cdouble{denom > 0.0 ? pn / denom : 0.5, 0.0};
  }

  scene.clean = std::move(clean);
  scene.noise = std::move(noise);
  scene.observed = std::move(observed);
  scene.mask_x = std::move(mask_x);
  scene.mask_n = std::move(mask_n);
  beamform::validate_scene(scene);
  return scene;
}

}  // namespace bfgrad::scene
