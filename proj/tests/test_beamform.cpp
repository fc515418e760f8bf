// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "bfgrad/beamform.hpp"
#include "bfgrad/cli.hpp"
#include "bfgrad/gradcheck.hpp"
#include "bfgrad/linalg_ops.hpp"
#include "bfgrad/random.hpp"
#include "bfgrad/scalar_ops.hpp"
#include "bfgrad/scene.hpp"

using namespace bfgrad;
using namespace bfgrad::beamform;
using doctest::Approx;

namespace {

MaskedScene small_scene(std::uint64_t seed, std::size_t d, std::size_t f, std::size_t t,
                        double snr = 0.0) {
  scene::ExperimentConfig cfg;
  cfg.channels = d;
  cfg.bins = f;
  cfg.frames = t;
  cfg.snr_in_db = snr;
  cfg.seed = seed;
  return scene::synth_scene(cfg);
}

std::vector<gradcheck::LeafSpec> mask_leaves(const MaskedScene& sc) {
  std::vector<gradcheck::LeafSpec> leaves;
  for (std::size_t f = 0; f < sc.bins; ++f)
    leaves.push_back({bin_mask(sc.mask_x, sc.bins, sc.frames, sc.channels, f), true, false});
  for (std::size_t f = 0; f < sc.bins; ++f)
    leaves.push_back({bin_mask(sc.mask_n, sc.bins, sc.frames, sc.channels, f), true, false});
  return leaves;
}

gradcheck::PipelineFn make_pipeline(const MaskedScene& sc, BeamformerKind kind) {
  return [&sc, kind](Tape& t, const std::vector<NodeId>& ids) {
    std::vector<NodeId> mx(ids.begin(), ids.begin() + static_cast<long>(sc.bins));
    std::vector<NodeId> mn(ids.begin() + static_cast<long>(sc.bins), ids.end());
    std::vector<NodeId> ys;
    for (std::size_t f = 0; f < sc.bins; ++f)
      ys.push_back(t.constant(bin_matrix(sc.observed, sc.bins, sc.frames, sc.channels, f)));
    return build_snr_pipeline(t, sc, kind, mx, mn, ys,
                              default_psd_delta(sc.frames, sc.channels))
        .objective;
  };
}

}  // namespace

TEST_CASE("psd with a unit mask and one frame is the outer product") {
  Tape t;
  ComplexTensor y({2, 1}, {cdouble{1.0, 1.0}, cdouble{0.0, -2.0}});
  NodeId yn = t.constant(y);
  NodeId mask = t.constant(ComplexTensor({1, 2}, {cdouble{1.0, 0.0}, cdouble{1.0, 0.0}}));
  NodeId phi = psd_node(t, yn, mask);
  const ComplexTensor& v = t.value(phi);
  CHECK(std::abs(v.at(0, 0) - cdouble{2.0, 0.0}) < 1e-14);
  CHECK(std::abs(v.at(0, 1) - cdouble{1.0, 1.0} * std::conj(cdouble{0.0, -2.0})) < 1e-14);
  CHECK(std::abs(v.at(1, 1) - cdouble{4.0, 0.0}) < 1e-14);
}

TEST_CASE("psd is invariant to a constant mask scale") {
  Rng rng(70);
  ComplexTensor y = rng.tensor({2, 4});
  ComplexTensor mask = rng.real_tensor({4, 2}, 0.2, 0.9);
  ComplexTensor scaled = scale(mask, 0.37);
  Tape t;
  NodeId a = psd_node(t, t.constant(y), t.constant(mask));
  NodeId b = psd_node(t, t.constant(y), t.constant(scaled));
  CHECK(max_abs_diff(t.value(a), t.value(b)) < 1e-12);
}

TEST_CASE("psd node matches the direct summation and its mask gradient checks out") {
  Rng rng(71);
  ComplexTensor y = rng.tensor({2, 4});
  ComplexTensor mask = rng.real_tensor({4, 2}, 0.1, 1.0);
  Tape t;
  NodeId phi = psd_node(t, t.constant(y), t.constant(mask));
  CHECK(max_abs_diff(t.value(phi), estimate_psd_direct(y, mask)) < 1e-12);

  ComplexTensor u = rng.tensor({2, 2}, 0.1, 2.0);
  auto build = [&](Tape& tp, const std::vector<NodeId>& ids) {
    NodeId p = psd_node(tp, tp.constant(y), ids[0]);
    return ops::sum(tp, ops::re(tp, ops::mul(tp, tp.constant(u), p)));
  };
  auto report = gradcheck::check(build, {gradcheck::LeafSpec{mask, true, false}});
  CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("psd rejects an all-zero mask") {
  Tape t;
  NodeId y = t.constant(ComplexTensor({2, 3}, std::vector<cdouble>(6, cdouble{1.0, 0.0})));
  NodeId mask = t.constant(ComplexTensor::zeros({3, 2}));
  CHECK_THROWS_AS(psd_node(t, y, mask), std::domain_error);
}

TEST_CASE("condition_psd raises the smallest eigenvalue") {
  Tape t;
  // Rank-deficient: ones everywhere.
  ComplexTensor flat({2, 2}, std::vector<cdouble>(4, cdouble{1.0, 0.0}));
  NodeId phi = t.constant(flat);
  NodeId out = condition_psd_node(t, phi, 1e-6);
  linalg_ops::EigPair pair = linalg_ops::eig_fwd(t.value(out));
  CHECK(pair.values[1].real() > 0.0);
  // delta = 0 returns the same node, zero matrix stays zero.
  CHECK(condition_psd_node(t, phi, 0.0) == phi);
  NodeId zero = t.constant(ComplexTensor::zeros({2, 2}));
  NodeId still_zero = condition_psd_node(t, zero, 1e-6);
  CHECK(t.value(still_zero).max_abs() == 0.0);
}

TEST_CASE("mvdr with identity noise reduces to the principal eigenvector") {
  Rng rng(72);
  ComplexTensor m = rng.gaussian_tensor({3, 3});
  ComplexTensor phi_xx = ComplexTensor::identity(3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      cdouble acc{0.0, 0.0};
      for (std::size_t k = 0; k < 3; ++k) acc += m[i * 3 + k] * std::conj(m[j * 3 + k]);
      phi_xx[i * 3 + j] += acc;
    }
  for (std::size_t i = 0; i < 3; ++i) {
    phi_xx[i * 3 + i] = cdouble{phi_xx[i * 3 + i].real(), 0.0};
    for (std::size_t j = i + 1; j < 3; ++j) phi_xx[j * 3 + i] = std::conj(phi_xx[i * 3 + j]);
  }
  Tape t;
  NodeId w = mvdr_weight_node(t, t.constant(phi_xx), t.constant(ComplexTensor::identity(3)));
  linalg_ops::EigPair pair = linalg_ops::eig_fwd(phi_xx);
  ComplexTensor expected({3, 1}, {pair.vectors[0], pair.vectors[3], pair.vectors[6]});
  CHECK(max_abs_diff(t.value(w), expected) < 1e-9);
}

TEST_CASE("single-channel mvdr is distortionless") {
  Tape t;
  ComplexTensor phi_xx({1, 1}, {cdouble{2.5, 0.0}});
  ComplexTensor phi_nn({1, 1}, {cdouble{0.7, 0.0}});
  NodeId w = mvdr_weight_node(t, t.constant(phi_xx), t.constant(phi_nn));
  // w^H d = 1 for the 1x1 steering d = 1.
  CHECK(std::abs(std::conj(t.value(w)[0]) - cdouble{1.0, 0.0}) < 1e-12);
}

TEST_CASE("mvdr satisfies the distortionless constraint on rank-1 speech") {
  Rng rng(73);
  ComplexTensor d = rng.unit_vector(3);
  ComplexTensor phi_xx = ComplexTensor::zeros({3, 3});
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) phi_xx[i * 3 + j] = d[i] * std::conj(d[j]) * 4.0;
  ComplexTensor noise = ComplexTensor::identity(3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      ComplexTensor g = rng.gaussian_tensor({3, 3});
      (void)g;
    }
  Tape t;
  NodeId w = mvdr_weight_node(t, t.constant(phi_xx), t.constant(scale(noise, 0.5)));
  cdouble gain{0.0, 0.0};
  for (std::size_t i = 0; i < 3; ++i) gain += std::conj(t.value(w)[i]) * d[i];
  // Unit gain toward the steering direction up to the eigenvector phase.
  CHECK(std::abs(gain) == Approx(1.0).epsilon(1e-9));
}

TEST_CASE("gev with identity noise is the phase-fixed principal eigenvector") {
  Rng rng(74);
  ComplexTensor m = rng.gaussian_tensor({2, 2});
  ComplexTensor phi_xx = ComplexTensor::identity(2);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      cdouble acc{0.0, 0.0};
      for (std::size_t k = 0; k < 2; ++k) acc += m[i * 2 + k] * std::conj(m[j * 2 + k]);
      phi_xx[i * 2 + j] += acc;
    }
  for (std::size_t i = 0; i < 2; ++i) {
    phi_xx[i * 2 + i] = cdouble{phi_xx[i * 2 + i].real(), 0.0};
    phi_xx[1 * 2 + 0] = std::conj(phi_xx[0 * 2 + 1]);
  }
  Tape t;
  NodeId w = gev_weight_node_eig(t, t.constant(phi_xx), t.constant(ComplexTensor::identity(2)));
  linalg_ops::EigPair pair = linalg_ops::eig_fwd(phi_xx);
  ComplexTensor pca({2, 1}, {pair.vectors[0], pair.vectors[2]});
  cdouble phase = std::conj(pca[0] / std::abs(pca[0]));
  CHECK(std::abs(t.value(w)[0] - pca[0] * phase) < 1e-10);
  CHECK(std::abs(t.value(w)[1] - pca[1] * phase) < 1e-10);
  CHECK(t.value(w)[0].imag() == Approx(0.0).epsilon(1e-12));
}

TEST_CASE("identical speech and noise PSDs are rejected as degenerate") {
  Rng rng(75);
  ComplexTensor m = rng.gaussian_tensor({2, 2});
  ComplexTensor phi = ComplexTensor::identity(2);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j) {
      cdouble acc{0.0, 0.0};
      for (std::size_t k = 0; k < 2; ++k) acc += m[i * 2 + k] * std::conj(m[j * 2 + k]);
      phi[i * 2 + j] += acc;
    }
  phi[2] = std::conj(phi[1]);
  for (std::size_t i = 0; i < 2; ++i) phi[i * 2 + i] = cdouble{phi[i * 2 + i].real(), 0.0};
  Tape t;
  NodeId a = t.constant(phi);
  CHECK_THROWS_AS(gev_weight_node_eig(t, a, a), std::domain_error);
}

TEST_CASE("both gev routes agree on weights and gradients") {
  for (std::size_t d : {2ul, 3ul}) {
    MaskedScene sc = small_scene(200 + d, d, 2, 6);
    std::vector<gradcheck::LeafSpec> leaves = mask_leaves(sc);

    auto run = [&](BeamformerKind kind) {
      Tape t;
      std::vector<NodeId> ids;
      for (const auto& leaf : leaves) ids.push_back(t.input(leaf.value, true));
      std::vector<NodeId> mx(ids.begin(), ids.begin() + static_cast<long>(sc.bins));
      std::vector<NodeId> mn(ids.begin() + static_cast<long>(sc.bins), ids.end());
      std::vector<NodeId> ys;
      for (std::size_t f = 0; f < sc.bins; ++f)
        ys.push_back(t.input(bin_matrix(sc.observed, sc.bins, sc.frames, sc.channels, f)));
      PipelineNodes nodes = build_snr_pipeline(t, sc, kind, mx, mn, ys,
                                               default_psd_delta(sc.frames, sc.channels));
      GradientMap g = t.backward(nodes.objective);
      struct Out {
        std::vector<ComplexTensor> weights, mask_grads, y_grads;
      } out;
      for (NodeId w : nodes.weights) out.weights.push_back(t.value(w));
      for (NodeId id : ids) out.mask_grads.push_back(g.at(id));
      for (NodeId y : ys) out.y_grads.push_back(g.at(y));
      return out;
    };

    auto eig_route = run(BeamformerKind::kGev);
    auto whitening_route = run(BeamformerKind::kGevWhitening);
    for (std::size_t f = 0; f < sc.bins; ++f) {
      CHECK(max_abs_diff(eig_route.weights[f], whitening_route.weights[f]) < 1e-8);
    }
    for (std::size_t i = 0; i < eig_route.mask_grads.size(); ++i) {
      double ref = std::max(eig_route.mask_grads[i].max_abs(), 1e-12);
      CHECK(max_abs_diff(eig_route.mask_grads[i], whitening_route.mask_grads[i]) < 1e-6 * ref);
    }
    for (std::size_t i = 0; i < eig_route.y_grads.size(); ++i) {
      double ref = std::max(eig_route.y_grads[i].max_abs(), 1e-12);
      CHECK(max_abs_diff(eig_route.y_grads[i], whitening_route.y_grads[i]) < 1e-6 * ref);
    }
  }
}

TEST_CASE("white noise makes both gev routes identical by construction") {
  // With a scalar noise PSD the whitening step is a scale; weights match the
  // plain route to solver precision.
  MaskedScene sc = small_scene(33, 2, 2, 8);
  for (std::size_t i = 0; i < sc.mask_n.size(); ++i) sc.mask_n[i] = cdouble{1.0, 0.0};
  ComplexTensor noise_flat = ComplexTensor::zeros({sc.bins, sc.frames, sc.channels});
  Rng rng(34);
  for (std::size_t i = 0; i < noise_flat.size(); ++i) noise_flat[i] = rng.cgaussian();
  sc.noise = noise_flat;
  sc.observed = add(sc.clean, sc.noise);

  Tape t;
  std::vector<NodeId> mx, mn, ys;
  for (std::size_t f = 0; f < sc.bins; ++f) {
    mx.push_back(t.constant(bin_mask(sc.mask_x, sc.bins, sc.frames, sc.channels, f)));
    mn.push_back(t.constant(bin_mask(sc.mask_n, sc.bins, sc.frames, sc.channels, f)));
    ys.push_back(t.constant(bin_matrix(sc.observed, sc.bins, sc.frames, sc.channels, f)));
  }
  PipelineNodes a = build_snr_pipeline(t, sc, BeamformerKind::kGev, mx, mn, ys, 1e-10);
  PipelineNodes b = build_snr_pipeline(t, sc, BeamformerKind::kGevWhitening, mx, mn, ys, 1e-10);
  for (std::size_t f = 0; f < sc.bins; ++f) {
    CHECK(max_abs_diff(t.value(a.weights[f]), t.value(b.weights[f])) < 1e-8);
  }
}

TEST_CASE("apply_beamformer") {
  Tape t;
  ComplexTensor s({2, 3}, {cdouble{1.0, 0.0}, cdouble{2.0, 0.0}, cdouble{3.0, 0.0},
                           cdouble{4.0, 0.0}, cdouble{5.0, 0.0}, cdouble{6.0, 0.0}});
  NodeId e1 = t.constant(ComplexTensor({2, 1}, {cdouble{1.0, 0.0}, cdouble{0.0, 0.0}}));
  NodeId out = apply_beamformer_node(t, e1, t.constant(s));
  CHECK(t.value(out).rows() == 1);
  for (std::size_t k = 0; k < 3; ++k) CHECK(t.value(out)[k] == s[k]);  // channel-1 passthrough

  NodeId zero = t.constant(ComplexTensor::zeros({2, 1}));
  NodeId silent = apply_beamformer_node(t, zero, t.constant(s));
  CHECK(t.value(silent).max_abs() == 0.0);
}

TEST_CASE("snr objective negates when clean and noise swap") {
  MaskedScene sc = small_scene(35, 2, 2, 6);
  auto objective = [&](const ComplexTensor& clean, const ComplexTensor& noise) {
    Tape t;
    std::vector<NodeId> weights;
    Rng rng(36);
    for (std::size_t f = 0; f < sc.bins; ++f) weights.push_back(t.constant(rng.unit_vector(2)));
    std::vector<ComplexTensor> xn = normalize_bins(clean, sc.bins, sc.frames, sc.channels);
    std::vector<ComplexTensor> nn = normalize_bins(noise, sc.bins, sc.frames, sc.channels);
    return t.value(snr_objective_node(t, weights, xn, nn))[0].real();
  };
  double forward = objective(sc.clean, sc.noise);
  double swapped = objective(sc.noise, sc.clean);
  CHECK(forward == Approx(-swapped).epsilon(1e-10));

  // Pre-normalization scaling of the clean signal cancels.
  double scaled = objective(scale(sc.clean, 3.7), sc.noise);
  CHECK(forward == Approx(scaled).epsilon(1e-10));
}

TEST_CASE("snr objective gradient w.r.t. the weights matches the oracle") {
  MaskedScene sc = small_scene(37, 2, 2, 6);
  std::vector<ComplexTensor> xn = normalize_bins(sc.clean, sc.bins, sc.frames, sc.channels);
  std::vector<ComplexTensor> nn = normalize_bins(sc.noise, sc.bins, sc.frames, sc.channels);
  Rng rng(38);
  std::vector<gradcheck::LeafSpec> leaves;
  for (std::size_t f = 0; f < sc.bins; ++f) leaves.push_back({rng.unit_vector(2), false, false});
  auto build = [&](Tape& t, const std::vector<NodeId>& ids) {
    return snr_objective_node(t, ids, xn, nn);
  };
  auto report = gradcheck::check(build, leaves);
  CHECK(report.max_rel_err < 1e-6);
}

TEST_CASE("snr metrics") {
  MaskedScene sc = small_scene(39, 2, 2, 5);
  SUBCASE("equal signals give 0 dB") {
    MaskedScene same = sc;
    same.noise = same.clean;
    same.observed = add(same.clean, same.noise);
    CHECK(snr_in_db(same) == Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("channel-1 weights reproduce the first-channel ratio") {
    std::vector<ComplexTensor> e1(sc.bins,
                                  ComplexTensor({2, 1}, {cdouble{1.0, 0.0}, cdouble{0.0, 0.0}}));
    double out = snr_out_db(sc, e1);
    double sx = 0.0, sn = 0.0;
    for (std::size_t f = 0; f < sc.bins; ++f)
      for (std::size_t t = 0; t < sc.frames; ++t) {
        sx += std::norm(sc.clean[(f * sc.frames + t) * 2]);
        sn += std::norm(sc.noise[(f * sc.frames + t) * 2]);
      }
    CHECK(out == Approx(10.0 * std::log10(sx / sn)).epsilon(1e-12));
  }
  SUBCASE("oracle-mask gev beats the input SNR") {
    double out = snr_out_db(sc, compute_weights(sc, BeamformerKind::kGev));
    CHECK(out > snr_in_db(sc));
  }
}

TEST_CASE("gev weights beat 200 random unit weight sets") {
  MaskedScene sc = small_scene(40, 3, 4, 24, -10.0);
  double gev = snr_out_db(sc, compute_weights(sc, BeamformerKind::kGev));
  Rng rng(41);
  double best = -1e18;
  for (int k = 0; k < 200; ++k) {
    std::vector<ComplexTensor> ws;
    for (std::size_t f = 0; f < sc.bins; ++f) ws.push_back(rng.unit_vector(sc.channels));
    best = std::max(best, snr_out_db(sc, ws));
  }
  CHECK(gev >= best - 1e-9);
}

TEST_CASE("mask scale invariance propagates to weights and objective") {
  MaskedScene sc = small_scene(42, 2, 2, 6);
  auto run = [&](double mask_scale) {
    Tape t;
    std::vector<NodeId> mx, mn, ys;
    for (std::size_t f = 0; f < sc.bins; ++f) {
      mx.push_back(
          t.constant(scale(bin_mask(sc.mask_x, sc.bins, sc.frames, sc.channels, f), mask_scale)));
      mn.push_back(
          t.constant(scale(bin_mask(sc.mask_n, sc.bins, sc.frames, sc.channels, f), mask_scale)));
      ys.push_back(t.constant(bin_matrix(sc.observed, sc.bins, sc.frames, sc.channels, f)));
    }
    PipelineNodes nodes = build_snr_pipeline(t, sc, BeamformerKind::kGev, mx, mn, ys, 1e-10);
    std::pair<ComplexTensor, double> out{t.value(nodes.weights[0]),
                                         t.value(nodes.objective)[0].real()};
    return out;
  };
  auto [w1, j1] = run(1.0);
  auto [w2, j2] = run(0.25);
  CHECK(max_abs_diff(w1, w2) < 1e-10);
  CHECK(j1 == Approx(j2).epsilon(1e-10));
}

TEST_CASE("full gev pipeline gradcheck across scene sizes") {
  for (std::size_t bins : {1ul, 2ul}) {
    for (std::size_t frames : {4ul, 8ul}) {
      MaskedScene sc = small_scene(300 + bins * 10 + frames, 2, bins, frames);
      auto report = gradcheck::check(make_pipeline(sc, BeamformerKind::kGev), mask_leaves(sc),
                                     1e-6, 1e-4);
      CHECK(report.pass);
    }
  }
}

TEST_CASE("mvdr pipeline is differentiable end to end") {
  MaskedScene sc = small_scene(43, 2, 2, 8);
  auto report =
      gradcheck::check(make_pipeline(sc, BeamformerKind::kMvdr), mask_leaves(sc), 1e-6, 1e-4);
  CHECK(report.pass);
}

TEST_CASE("fifty descent steps on sigmoid masks strictly decrease the objective") {
  scene::ExperimentConfig cfg;
  cfg.channels = 2;
  cfg.bins = 4;
  cfg.frames = 16;
  cfg.seed = 44;
  cfg.iterations = 50;
  cfg.init = scene::MaskInit::kUniform;
  cli::OptimizeResult result = cli::run_optimize(cfg);
  REQUIRE_FALSE(result.diverged);
  REQUIRE(result.rows.size() == 51);
  int non_monotone = 0;
  for (std::size_t k = 1; k < result.rows.size(); ++k) {
    if (result.rows[k].j >= result.rows[k - 1].j) ++non_monotone;
  }
  CHECK(non_monotone <= 2);
  CHECK(result.rows.back().j < result.rows.front().j);
}

TEST_CASE("scene validation catches broken scenes") {
  MaskedScene sc = small_scene(45, 2, 2, 4);
  CHECK_NOTHROW(validate_scene(sc));
  MaskedScene broken = sc;
  broken.observed[0] += cdouble{1.0, 0.0};
  CHECK_THROWS_AS(validate_scene(broken), std::invalid_argument);
  MaskedScene bad_mask = sc;
  bad_mask.mask_x[0] = cdouble{1.5, 0.0};
  CHECK_THROWS_AS(validate_scene(bad_mask), std::invalid_argument);
}
