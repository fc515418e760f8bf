// SPDX-License-Identifier: Apache-2.0
#include "bfgrad/cli.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <stdexcept>

#include "bfgrad/fourier_ops.hpp"
#include "bfgrad/gradcheck.hpp"
#include "bfgrad/linalg_ops.hpp"
#include "bfgrad/random.hpp"
#include "bfgrad/scalar_ops.hpp"

namespace bfgrad::cli {

namespace {

using gradcheck::CheckReport;
using gradcheck::LeafSpec;

// Real functional of an arbitrary tape node: sum Re{u o s} + sum Im{v o s}
// for fixed random constants, so the cotangent reaching s is a generic
// complex tensor.
NodeId weighted_functional(Tape& t, NodeId s, const ComplexTensor& u, const ComplexTensor& v) {
  NodeId a = ops::sum(t, ops::re(t, ops::mul(t, t.constant(u), s)));
  NodeId b = ops::sum(t, ops::im(t, ops::mul(t, t.constant(v), s)));
  return ops::add(t, a, b);
}

struct OpCheck {
  std::string name;
  // Generates fresh inputs and runs one oracle comparison.
  std::function<CheckReport(Rng&, double eps, double tol)> once;
  // Tolerance override (near-degenerate eig relaxes to 1e-4).
  double tol_scale = 1.0;
};

CheckReport run_unary(Rng& rng, double eps, double tol, OpKind kind,
                      const std::function<NodeId(Tape&, NodeId)>& builder,
                      bool real_leaf = false) {
  (void)kind;
  std::vector<std::size_t> shape{5};
  LeafSpec leaf;
  leaf.value = real_leaf ? rng.real_tensor(shape, 0.1, 10.0) : rng.tensor(shape);
  leaf.real_constrained = real_leaf;
  Tape probe;
  NodeId probe_out = builder(probe, probe.input(leaf.value, real_leaf));
  ComplexTensor u = rng.tensor(probe.value(probe_out).shape(), 0.1, 2.0);
  ComplexTensor v = rng.tensor(probe.value(probe_out).shape(), 0.1, 2.0);
  auto build = [&](Tape& t, const std::vector<NodeId>& ids) {
    return weighted_functional(t, builder(t, ids[0]), u, v);
  };
  return gradcheck::check(build, {leaf}, eps, tol);
}

CheckReport run_binary(Rng& rng, double eps, double tol,
                       const std::function<NodeId(Tape&, NodeId, NodeId)>& builder,
                       std::vector<std::size_t> shape1, std::vector<std::size_t> shape2) {
  LeafSpec a{rng.tensor(shape1), false, false};
  LeafSpec b{rng.tensor(shape2), false, false};
  Tape probe;
  NodeId probe_out =
      builder(probe, probe.input(a.value), probe.input(b.value));
  ComplexTensor u = rng.tensor(probe.value(probe_out).shape(), 0.1, 2.0);
  ComplexTensor v = rng.tensor(probe.value(probe_out).shape(), 0.1, 2.0);
  auto build = [&](Tape& t, const std::vector<NodeId>& ids) {
    return weighted_functional(t, builder(t, ids[0], ids[1]), u, v);
  };
  return gradcheck::check(build, {a, b}, eps, tol);
}

// Well-conditioned random square matrix: random entries plus a scaled
// identity shift.
ComplexTensor conditioned_matrix(Rng& rng, std::size_t d) {
  ComplexTensor m = rng.tensor({d, d}, 0.1, 2.0);
  double shift = 3.0 * m.max_abs();
  for (std::size_t i = 0; i < d; ++i) m[i * d + i] += shift;
  return m;
}

ComplexTensor hermitian_pd_matrix(Rng& rng, std::size_t d) {
  ComplexTensor m = rng.gaussian_tensor({d, d});
  ComplexTensor out = ComplexTensor::identity(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      cdouble acc{0.0, 0.0};
      for (std::size_t k = 0; k < d; ++k) acc += m[i * d + k] * std::conj(m[j * d + k]);
      out[i * d + j] += acc;
    }
  // Exact hermitian symmetry at the representation level.
  for (std::size_t i = 0; i < d; ++i) {
    out[i * d + i] = cdouble{out[i * d + i].real(), 0.0};
    for (std::size_t j = i + 1; j < d; ++j) out[j * d + i] = std::conj(out[i * d + j]);
  }
  return out;
}

// General matrix with a comfortably separated spectrum and usable first
// eigenvector rows for phase normalization.
ComplexTensor separated_eig_matrix(Rng& rng, std::size_t d) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    ComplexTensor m = scale(rng.gaussian_tensor({d, d}), 2.0);
    try {
      linalg_ops::EigPair pair = linalg_ops::eig_fwd(m);
      double max_abs = pair.values.max_abs();
      double min_gap = 1e300;
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j)
          min_gap = std::min(min_gap, std::abs(pair.values[i] - pair.values[j]));
      bool rows_ok = true;
      for (std::size_t k = 0; k < d; ++k)
        rows_ok = rows_ok && std::abs(pair.vectors[k]) > 0.05;  // first row entries
      if (min_gap > 0.2 * max_abs && rows_ok) return m;
    } catch (const std::domain_error&) {
    }
  }
  throw std::runtime_error("separated_eig_matrix: rejection sampling failed");
}

// Matrix with a controlled small eigenvalue gap, via V diag(lambda) V^-1.
ComplexTensor near_degenerate_matrix(Rng& rng, std::size_t d, double gap) {
  using namespace linalg_ops;
  for (int attempt = 0; attempt < 100; ++attempt) {
    ComplexTensor v = rng.tensor({d, d}, 0.5, 1.5);
    if (condition_estimate(v) > 50.0) continue;
    std::vector<cdouble> lam(d);
    for (std::size_t i = 0; i < d; ++i) lam[i] = rng.annulus(1.0, 2.0);
    lam[1] = lam[0] + gap * rng.annulus(0.9, 1.1);
    ComplexTensor diag = ComplexTensor::zeros({d, d});
    for (std::size_t i = 0; i < d; ++i) diag[i * d + i] = lam[i];
    ComplexTensor m = matmul_fwd(matmul_fwd(v, diag), inv_fwd(v));
    try {
      EigPair pair = eig_fwd(m);
      bool rows_ok = true;
      for (std::size_t k = 0; k < d; ++k) rows_ok = rows_ok && std::abs(pair.vectors[k]) > 0.05;
      if (rows_ok) return m;
    } catch (const std::domain_error&) {
    }
  }
  throw std::runtime_error("near_degenerate_matrix: rejection sampling failed");
}

NodeId eig_objective(Tape& t, NodeId phi, const std::vector<ComplexTensor>& us,
                     const std::vector<ComplexTensor>& vs) {
  ops::EigNodes pair = ops::eig(t, phi);
  NodeId j = weighted_functional(t, pair.values, us[0], vs[0]);
  std::size_t d = t.value(pair.values).size();
  for (std::size_t k = 0; k < d; ++k) {
    NodeId col = ops::phase_normalize(t, ops::column(t, pair.vectors, k));
    j = ops::add(t, j, weighted_functional(t, col, us[k + 1], vs[k + 1]));
  }
  return j;
}

CheckReport run_eig_check(Rng& rng, double eps, double tol, bool near_degenerate) {
  std::size_t d = 3;
  ComplexTensor phi =
      near_degenerate ? near_degenerate_matrix(rng, d, 5e-3) : separated_eig_matrix(rng, d);
  std::vector<ComplexTensor> us, vs;
  us.push_back(rng.tensor({d}, 0.1, 2.0));
  vs.push_back(rng.tensor({d}, 0.1, 2.0));
  for (std::size_t k = 0; k < d; ++k) {
    us.push_back(rng.tensor({d, 1}, 0.1, 2.0));
    vs.push_back(rng.tensor({d, 1}, 0.1, 2.0));
  }
  auto build = [&](Tape& t, const std::vector<NodeId>& ids) {
    return eig_objective(t, ids[0], us, vs);
  };
  return gradcheck::check(build, {LeafSpec{phi, false, false}}, eps, tol);
}

// D=2, F=3, T=5 GEV pipeline objective against mask leaves.
CheckReport run_pipeline_check(std::uint64_t seed, double eps, double tol) {
  ExperimentConfig cfg;
  cfg.channels = 2;
  cfg.bins = 3;
  cfg.frames = 5;
  cfg.seed = seed;
  beamform::MaskedScene sc = scene::synth_scene(cfg);
  std::vector<LeafSpec> leaves;
  for (std::size_t f = 0; f < sc.bins; ++f) {
    leaves.push_back(
        {beamform::bin_mask(sc.mask_x, sc.bins, sc.frames, sc.channels, f), true, false});
  }
  for (std::size_t f = 0; f < sc.bins; ++f) {
    leaves.push_back(
        {beamform::bin_mask(sc.mask_n, sc.bins, sc.frames, sc.channels, f), true, false});
  }
  auto build = [&](Tape& t, const std::vector<NodeId>& ids) {
    std::vector<NodeId> mx(ids.begin(), ids.begin() + static_cast<long>(sc.bins));
    std::vector<NodeId> mn(ids.begin() + static_cast<long>(sc.bins), ids.end());
    std::vector<NodeId> ys;
    for (std::size_t f = 0; f < sc.bins; ++f) {
      ys.push_back(t.constant(beamform::bin_matrix(sc.observed, sc.bins, sc.frames,
                                                   sc.channels, f)));
    }
    return beamform::build_snr_pipeline(t, sc, beamform::BeamformerKind::kGev, mx, mn, ys,
                                        beamform::default_psd_delta(sc.frames, sc.channels))
        .objective;
  };
  return gradcheck::check(build, leaves, eps, tol);
}

double flipped_max_rel_err(const CheckReport& report) {
  double worst = 0.0;
  for (const auto& e : report.elements) {
    worst = std::max(worst, gradcheck::relative_error(-e.analytic, e.numeric));
  }
  return worst;
}

std::vector<OpCheck> op_checks() {
  std::vector<OpCheck> checks;
  auto unary = [](std::string name, std::function<NodeId(Tape&, NodeId)> b, bool real_leaf = false) {
    return OpCheck{std::move(name), [b, real_leaf](Rng& rng, double eps, double tol) {
                     return run_unary(rng, eps, tol, OpKind::kIdentity, b, real_leaf);
                   }};
  };
  checks.push_back(unary("identity", [](Tape& t, NodeId z) { return ops::identity(t, z); }));
  checks.push_back(unary("conj", [](Tape& t, NodeId z) { return ops::conj(t, z); }));
  checks.push_back(unary("neg", [](Tape& t, NodeId z) { return ops::neg(t, z); }));
  checks.push_back({"add", [](Rng& rng, double eps, double tol) {
                      return run_binary(rng, eps, tol,
                                        [](Tape& t, NodeId a, NodeId b) { return ops::add(t, a, b); },
                                        {5}, {5});
                    }});
  checks.push_back({"mul", [](Rng& rng, double eps, double tol) {
                      return run_binary(rng, eps, tol,
                                        [](Tape& t, NodeId a, NodeId b) { return ops::mul(t, a, b); },
                                        {5}, {5});
                    }});
  checks.push_back({"pow", [](Rng& rng, double eps, double tol) {
                      static const std::int64_t exponents[] = {2, 3, -1, -2, 1, 4};
                      std::int64_t n = exponents[rng.engine()() % 6];
                      // One element per check: |z|^n spans ~8 decades over the
                      // annulus, and mixing magnitudes in one tensor drowns the
                      // small-gradient elements in finite-difference noise.
                      LeafSpec leaf{rng.tensor({1}), false, false};
                      ComplexTensor u = rng.tensor({1}, 0.1, 2.0);
                      ComplexTensor v = rng.tensor({1}, 0.1, 2.0);
                      auto build = [&](Tape& t, const std::vector<NodeId>& ids) {
                        return weighted_functional(t, ops::pow(t, ids[0], n), u, v);
                      };
                      return gradcheck::check(build, {leaf}, eps, tol);
                    }});
  checks.push_back({"div", [](Rng& rng, double eps, double tol) {
                      return run_binary(rng, eps, tol,
                                        [](Tape& t, NodeId a, NodeId b) { return ops::div(t, a, b); },
                                        {5}, {5});
                    }});
  checks.push_back(unary("abs", [](Tape& t, NodeId z) { return ops::abs(t, z); }));
  checks.push_back(
      unary("phase_factor", [](Tape& t, NodeId z) { return ops::phase_factor(t, z); }));
  checks.push_back(unary("re", [](Tape& t, NodeId z) { return ops::re(t, z); }));
  checks.push_back(unary("im", [](Tape& t, NodeId z) { return ops::im(t, z); }));

  auto sized_unary = [](std::string name, std::function<NodeId(Tape&, NodeId)> b,
                        std::vector<std::size_t> shape, bool real_leaf) {
    return OpCheck{std::move(name), [b, shape, real_leaf](Rng& rng, double eps, double tol) {
                     LeafSpec leaf;
                     leaf.value = real_leaf ? rng.real_tensor(shape, -3.0, 3.0) : rng.tensor(shape);
                     leaf.real_constrained = real_leaf;
                     Tape probe;
                     NodeId out = b(probe, probe.input(leaf.value, real_leaf));
                     ComplexTensor u = rng.tensor(probe.value(out).shape(), 0.1, 2.0);
                     ComplexTensor v = rng.tensor(probe.value(out).shape(), 0.1, 2.0);
                     auto build = [&](Tape& t, const std::vector<NodeId>& ids) {
                       return weighted_functional(t, b(t, ids[0]), u, v);
                     };
                     return gradcheck::check(build, {leaf}, eps, tol);
                   }};
  };
  checks.push_back(sized_unary("dft", [](Tape& t, NodeId z) { return ops::dft(t, z); }, {8}, false));
  checks.push_back(
      sized_unary("idft", [](Tape& t, NodeId z) { return ops::idft(t, z); }, {8}, false));
  checks.push_back(
      sized_unary("rdft", [](Tape& t, NodeId z) { return ops::rdft(t, z); }, {8}, true));
  checks.push_back(
      sized_unary("irdft", [](Tape& t, NodeId z) { return ops::irdft(t, z); }, {5}, false));

  checks.push_back(sized_unary(
      "normalize_vec", [](Tape& t, NodeId z) { return ops::normalize_vec(t, z); }, {4}, false));
  checks.push_back({"matmul", [](Rng& rng, double eps, double tol) {
                      return run_binary(rng, eps, tol,
                                        [](Tape& t, NodeId a, NodeId b) {
                                          return ops::matmul(t, a, b);
                                        },
                                        {2, 3}, {3, 4});
                    }});
  checks.push_back({"inv", [](Rng& rng, double eps, double tol) {
                      LeafSpec leaf{conditioned_matrix(rng, 3), false, false};
                      ComplexTensor u = rng.tensor({3, 3}, 0.1, 2.0);
                      ComplexTensor v = rng.tensor({3, 3}, 0.1, 2.0);
                      auto build = [&](Tape& t, const std::vector<NodeId>& ids) {
                        return weighted_functional(t, ops::inv(t, ids[0]), u, v);
                      };
                      return gradcheck::check(build, {leaf}, eps, tol);
                    }});
  checks.push_back({"solve_left", [](Rng& rng, double eps, double tol) {
                      LeafSpec a{conditioned_matrix(rng, 3), false, false};
                      LeafSpec b{rng.tensor({3, 2}), false, false};
                      ComplexTensor u = rng.tensor({3, 2}, 0.1, 2.0);
                      ComplexTensor v = rng.tensor({3, 2}, 0.1, 2.0);
                      auto build = [&](Tape& t, const std::vector<NodeId>& ids) {
                        return weighted_functional(t, ops::solve_left(t, ids[0], ids[1]), u, v);
                      };
                      return gradcheck::check(build, {a, b}, eps, tol);
                    }});
  checks.push_back({"solve_right", [](Rng& rng, double eps, double tol) {
                      LeafSpec a{rng.tensor({2, 3}), false, false};
                      LeafSpec b{conditioned_matrix(rng, 3), false, false};
                      ComplexTensor u = rng.tensor({2, 3}, 0.1, 2.0);
                      ComplexTensor v = rng.tensor({2, 3}, 0.1, 2.0);
                      auto build = [&](Tape& t, const std::vector<NodeId>& ids) {
                        return weighted_functional(t, ops::solve_right(t, ids[0], ids[1]), u, v);
                      };
                      return gradcheck::check(build, {a, b}, eps, tol);
                    }});
  checks.push_back({"cholesky", [](Rng& rng, double eps, double tol) {
                      LeafSpec leaf{hermitian_pd_matrix(rng, 3), false, true};
                      ComplexTensor u = rng.tensor({3, 3}, 0.1, 2.0);
                      ComplexTensor v = rng.tensor({3, 3}, 0.1, 2.0);
                      auto build = [&](Tape& t, const std::vector<NodeId>& ids) {
                        return weighted_functional(t, ops::cholesky(t, ids[0]), u, v);
                      };
                      return gradcheck::check(build, {leaf}, eps, tol);
                    }});
  checks.push_back({"eig", [](Rng& rng, double eps, double tol) {
                      return run_eig_check(rng, eps, tol, false);
                    }});
  checks.push_back({"eig_near_degenerate",
                    [](Rng& rng, double eps, double tol) {
                      return run_eig_check(rng, eps, std::max(tol, 1e-4), true);
                    },
                    /*tol_scale=*/10.0});

  // Structural plumbing and real-valued auxiliaries.
  checks.push_back(sized_unary(
      "transpose", [](Tape& t, NodeId z) { return ops::transpose(t, z); }, {3, 4}, false));
  checks.push_back(sized_unary("sum", [](Tape& t, NodeId z) { return ops::sum(t, z); }, {6}, false));
  checks.push_back(sized_unary(
      "element", [](Tape& t, NodeId z) { return ops::element(t, z, 2); }, {5}, false));
  checks.push_back(sized_unary(
      "column", [](Tape& t, NodeId z) { return ops::column(t, z, 1); }, {3, 3}, false));
  checks.push_back(sized_unary(
      "diag_embed", [](Tape& t, NodeId z) { return ops::diag_embed(t, z); }, {4}, false));
  checks.push_back(sized_unary(
      "diag_part", [](Tape& t, NodeId z) { return ops::diag_part(t, z); }, {4, 4}, false));
  checks.push_back(sized_unary(
      "sigmoid", [](Tape& t, NodeId z) { return ops::sigmoid(t, z); }, {5}, true));
  checks.push_back({"neg_log_ratio_db", [](Rng& rng, double eps, double tol) {
                      LeafSpec px{rng.real_tensor({}, 0.5, 5.0), true, false};
                      LeafSpec pn{rng.real_tensor({}, 0.5, 5.0), true, false};
                      auto build = [&](Tape& t, const std::vector<NodeId>& ids) {
                        return ops::neg_log_ratio_db(t, ids[0], ids[1]);
                      };
                      return gradcheck::check(build, {px, pn}, eps, tol);
                    }});
  return checks;
}

}  // namespace

std::vector<std::string> SuiteReport::failed_ops() const {
  std::vector<std::string> out;
  for (const auto& op : ops) {
    if (!op.pass) out.push_back(op.op);
  }
  if (!pipeline.pass) out.push_back(pipeline.op);
  return out;
}

SuiteReport run_gradcheck_suite(double eps, double tol, std::uint64_t seed, bool inject_sign_flip,
                                int checks_per_op) {
  SuiteReport report;
  report.eps = eps;
  report.tol = tol;
  report.seed = seed;

  std::vector<OpCheck> checks = op_checks();
  for (std::size_t idx = 0; idx < checks.size(); ++idx) {
    const OpCheck& op = checks[idx];
    Rng rng(seed * 1000003u + idx);
    OpCheckResult result;
    result.op = op.name;
    result.tol = tol * op.tol_scale;
    for (int k = 0; k < checks_per_op; ++k) {
      CheckReport r = op.once(rng, eps, result.tol);
      double err = inject_sign_flip ? flipped_max_rel_err(r) : r.max_rel_err;
      result.max_rel_err = std::max(result.max_rel_err, err);
      ++result.checks;
    }
    result.pass = result.max_rel_err <= result.tol;
    report.ops.push_back(result);
  }

  CheckReport pipe = run_pipeline_check(seed, eps, std::max(tol, 1e-4));
  report.pipeline.op = "gev_snr_pipeline";
  report.pipeline.checks = 1;
  report.pipeline.tol = std::max(tol, 1e-4);
  report.pipeline.max_rel_err =
      inject_sign_flip ? flipped_max_rel_err(pipe) : pipe.max_rel_err;
  report.pipeline.pass = report.pipeline.max_rel_err <= report.pipeline.tol;

  report.pass = report.pipeline.pass &&
                std::all_of(report.ops.begin(), report.ops.end(),
                            [](const OpCheckResult& r) { return r.pass; });
  return report;
}

namespace {

struct BuiltPipeline {
  std::vector<NodeId> leaf_x, leaf_n;
  std::vector<NodeId> mask_x, mask_n;
  beamform::PipelineNodes nodes;
};

BuiltPipeline build_param_pipeline(Tape& t, const beamform::MaskedScene& sc,
                                   const ExperimentConfig& config,
                                   const std::vector<ComplexTensor>& param_x,
                                   const std::vector<ComplexTensor>& param_n) {
  BuiltPipeline built;
  std::vector<NodeId> ys;
  for (std::size_t f = 0; f < sc.bins; ++f) {
    NodeId lx = t.input(param_x[f], true);
    NodeId ln = t.input(param_n[f], true);
    built.leaf_x.push_back(lx);
    built.leaf_n.push_back(ln);
    built.mask_x.push_back(ops::sigmoid(t, lx));
    built.mask_n.push_back(ops::sigmoid(t, ln));
    ys.push_back(t.constant(beamform::bin_matrix(sc.observed, sc.bins, sc.frames, sc.channels, f)));
  }
  built.nodes = beamform::build_snr_pipeline(
      t, sc, config.beamformer, built.mask_x, built.mask_n, ys,
      beamform::default_psd_delta(sc.frames, sc.channels));
  return built;
}

double logit(double m) {
  double c = std::clamp(m, 1e-6, 1.0 - 1e-6);
  return std::log(c / (1.0 - c));
}

}  // namespace

double objective_value(const beamform::MaskedScene& sc, beamform::BeamformerKind kind) {
  Tape t;
  std::vector<NodeId> mx, mn, ys;
  for (std::size_t f = 0; f < sc.bins; ++f) {
    mx.push_back(t.constant(beamform::bin_mask(sc.mask_x, sc.bins, sc.frames, sc.channels, f)));
    mn.push_back(t.constant(beamform::bin_mask(sc.mask_n, sc.bins, sc.frames, sc.channels, f)));
    ys.push_back(t.constant(beamform::bin_matrix(sc.observed, sc.bins, sc.frames, sc.channels, f)));
  }
  beamform::PipelineNodes nodes = beamform::build_snr_pipeline(
      t, sc, kind, mx, mn, ys, beamform::default_psd_delta(sc.frames, sc.channels));
  return t.value(nodes.objective)[0].real();
}

OptimizeResult run_optimize(const ExperimentConfig& config) {
  scene::validate_config(config);
  OptimizeResult result;
  result.scene = scene::synth_scene(config);
  const beamform::MaskedScene& sc = result.scene;
  double snr_in = beamform::snr_in_db(sc);

  std::vector<ComplexTensor> param_x, param_n;
  Rng init_rng(config.seed ^ 0x5851f42d4c957f2dull);
  for (std::size_t f = 0; f < sc.bins; ++f) {
    ComplexTensor px = ComplexTensor::zeros({sc.frames, sc.channels});
    ComplexTensor pn = ComplexTensor::zeros({sc.frames, sc.channels});
    for (std::size_t i = 0; i < px.size(); ++i) {
      switch (config.init) {
        case scene::MaskInit::kUniform:
          // Masks i.i.d. uniform on [0,1]. Constant masks would make the
          // speech and noise PSDs identical and the eigenproblem degenerate.
          px[i] = cdouble{logit(init_rng.uniform()), 0.0};
          pn[i] = cdouble{logit(init_rng.uniform()), 0.0};
          break;
        case scene::MaskInit::kOracle: {
          ComplexTensor ox = beamform::bin_mask(sc.mask_x, sc.bins, sc.frames, sc.channels, f);
          ComplexTensor on = beamform::bin_mask(sc.mask_n, sc.bins, sc.frames, sc.channels, f);
          px[i] = cdouble{logit(ox[i].real()), 0.0};
          pn[i] = cdouble{logit(on[i].real()), 0.0};
          break;
        }
        case scene::MaskInit::kRandom:
          px[i] = cdouble{init_rng.gaussian(), 0.0};
          pn[i] = cdouble{init_rng.gaussian(), 0.0};
          break;
      }
    }
    param_x.push_back(std::move(px));
    param_n.push_back(std::move(pn));
  }

  auto evaluate = [&](const std::vector<ComplexTensor>& px,
                      const std::vector<ComplexTensor>& pn) {
    Tape t;
    BuiltPipeline built = build_param_pipeline(t, sc, config, px, pn);
    return t.value(built.nodes.objective)[0].real();
  };

  double mu = config.mu;
  for (std::size_t k = 0;; ++k) {
    auto started = std::chrono::steady_clock::now();
    Tape t;
    BuiltPipeline built = build_param_pipeline(t, sc, config, param_x, param_n);
    double j = t.value(built.nodes.objective)[0].real();
    if (!std::isfinite(j)) {
      result.diverged = true;
      return result;
    }
    std::vector<ComplexTensor> weights;
    for (NodeId w : built.nodes.weights) weights.push_back(t.value(w));
    double snr_out = beamform::snr_out_db(sc, weights);
    double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                          started)
                    .count();
    result.rows.push_back({k, j, snr_in, snr_out, ms});

    if (k == config.iterations) {
      result.weights = std::move(weights);
      result.mask_x = ComplexTensor::zeros({sc.bins, sc.frames, sc.channels});
      result.mask_n = ComplexTensor::zeros({sc.bins, sc.frames, sc.channels});
      for (std::size_t f = 0; f < sc.bins; ++f) {
        beamform::set_bin_mask(result.mask_x, sc.bins, sc.frames, sc.channels, f,
                               t.value(built.mask_x[f]));
        beamform::set_bin_mask(result.mask_n, sc.bins, sc.frames, sc.channels, f,
                               t.value(built.mask_n[f]));
      }
      return result;
    }

    GradientMap grads = t.backward(built.nodes.objective);
    auto step = [&](double step_mu, std::vector<ComplexTensor>& out_x,
                    std::vector<ComplexTensor>& out_n) {
      out_x.clear();
      out_n.clear();
      for (std::size_t f = 0; f < sc.bins; ++f) {
        const ComplexTensor& gx = grads.has(built.leaf_x[f])
                                      ? grads.at(built.leaf_x[f])
                                      : ComplexTensor::zeros(param_x[f].shape());
        const ComplexTensor& gn = grads.has(built.leaf_n[f])
                                      ? grads.at(built.leaf_n[f])
                                      : ComplexTensor::zeros(param_n[f].shape());
        out_x.push_back(sgd_step(param_x[f], gx, step_mu, true));
        out_n.push_back(sgd_step(param_n[f], gn, step_mu, true));
      }
    };

    std::vector<ComplexTensor> next_x, next_n;
    for (int halving = 0;; ++halving) {
      step(mu, next_x, next_n);
      double j_next = evaluate(next_x, next_n);
      if (std::isfinite(j_next) && j_next <= j) break;
      if (halving >= 24) break;  // accept whatever is left of the step
      mu *= 0.5;
      ++result.backtracks;
    }
    param_x = std::move(next_x);
    param_n = std::move(next_n);
  }
}

CompareResult run_compare(const ExperimentConfig& config) {
  scene::validate_config(config);
  beamform::MaskedScene sc = scene::synth_scene(config);
  CompareResult result;
  result.snr_in_db = beamform::snr_in_db(sc);
  const beamform::BeamformerKind kinds[] = {beamform::BeamformerKind::kMvdr,
                                            beamform::BeamformerKind::kGev,
                                            beamform::BeamformerKind::kGevWhitening};
  for (beamform::BeamformerKind kind : kinds) {
    std::vector<ComplexTensor> weights = beamform::compute_weights(sc, kind);
    result.rows.push_back({beamform::beamformer_name(kind), "oracle",
                           objective_value(sc, kind), beamform::snr_out_db(sc, weights)});
    ExperimentConfig per_kind = config;
    per_kind.beamformer = kind;
    OptimizeResult opt = run_optimize(per_kind);
    if (opt.diverged) {
      throw std::runtime_error(std::string("compare: optimization diverged for ") +
                               beamform::beamformer_name(kind));
    }
    result.rows.push_back({beamform::beamformer_name(kind), "optimized", opt.rows.back().j,
                           opt.rows.back().snr_out_db});
  }
  return result;
}

namespace {

std::filesystem::path prepare_out_dir(const ExperimentConfig& config) {
  std::filesystem::path dir = config.out_dir.empty() ? "." : config.out_dir;
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

int cmd_gradcheck(const ExperimentConfig& config) {
  SuiteReport suite =
      run_gradcheck_suite(config.eps, config.tol, config.seed, config.inject_sign_flip);
  nlohmann::json out;
  out["eps"] = suite.eps;
  out["tol"] = suite.tol;
  out["seed"] = suite.seed;
  out["pass"] = suite.pass;
  nlohmann::json ops = nlohmann::json::array();
  auto op_json = [](const OpCheckResult& r) {
    return nlohmann::json{{"op", r.op},
                          {"checks", r.checks},
                          {"max_rel_err", r.max_rel_err},
                          {"tol", r.tol},
                          {"pass", r.pass}};
  };
  for (const auto& op : suite.ops) ops.push_back(op_json(op));
  out["ops"] = ops;
  out["pipeline"] = op_json(suite.pipeline);
  std::filesystem::path dir = prepare_out_dir(config);
  io::write_text((dir / "report.json").string(), out.dump(2) + "\n");

  for (const auto& op : suite.ops) {
    std::printf("%-22s %-4s max_rel_err=%.3e (tol %.1e, %d checks)\n", op.op.c_str(),
                op.pass ? "ok" : "FAIL", op.max_rel_err, op.tol, op.checks);
  }
  std::printf("%-22s %-4s max_rel_err=%.3e (tol %.1e)\n", suite.pipeline.op.c_str(),
              suite.pipeline.pass ? "ok" : "FAIL", suite.pipeline.max_rel_err,
              suite.pipeline.tol);
  if (!suite.pass) {
    std::printf("FAILED ops:");
    for (const auto& name : suite.failed_ops()) std::printf(" %s", name.c_str());
    std::printf("\n");
    return 1;
  }
  std::printf("all gradient checks passed\n");
  return 0;
}

int cmd_optimize(const ExperimentConfig& config) {
  OptimizeResult result = run_optimize(config);
  if (result.diverged) {
    std::fprintf(stderr, "optimize: objective diverged to a non-finite value\n");
    return 2;
  }
  std::filesystem::path dir = prepare_out_dir(config);
  io::write_text((dir / "metrics.csv").string(), io::metrics_csv(result.rows));

  std::size_t d = result.scene.channels;
  ComplexTensor weights = ComplexTensor::zeros({result.scene.bins, d});
  for (std::size_t f = 0; f < result.scene.bins; ++f)
    for (std::size_t c = 0; c < d; ++c) weights[f * d + c] = result.weights[f][c];
  io::dump_tensor((dir / "weights.bin").string(), (dir / "weights.json").string(), weights);

  ComplexTensor masks = ComplexTensor::zeros(
      {2, result.scene.bins, result.scene.frames, result.scene.channels});
  std::size_t half = masks.size() / 2;
  for (std::size_t i = 0; i < half; ++i) {
    masks[i] = result.mask_x[i];
    masks[half + i] = result.mask_n[i];
  }
  io::dump_tensor((dir / "masks.bin").string(), (dir / "masks.json").string(), masks);

  const io::MetricsRow& first = result.rows.front();
  const io::MetricsRow& last = result.rows.back();
  std::printf("optimize: %zu iterations, J %.4f -> %.4f, SNR_out %.4f -> %.4f dB (SNR_in %.4f)\n",
              config.iterations, first.j, last.j, first.snr_out_db, last.snr_out_db,
              first.snr_in_db);
  return 0;
}

int cmd_compare(const ExperimentConfig& config) {
  CompareResult result = run_compare(config);
  nlohmann::json out;
  out["snr_in_db"] = result.snr_in_db;
  nlohmann::json rows = nlohmann::json::array();
  std::printf("%-15s %-10s %12s %14s\n", "beamformer", "masks", "J", "snr_out_db");
  for (const CompareRow& row : result.rows) {
    rows.push_back({{"beamformer", row.beamformer},
                    {"masks", row.masks},
                    {"J", row.j},
                    {"snr_out_db", row.snr_out_db}});
    std::printf("%-15s %-10s %12.6f %14.6f\n", row.beamformer.c_str(), row.masks.c_str(), row.j,
                row.snr_out_db);
  }
  out["rows"] = rows;
  std::filesystem::path dir = prepare_out_dir(config);
  io::write_text((dir / "report.json").string(), out.dump(2) + "\n");
  return 0;
}

}  // namespace bfgrad::cli
