// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "bfgrad/beamform.hpp"
#include "bfgrad/io.hpp"
#include "bfgrad/scene.hpp"

namespace bfgrad::cli {

using scene::ExperimentConfig;

struct OpCheckResult {
  std::string op;
  int checks = 0;
  double max_rel_err = 0.0;
  double tol = 0.0;
  bool pass = false;
};

struct SuiteReport {
  double eps = 0.0;
  double tol = 0.0;
  std::uint64_t seed = 0;
  std::vector<OpCheckResult> ops;
  OpCheckResult pipeline;
  bool pass = false;

  std::vector<std::string> failed_ops() const;
};

// Op-level oracle checks (random inputs per op) plus the end-to-end GEV
// pipeline check. inject_sign_flip negates every analytic gradient before
// comparison; the suite must then fail.
SuiteReport run_gradcheck_suite(double eps, double tol, std::uint64_t seed,
                                bool inject_sign_flip = false, int checks_per_op = 100);

struct OptimizeResult {
  beamform::MaskedScene scene;
  std::vector<io::MetricsRow> rows;  // rows[k] = state after k updates
  std::vector<ComplexTensor> weights;
  ComplexTensor mask_x;  // final masks, [F,T,D]
  ComplexTensor mask_n;
  bool diverged = false;
  std::size_t backtracks = 0;
};

// Mask-parameter gradient descent against the pipeline objective.
OptimizeResult run_optimize(const ExperimentConfig& config);

struct CompareRow {
  std::string beamformer;
  std::string masks;  // "oracle" or "optimized"
  double j = 0.0;
  double snr_out_db = 0.0;
};

struct CompareResult {
  double snr_in_db = 0.0;
  std::vector<CompareRow> rows;
};

CompareResult run_compare(const ExperimentConfig& config);

// Command entry points: run, write outputs, return a process exit code.
int cmd_gradcheck(const ExperimentConfig& config);
int cmd_optimize(const ExperimentConfig& config);
int cmd_compare(const ExperimentConfig& config);

// Objective value for a scene with given masks under a beamformer.
double objective_value(const beamform::MaskedScene& scene, beamform::BeamformerKind kind);

}  // namespace bfgrad::cli
