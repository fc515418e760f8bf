// SPDX-License-Identifier: Apache-2.0
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <map>
#include <string>

#include "bfgrad/cli.hpp"

namespace {

using bfgrad::cli::ExperimentConfig;

const std::map<std::string, bfgrad::beamform::BeamformerKind> kBeamformers = {
    {"gev", bfgrad::beamform::BeamformerKind::kGev},
    {"mvdr", bfgrad::beamform::BeamformerKind::kMvdr},
    {"gev-whitening", bfgrad::beamform::BeamformerKind::kGevWhitening},
};

const std::map<std::string, bfgrad::scene::MaskInit> kInits = {
    {"uniform", bfgrad::scene::MaskInit::kUniform},
    {"oracle", bfgrad::scene::MaskInit::kOracle},
    {"random", bfgrad::scene::MaskInit::kRandom},
};

struct RawOptions {
  std::string config_path;
  ExperimentConfig config;
};

// Flags beat the config file, which beats BFGRAD_SEED, which beats defaults.
// Returns true when the seed came from the file.
bool apply_config_file(CLI::App& cmd, RawOptions& raw) {
  if (raw.config_path.empty()) return false;
  std::ifstream in(raw.config_path);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + raw.config_path);
  nlohmann::json doc = nlohmann::json::parse(in);
  auto absent = [&](const char* flag) {
    return cmd.get_option_no_throw(flag) == nullptr || cmd.count(flag) == 0;
  };
  if (doc.contains("channels") && absent("--channels")) raw.config.channels = doc["channels"];
  if (doc.contains("bins") && absent("--bins")) raw.config.bins = doc["bins"];
  if (doc.contains("frames") && absent("--frames")) raw.config.frames = doc["frames"];
  if (doc.contains("snr_in") && absent("--snr-in")) raw.config.snr_in_db = doc["snr_in"];
  if (doc.contains("mu") && absent("--mu")) raw.config.mu = doc["mu"];
  if (doc.contains("iters") && absent("--iters")) raw.config.iterations = doc["iters"];
  if (doc.contains("eps") && absent("--eps")) raw.config.eps = doc["eps"];
  if (doc.contains("tol") && absent("--tol")) raw.config.tol = doc["tol"];
  if (doc.contains("out") && absent("--out")) raw.config.out_dir = doc["out"];
  if (doc.contains("beamformer") && absent("--beamformer")) {
    raw.config.beamformer = kBeamformers.at(doc["beamformer"].get<std::string>());
  }
  if (doc.contains("init") && absent("--init")) {
    raw.config.init = kInits.at(doc["init"].get<std::string>());
  }
  if (doc.contains("seed") && absent("--seed")) {
    raw.config.seed = doc["seed"];
    return true;
  }
  return false;
}

void apply_env_seed(const CLI::App& cmd, RawOptions& raw, bool seed_from_file) {
  if (cmd.count("--seed") > 0 || seed_from_file) return;
  if (const char* env = std::getenv("BFGRAD_SEED")) {
    raw.config.seed = std::strtoull(env, nullptr, 10);
  }
}

void add_common_options(CLI::App& cmd, RawOptions& raw) {
  cmd.add_option("--config", raw.config_path, "JSON config file; flags override its values");
  cmd.add_option("--seed", raw.config.seed, "RNG seed (fallback: BFGRAD_SEED env var)")
      ->capture_default_str();
  cmd.add_option("--out", raw.config.out_dir, "output directory (default: current directory)");
}

void add_scene_options(CLI::App& cmd, RawOptions& raw) {
  cmd.add_option("--channels", raw.config.channels, "microphone channels D")
      ->capture_default_str();
  cmd.add_option("--bins", raw.config.bins, "frequency bins F")->capture_default_str();
  cmd.add_option("--frames", raw.config.frames, "time frames T")->capture_default_str();
  cmd.add_option("--snr-in", raw.config.snr_in_db, "target input SNR in dB")
      ->capture_default_str();
  cmd.add_option("--beamformer", raw.config.beamformer, "beamformer kind")
      ->transform(CLI::CheckedTransformer(kBeamformers, CLI::ignore_case))
      ->capture_default_str();
  cmd.add_option("--init", raw.config.init, "mask initialization")
      ->transform(CLI::CheckedTransformer(kInits, CLI::ignore_case))
      ->capture_default_str();
  cmd.add_option("--mu", raw.config.mu, "gradient descent step size")->capture_default_str();
  cmd.add_option("--iters", raw.config.iterations, "optimization iterations")
      ->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"complex-gradient beamforming experiments"};
  app.set_version_flag("--version", "bfgrad 0.1.0");
  app.require_subcommand(1);

  RawOptions check_raw, opt_raw, cmp_raw;

  CLI::App* check = app.add_subcommand("gradcheck", "verify every backward rule and the pipeline");
  add_common_options(*check, check_raw);
  check->add_option("--eps", check_raw.config.eps, "central-difference step")
      ->capture_default_str();
  check->add_option("--tol", check_raw.config.tol, "relative-error tolerance")
      ->capture_default_str();
  check
      ->add_flag("--inject-sign-flip", check_raw.config.inject_sign_flip,
                 "negate analytic gradients (harness canary, must fail)")
      ->group("");  // hidden

  CLI::App* optimize = app.add_subcommand("optimize", "gradient-descend masks on a synthetic scene");
  add_common_options(*optimize, opt_raw);
  add_scene_options(*optimize, opt_raw);

  CLI::App* compare =
      app.add_subcommand("compare", "beamformer x mask-source table on one scene");
  add_common_options(*compare, cmp_raw);
  add_scene_options(*compare, cmp_raw);

  CLI11_PARSE(app, argc, argv);

  try {
    if (check->parsed()) {
      apply_env_seed(*check, check_raw, apply_config_file(*check, check_raw));
      return bfgrad::cli::cmd_gradcheck(check_raw.config);
    }
    if (optimize->parsed()) {
      apply_env_seed(*optimize, opt_raw, apply_config_file(*optimize, opt_raw));
      return bfgrad::cli::cmd_optimize(opt_raw.config);
    }
    if (compare->parsed()) {
      apply_env_seed(*compare, cmp_raw, apply_config_file(*compare, cmp_raw));
      return bfgrad::cli::cmd_compare(cmp_raw.config);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
