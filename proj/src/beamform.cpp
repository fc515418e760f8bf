// SPDX-License-Identifier: Apache-2.0
#include "bfgrad/beamform.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "bfgrad/linalg_ops.hpp"
#include "bfgrad/scalar_ops.hpp"

namespace bfgrad::beamform {

namespace {

std::size_t flat_index(std::size_t frames, std::size_t channels, std::size_t f, std::size_t t,
                       std::size_t d) {
  return (f * frames + t) * channels + d;
}

}  // namespace

void validate_scene(const MaskedScene& scene) {
  std::size_t n = scene.bins * scene.frames * scene.channels;
  if (scene.clean.size() != n || scene.noise.size() != n || scene.observed.size() != n ||
      scene.mask_x.size() != n || scene.mask_n.size() != n) {
    throw std::invalid_argument("scene: field sizes disagree with F*T*D");
  }
  double scale = std::max({scene.clean.max_abs(), scene.noise.max_abs(), 1.0});
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(scene.observed[i] - scene.clean[i] - scene.noise[i]) > 1e-12 * scale) {
      throw std::invalid_argument("scene: observation is not clean + noise");
    }
    for (const ComplexTensor* m : {&scene.mask_x, &scene.mask_n}) {
      cdouble v = (*m)[i];
      if (v.imag() != 0.0 || v.real() < 0.0 || v.real() > 1.0) {
        throw std::invalid_argument("scene: mask entry outside [0, 1]");
      }
    }
  }
}

ComplexTensor bin_matrix(const ComplexTensor& t, std::size_t bins, std::size_t frames,
                         std::size_t channels, std::size_t f) {
  if (f >= bins) throw std::invalid_argument("bin_matrix: bin out of range");
  std::vector<cdouble> out(channels * frames);
  for (std::size_t d = 0; d < channels; ++d)
    for (std::size_t tt = 0; tt < frames; ++tt)
      out[d * frames + tt] = t[flat_index(frames, channels, f, tt, d)];
  return ComplexTensor({channels, frames}, std::move(out));
}

ComplexTensor bin_mask(const ComplexTensor& m, std::size_t bins, std::size_t frames,
                       std::size_t channels, std::size_t f) {
  if (f >= bins) throw std::invalid_argument("bin_mask: bin out of range");
  std::vector<cdouble> out(frames * channels);
  for (std::size_t tt = 0; tt < frames; ++tt)
    for (std::size_t d = 0; d < channels; ++d)
      out[tt * channels + d] = m[flat_index(frames, channels, f, tt, d)];
  return ComplexTensor({frames, channels}, std::move(out));
}

void set_bin_mask(ComplexTensor& full, std::size_t bins, std::size_t frames,
                  std::size_t channels, std::size_t f, const ComplexTensor& slice) {
  if (f >= bins) throw std::invalid_argument("set_bin_mask: bin out of range");
  for (std::size_t tt = 0; tt < frames; ++tt)
    for (std::size_t d = 0; d < channels; ++d)
      full[flat_index(frames, channels, f, tt, d)] = slice[tt * channels + d];
}

const char* beamformer_name(BeamformerKind kind) {
  switch (kind) {
    case BeamformerKind::kMvdr: return "mvdr";
    case BeamformerKind::kGev: return "gev";
    case BeamformerKind::kGevWhitening: return "gev-whitening";
  }
  return "unknown";
}

NodeId psd_node(Tape& t, NodeId y, NodeId mask) {
  const ComplexTensor& m = t.value(mask);
  const ComplexTensor& ym = t.value(y);
  if (m.rank() != 2 || ym.rank() != 2 || m.rows() != ym.cols()) {
    throw std::invalid_argument("psd: mask [T,D] and signal [D,T] frame counts disagree");
  }
  double total = sum_all(m).real();
  if (!(total > 0.0)) {
    throw std::domain_error("psd: mask sums to zero in this bin");
  }
  NodeId ones = t.constant(ComplexTensor({m.cols(), 1},
                                         std::vector<cdouble>(m.cols(), cdouble{1.0, 0.0})));
  NodeId frame_weights = ops::matmul(t, mask, ones);          // [T,1]
  NodeId weight_diag = ops::diag_embed(t, frame_weights);     // [T,T]
  NodeId num = ops::matmul(t, ops::matmul(t, y, weight_diag), ops::hermitian(t, y));
  NodeId den = ops::sum(t, frame_weights);
  return ops::div(t, num, den);
}

NodeId condition_psd_node(Tape& t, NodeId phi, double delta) {
  if (delta < 0.0) throw std::invalid_argument("condition_psd: delta must be >= 0");
  if (delta == 0.0) return phi;
  std::size_t d = t.value(phi).rows();
  NodeId trace = ops::re(t, ops::sum(t, ops::diag_part(t, phi)));
  NodeId level = ops::mul(t, trace, t.constant(ComplexTensor::scalar(delta / double(d))));
  NodeId floor = ops::mul(t, t.constant(ComplexTensor::identity(d)), level);
  return ops::add(t, phi, floor);
}

NodeId mvdr_weight_node(Tape& t, NodeId phi_xx, NodeId phi_nn) {
  ops::EigNodes pca = ops::eig(t, phi_xx);
  NodeId w_pca = ops::column(t, pca.vectors, 0);
  NodeId num = ops::solve_left(t, phi_nn, w_pca);
  NodeId den_full = ops::matmul(t, ops::hermitian(t, w_pca), num);
  cdouble den = t.value(den_full)[0];
  if (std::abs(den.imag()) > 1e-10 * std::abs(den.real()) || den.real() <= 0.0) {
    std::ostringstream msg;
    msg << "mvdr: normalization " << den.real() << (den.imag() < 0 ? " - " : " + ")
        << std::abs(den.imag()) << "j is not real-positive";
    throw std::domain_error(msg.str());
  }
  NodeId den_real = ops::re(t, ops::element(t, den_full, 0));
  return ops::div(t, num, den_real);
}

NodeId gev_weight_node_eig(Tape& t, NodeId phi_xx, NodeId phi_nn) {
  NodeId phi = ops::solve_left(t, phi_nn, phi_xx);
  ops::EigNodes pair = ops::eig(t, phi);
  NodeId principal = ops::column(t, pair.vectors, 0);
  return ops::phase_normalize(t, ops::normalize_vec(t, principal));
}

NodeId gev_weight_node_whitening(Tape& t, NodeId phi_nn, NodeId y, NodeId mask_x) {
  NodeId l = ops::cholesky(t, phi_nn);
  NodeId whitened = ops::solve_left(t, l, y);            // L^-1 Y, [D,T]
  NodeId phi_white = psd_node(t, whitened, mask_x);      // hermitian by construction
  ops::EigNodes pair = ops::eig(t, phi_white);
  NodeId principal = ops::column(t, pair.vectors, 0);
  NodeId back = ops::solve_left(t, ops::hermitian(t, l), principal);  // L^-H w~
  return ops::phase_normalize(t, ops::normalize_vec(t, back));
}

NodeId apply_beamformer_node(Tape& t, NodeId w, NodeId s) {
  return ops::matmul(t, ops::hermitian(t, w), s);
}

std::vector<ComplexTensor> normalize_bins(const ComplexTensor& signal, std::size_t bins,
                                          std::size_t frames, std::size_t channels) {
  std::vector<ComplexTensor> out;
  out.reserve(bins);
  for (std::size_t f = 0; f < bins; ++f) {
    ComplexTensor m = bin_matrix(signal, bins, frames, channels, f);
    double energy = 0.0;
    for (const cdouble& v : m.data()) energy += std::norm(v);
    if (!(energy > 0.0)) {
      std::ostringstream msg;
      msg << "normalize_bins: zero signal energy in bin " << f;
      throw std::domain_error(msg.str());
    }
    out.push_back(scale(m, 1.0 / std::sqrt(energy)));
  }
  return out;
}

NodeId snr_objective_node(Tape& t, const std::vector<NodeId>& weights,
                          const std::vector<ComplexTensor>& x_norm,
                          const std::vector<ComplexTensor>& n_norm) {
  if (weights.empty() || weights.size() != x_norm.size() || weights.size() != n_norm.size()) {
    throw std::invalid_argument("snr_objective: per-bin weights and signals disagree");
  }
  double frames = static_cast<double>(x_norm.front().cols());
  NodeId px = 0, pn = 0;
  for (std::size_t f = 0; f < weights.size(); ++f) {
    auto bin_power = [&](const ComplexTensor& sig) {
      NodeId out = apply_beamformer_node(t, weights[f], t.constant(sig));
      NodeId sq = ops::re(t, ops::mul(t, out, ops::conj(t, out)));
      return ops::sum(t, sq);
    };
    NodeId px_f = bin_power(x_norm[f]);
    NodeId pn_f = bin_power(n_norm[f]);
    px = (f == 0) ? px_f : ops::add(t, px, px_f);
    pn = (f == 0) ? pn_f : ops::add(t, pn, pn_f);
  }
  NodeId per_frame = t.constant(ComplexTensor::scalar(1.0 / frames));
  px = ops::mul(t, px, per_frame);
  pn = ops::mul(t, pn, per_frame);
  return ops::neg_log_ratio_db(t, px, pn);
}

double default_psd_delta(std::size_t frames, std::size_t channels) {
  return frames < channels ? 1e-6 : 1e-10;
}

PipelineNodes build_snr_pipeline(Tape& t, const MaskedScene& scene, BeamformerKind kind,
                                 const std::vector<NodeId>& mask_x_nodes,
                                 const std::vector<NodeId>& mask_n_nodes,
                                 const std::vector<NodeId>& y_nodes, double delta) {
  if (mask_x_nodes.size() != scene.bins || mask_n_nodes.size() != scene.bins ||
      y_nodes.size() != scene.bins) {
    throw std::invalid_argument("build_snr_pipeline: need one node per bin");
  }
  std::vector<ComplexTensor> x_norm =
      normalize_bins(scene.clean, scene.bins, scene.frames, scene.channels);
  std::vector<ComplexTensor> n_norm =
      normalize_bins(scene.noise, scene.bins, scene.frames, scene.channels);

  PipelineNodes nodes;
  nodes.weights.reserve(scene.bins);
  for (std::size_t f = 0; f < scene.bins; ++f) {
    NodeId phi_nn = condition_psd_node(t, psd_node(t, y_nodes[f], mask_n_nodes[f]), delta);
    NodeId w = 0;
    switch (kind) {
      case BeamformerKind::kMvdr: {
        NodeId phi_xx = psd_node(t, y_nodes[f], mask_x_nodes[f]);
        w = mvdr_weight_node(t, phi_xx, phi_nn);
        break;
      }
      case BeamformerKind::kGev: {
        NodeId phi_xx = psd_node(t, y_nodes[f], mask_x_nodes[f]);
        w = gev_weight_node_eig(t, phi_xx, phi_nn);
        break;
      }
      case BeamformerKind::kGevWhitening:
        w = gev_weight_node_whitening(t, phi_nn, y_nodes[f], mask_x_nodes[f]);
        break;
    }
    nodes.weights.push_back(w);
  }
  nodes.objective = snr_objective_node(t, nodes.weights, x_norm, n_norm);
  return nodes;
}

ComplexTensor estimate_psd_direct(const ComplexTensor& y, const ComplexTensor& mask) {
  std::size_t d = y.rows(), frames = y.cols();
  ComplexTensor phi = ComplexTensor::zeros({d, d});
  double total = 0.0;
  for (std::size_t tt = 0; tt < frames; ++tt) {
    double a = 0.0;
    for (std::size_t c = 0; c < mask.cols(); ++c) a += mask[tt * mask.cols() + c].real();
    total += a;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j)
        phi[i * d + j] += a * y[i * frames + tt] * std::conj(y[j * frames + tt]);
  }
  if (!(total > 0.0)) throw std::domain_error("psd: mask sums to zero in this bin");
  return scale(phi, 1.0 / total);
}

double snr_in_db(const MaskedScene& scene) {
  double sx = 0.0, sn = 0.0;
  for (const cdouble& v : scene.clean.data()) sx += std::norm(v);
  for (const cdouble& v : scene.noise.data()) sn += std::norm(v);
  if (!(sn > 0.0)) throw std::domain_error("snr_in: zero noise energy");
  return 10.0 * std::log10(sx / sn);
}

double snr_out_db(const MaskedScene& scene, const std::vector<ComplexTensor>& weights) {
  if (weights.size() != scene.bins) throw std::invalid_argument("snr_out: need one weight per bin");
  double sx = 0.0, sn = 0.0;
  for (std::size_t f = 0; f < scene.bins; ++f) {
    ComplexTensor x = bin_matrix(scene.clean, scene.bins, scene.frames, scene.channels, f);
    ComplexTensor n = bin_matrix(scene.noise, scene.bins, scene.frames, scene.channels, f);
    for (std::size_t tt = 0; tt < scene.frames; ++tt) {
      cdouble bx{0.0, 0.0}, bn{0.0, 0.0};
      for (std::size_t d = 0; d < scene.channels; ++d) {
        cdouble wc = std::conj(weights[f][d]);
        bx += wc * x[d * scene.frames + tt];
        bn += wc * n[d * scene.frames + tt];
      }
      sx += std::norm(bx);
      sn += std::norm(bn);
    }
  }
  if (!(sn > 0.0)) throw std::domain_error("snr_out: zero beamformed noise energy");
  return 10.0 * std::log10(sx / sn);
}

std::vector<ComplexTensor> compute_weights(const MaskedScene& scene, BeamformerKind kind) {
  Tape t;
  std::vector<NodeId> mx, mn, ys;
  for (std::size_t f = 0; f < scene.bins; ++f) {
    mx.push_back(t.constant(bin_mask(scene.mask_x, scene.bins, scene.frames, scene.channels, f)));
    mn.push_back(t.constant(bin_mask(scene.mask_n, scene.bins, scene.frames, scene.channels, f)));
    ys.push_back(
        t.constant(bin_matrix(scene.observed, scene.bins, scene.frames, scene.channels, f)));
  }
  PipelineNodes nodes = build_snr_pipeline(
      t, scene, kind, mx, mn, ys, default_psd_delta(scene.frames, scene.channels));
  std::vector<ComplexTensor> weights;
  weights.reserve(scene.bins);
  for (NodeId w : nodes.weights) weights.push_back(t.value(w));
  return weights;
}

}  // namespace bfgrad::beamform
