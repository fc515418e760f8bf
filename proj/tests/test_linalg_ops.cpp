// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "bfgrad/gradcheck.hpp"
#include "bfgrad/linalg_ops.hpp"
#include "bfgrad/random.hpp"
#include "bfgrad/scalar_ops.hpp"

using namespace bfgrad;
using namespace bfgrad::linalg_ops;
using doctest::Approx;

namespace {

ComplexTensor hermitian_pd(Rng& rng, std::size_t d) {
  ComplexTensor m = rng.gaussian_tensor({d, d});
  ComplexTensor out = ComplexTensor::identity(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      cdouble acc{0.0, 0.0};
      for (std::size_t k = 0; k < d; ++k) acc += m[i * d + k] * std::conj(m[j * d + k]);
      out[i * d + j] += acc;
    }
  for (std::size_t i = 0; i < d; ++i) {
    out[i * d + i] = cdouble{out[i * d + i].real(), 0.0};
    for (std::size_t j = i + 1; j < d; ++j) out[j * d + i] = std::conj(out[i * d + j]);
  }
  return out;
}

ComplexTensor well_conditioned(Rng& rng, std::size_t d) {
  ComplexTensor m = rng.tensor({d, d}, 0.1, 2.0);
  double shift = 3.0 * m.max_abs();
  for (std::size_t i = 0; i < d; ++i) m[i * d + i] += shift;
  return m;
}

// J = sum Re{u o s} for a fixed random weighting.
NodeId weighted(Tape& t, NodeId s, const ComplexTensor& u) {
  return ops::sum(t, ops::re(t, ops::mul(t, t.constant(u), s)));
}

ComplexTensor mat_hermitian(const ComplexTensor& a) {
  std::size_t r = a.rows(), c = a.cols();
  ComplexTensor out = ComplexTensor::zeros({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = std::conj(a[i * c + j]);
  return out;
}

}  // namespace

TEST_CASE("normalize_vec forward and rule specializations") {
  ComplexTensor unit = ComplexTensor({2, 1}, {cdouble{1.0, 0.0}, cdouble{0.0, 0.0}});
  // A cotangent orthogonal to z passes through untouched.
  ComplexTensor tangential({2, 1}, {cdouble{0.0, 0.0}, cdouble{0.3, 0.4}});
  ComplexTensor g1 = normalize_vec_bwd(tangential, unit);
  CHECK(max_abs_diff(g1, tangential) < 1e-14);
  // A radial cotangent is annihilated.
  ComplexTensor g2 = normalize_vec_bwd(unit, unit);
  CHECK(g2.max_abs() < 1e-14);
  CHECK_THROWS_AS(normalize_vec_fwd(ComplexTensor::zeros({3, 1})), std::domain_error);
}

TEST_CASE("normalize_vec matches the oracle on J = |u^H s|^2") {
  Rng rng(51);
  ComplexTensor u = rng.tensor({4}, 0.1, 2.0);
  auto build = [&](Tape& t, const std::vector<NodeId>& ids) {
    NodeId s = ops::normalize_vec(t, ids[0]);
    NodeId proj = ops::sum(t, ops::mul(t, t.constant(bfgrad::conj(u)), s));
    return ops::re(t, ops::mul(t, proj, ops::conj(t, proj)));
  };
  for (int k = 0; k < 20; ++k) {
    auto report = gradcheck::check(build, {gradcheck::LeafSpec{rng.tensor({4}), false, false}});
    CHECK(report.max_rel_err < 1e-5);
  }
}

TEST_CASE("matmul rule") {
  Rng rng(52);
  ComplexTensor a = rng.tensor({3, 3});
  ComplexTensor g = rng.tensor({3, 3});
  auto [ga, gb] = matmul_bwd(g, a, ComplexTensor::identity(3));
  CHECK(max_abs_diff(ga, g) < 1e-14);  // B = I passes g through
  ComplexTensor expected_gb = matmul_fwd(mat_hermitian(a), g);
  CHECK(max_abs_diff(gb, expected_gb) < 1e-12);

  // 1x1 matmul reduces to the scalar product rule.
  ComplexTensor sa({1, 1}, {cdouble{2.0, 1.0}});
  ComplexTensor sb({1, 1}, {cdouble{-1.0, 3.0}});
  ComplexTensor sg({1, 1}, {cdouble{1.0, 0.0}});
  auto [m1, m2] = matmul_bwd(sg, sa, sb);
  auto [s1, s2] = scalar_ops::mul_bwd(sg, sa, sb);
  CHECK(max_abs_diff(m1, s1) < 1e-15);
  CHECK(max_abs_diff(m2, s2) < 1e-15);
}

TEST_CASE("matmul matches the oracle") {
  Rng rng(53);
  ComplexTensor u = rng.tensor({3, 3}, 0.1, 2.0);
  auto build = [&](Tape& t, const std::vector<NodeId>& ids) {
    return weighted(t, ops::matmul(t, ids[0], ids[1]), u);
  };
  auto report = gradcheck::check(
      build, {gradcheck::LeafSpec{rng.tensor({3, 3}), false, false},
              gradcheck::LeafSpec{rng.tensor({3, 3}), false, false}});
  CHECK(report.max_rel_err < 1e-5);
}

TEST_CASE("inv rule on the identity negates the cotangent") {
  ComplexTensor g = ComplexTensor({2, 2}, {cdouble{1.0, 2.0}, cdouble{0.0, 1.0},
                                           cdouble{3.0, 0.0}, cdouble{-1.0, -1.0}});
  ComplexTensor out = inv_bwd(g, ComplexTensor::identity(2));
  CHECK(max_abs_diff(out, bfgrad::neg(g)) < 1e-14);
}

TEST_CASE("1x1 inverse agrees with the n=-1 power rule") {
  ComplexTensor a({1, 1}, {cdouble{2.0, 0.0}});
  ComplexTensor c = inv_fwd(a);
  ComplexTensor g({1, 1}, {cdouble{1.0, 0.0}});
  ComplexTensor via_inv = inv_bwd(g, c);
  ComplexTensor via_pow = scalar_ops::pow_bwd(g, a, -1);
  CHECK(max_abs_diff(via_inv, via_pow) < 1e-14);
  CHECK(via_inv[0].real() == Approx(-0.25));
}

TEST_CASE("inv rejects singular and ill-conditioned inputs") {
  ComplexTensor singular({2, 2}, {1.0, 2.0, 2.0, 4.0});
  CHECK_THROWS_AS(inv_fwd(singular), std::domain_error);
  ComplexTensor nearly({2, 2}, {1.0, 0.0, 0.0, 1e-14});
  CHECK_THROWS_AS(inv_fwd(nearly), std::domain_error);
}

TEST_CASE("inv matches the oracle") {
  Rng rng(54);
  ComplexTensor u = rng.tensor({3, 3}, 0.1, 2.0);
  auto build = [&](Tape& t, const std::vector<NodeId>& ids) {
    return weighted(t, ops::inv(t, ids[0]), u);
  };
  auto report =
      gradcheck::check(build, {gradcheck::LeafSpec{well_conditioned(rng, 3), false, false}});
  CHECK(report.max_rel_err < 1e-5);
}

TEST_CASE("solve_left with identity system matrix") {
  Rng rng(55);
  ComplexTensor g = rng.tensor({3, 2});
  ComplexTensor c = rng.tensor({3, 2});
  auto [ga, gb] = solve_left_bwd(g, ComplexTensor::identity(3), c);
  CHECK(max_abs_diff(gb, g) < 1e-12);
  ComplexTensor expected_ga = bfgrad::neg(matmul_fwd(g, mat_hermitian(c)));
  CHECK(max_abs_diff(ga, expected_ga) < 1e-12);
}

TEST_CASE("solve_left of A against itself matches the inv composition") {
  Rng rng(56);
  ComplexTensor a0 = well_conditioned(rng, 3);
  ComplexTensor u = rng.tensor({3, 3}, 0.1, 2.0);

  // C = A^-1 A = I built through solve, against inv(A) * A built explicitly.
  Tape ts;
  NodeId leaf_s = ts.input(a0);
  GradientMap gs = ts.backward(weighted(ts, ops::solve_left(ts, leaf_s, leaf_s), u));

  Tape ti;
  NodeId leaf_i = ti.input(a0);
  GradientMap gi = ti.backward(weighted(ti, ops::matmul(ti, ops::inv(ti, leaf_i), leaf_i), u));

  CHECK(max_abs_diff(gs.at(leaf_s), gi.at(leaf_i)) < 1e-9);
}

TEST_CASE("solve ops match the oracle") {
  Rng rng(57);
  ComplexTensor u = rng.tensor({3, 2}, 0.1, 2.0);
  auto left = [&](Tape& t, const std::vector<NodeId>& ids) {
    return weighted(t, ops::solve_left(t, ids[0], ids[1]), u);
  };
  CHECK(gradcheck::check(left, {gradcheck::LeafSpec{well_conditioned(rng, 3), false, false},
                                gradcheck::LeafSpec{rng.tensor({3, 2}), false, false}})
            .max_rel_err < 1e-5);
  ComplexTensor u2 = rng.tensor({2, 3}, 0.1, 2.0);
  auto right = [&](Tape& t, const std::vector<NodeId>& ids) {
    return weighted(t, ops::solve_right(t, ids[0], ids[1]), u2);
  };
  CHECK(gradcheck::check(right, {gradcheck::LeafSpec{rng.tensor({2, 3}), false, false},
                                 gradcheck::LeafSpec{well_conditioned(rng, 3), false, false}})
            .max_rel_err < 1e-5);
}

TEST_CASE("solve_right with identity divisor") {
  Rng rng(58);
  ComplexTensor g = rng.tensor({2, 3});
  ComplexTensor c = rng.tensor({2, 3});
  auto [ga, gb] = solve_right_bwd(g, ComplexTensor::identity(3), c);
  CHECK(max_abs_diff(ga, g) < 1e-12);
  ComplexTensor expected_gb = bfgrad::neg(matmul_fwd(mat_hermitian(c), g));
  CHECK(max_abs_diff(gb, expected_gb) < 1e-12);
}

TEST_CASE("cholesky forward factorizes and guards its domain") {
  Rng rng(59);
  ComplexTensor a = hermitian_pd(rng, 3);
  ComplexTensor l = cholesky_fwd(a);
  ComplexTensor rebuilt = matmul_fwd(l, mat_hermitian(l));
  CHECK(max_abs_diff(rebuilt, a) < 1e-10 * a.max_abs());

  ComplexTensor not_hermitian = rng.tensor({3, 3});
  CHECK_THROWS_AS(cholesky_fwd(not_hermitian), std::domain_error);
  ComplexTensor negative({2, 2}, {-1.0, 0.0, 0.0, 1.0});
  CHECK_THROWS_AS(cholesky_fwd(negative), std::domain_error);
}

TEST_CASE("cholesky of the identity with identity cotangent gives half identity") {
  ComplexTensor identity = ComplexTensor::identity(3);
  ComplexTensor out = cholesky_bwd(identity, identity);
  ComplexTensor expected = scale(identity, 0.5);
  CHECK(max_abs_diff(out, expected) < 1e-14);
}

TEST_CASE("1x1 cholesky gradient is the square-root derivative") {
  ComplexTensor a({1, 1}, {cdouble{4.0, 0.0}});
  ComplexTensor l = cholesky_fwd(a);
  CHECK(l[0].real() == Approx(2.0));
  ComplexTensor out = cholesky_bwd(ComplexTensor({1, 1}, {cdouble{1.0, 0.0}}), l);
  CHECK(out[0].real() == Approx(0.25));
}

TEST_CASE("cholesky gradient is hermitian and matches the manifold oracle") {
  Rng rng(60);
  for (int k = 0; k < 10; ++k) {
    ComplexTensor a = hermitian_pd(rng, 3);
    ComplexTensor u = rng.tensor({3, 3}, 0.1, 2.0);
    auto build = [&](Tape& t, const std::vector<NodeId>& ids) {
      NodeId l = ops::cholesky(t, ids[0]);
      return ops::sum(t, ops::re(t, ops::mul(t, ops::mul(t, l, ops::conj(t, l)),
                                             t.constant(u))));
    };
    auto report = gradcheck::check(build, {gradcheck::LeafSpec{a, false, true}});
    CHECK(report.max_rel_err < 1e-5);

    Tape t;
    NodeId leaf = t.input(a);
    NodeId l = ops::cholesky(t, leaf);
    GradientMap g = t.backward(ops::sum(t, ops::re(t, ops::mul(t, l, ops::conj(t, l)))));
    ComplexTensor grad = g.at(leaf);
    CHECK(max_abs_diff(grad, mat_hermitian(grad)) < 1e-12 * std::max(1.0, grad.max_abs()));
  }
}

TEST_CASE("eig forward sorts by descending real part and satisfies the factorization") {
  Rng rng(61);
  ComplexTensor phi = scale(rng.gaussian_tensor({3, 3}), 2.0);
  EigPair pair = eig_fwd(phi);
  CHECK(pair.values[0].real() >= pair.values[1].real());
  CHECK(pair.values[1].real() >= pair.values[2].real());
  // Phi W = W diag(lambda)
  ComplexTensor lhs = matmul_fwd(phi, pair.vectors);
  ComplexTensor diag = ComplexTensor::zeros({3, 3});
  for (std::size_t i = 0; i < 3; ++i) diag[i * 3 + i] = pair.values[i];
  ComplexTensor rhs = matmul_fwd(pair.vectors, diag);
  CHECK(max_abs_diff(lhs, rhs) < 1e-10 * phi.max_abs());
  // unit-norm columns
  for (std::size_t c = 0; c < 3; ++c) {
    double n = 0.0;
    for (std::size_t r = 0; r < 3; ++r) n += std::norm(pair.vectors[r * 3 + c]);
    CHECK(std::sqrt(n) == Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("eig rejects degenerate spectra naming the gap") {
  ComplexTensor repeated({2, 2}, {2.0, 0.0, 0.0, 2.0});
  try {
    eig_fwd(repeated);
    FAIL("expected a domain error");
  } catch (const std::domain_error& e) {
    CHECK(std::string(e.what()).find("gap") != std::string::npos);
  }
}

TEST_CASE("eigenvalue-only cotangent reduces to the classic sensitivity") {
  Rng rng(62);
  ComplexTensor phi = scale(rng.gaussian_tensor({3, 3}), 2.0);
  EigPair pair = eig_fwd(phi);
  ComplexTensor g_values = ComplexTensor::vector({1.0, 0.0, 0.0});
  ComplexTensor grad = eig_bwd(ComplexTensor{}, g_values, pair.vectors, pair.values);
  // W^-H diag(e_0) W^H computed explicitly.
  ComplexTensor diag = ComplexTensor::zeros({3, 3});
  diag[0] = 1.0;
  ComplexTensor wh = mat_hermitian(pair.vectors);
  ComplexTensor expected = matmul_fwd(solve_left_fwd(wh, diag), wh);
  CHECK(max_abs_diff(grad, expected) < 1e-10);
}

TEST_CASE("hermitian input makes the magnitude extension vanish") {
  Rng rng(63);
  for (int k = 0; k < 5; ++k) {
    ComplexTensor phi = hermitian_pd(rng, 3);
    EigPair pair = eig_fwd(phi);
    ComplexTensor g_vec = rng.tensor({3, 3}, 0.1, 2.0);
    ComplexTensor with = eig_bwd(g_vec, ComplexTensor{}, pair.vectors, pair.values, true);
    ComplexTensor without = eig_bwd(g_vec, ComplexTensor{}, pair.vectors, pair.values, false);
    CHECK(max_abs_diff(with, without) < 1e-10 * std::max(1.0, with.max_abs()));
    ComplexTensor ext = eig_extension_term(g_vec, pair.vectors, pair.values);
    CHECK(ext.max_abs() < 1e-10 * std::max(1.0, with.max_abs()));
  }
}

TEST_CASE("non-hermitian eig gradient needs the extension term") {
  Rng rng(64);
  ComplexTensor phi = scale(rng.gaussian_tensor({3, 3}), 2.0);
  std::vector<ComplexTensor> us;
  for (int c = 0; c < 3; ++c) us.push_back(rng.tensor({3, 1}, 0.1, 2.0));
  auto build = [&](bool extension) {
    return [&, extension](Tape& t, const std::vector<NodeId>& ids) {
      ops::EigNodes pair = ops::eig(t, ids[0], extension);
      NodeId j = 0;
      for (std::size_t c = 0; c < 3; ++c) {
        NodeId col = ops::phase_normalize(t, ops::column(t, pair.vectors, c));
        NodeId term = ops::sum(t, ops::re(t, ops::mul(t, t.constant(us[c]), col)));
        j = (c == 0) ? term : ops::add(t, j, term);
      }
      return j;
    };
  };
  gradcheck::LeafSpec leaf{phi, false, false};
  auto with = gradcheck::check(build(true), {leaf});
  auto without = gradcheck::check(build(false), {leaf});
  CHECK(with.max_rel_err < 1e-4);
  CHECK(without.max_rel_err > 1e-2);
}

TEST_CASE("phase_normalize") {
  Tape t;
  NodeId w = t.input(ComplexTensor({2, 1}, {cdouble{0.0, 1.0}, cdouble{1.0, 0.0}}));
  NodeId out = ops::phase_normalize(t, w);
  CHECK(std::abs(t.value(out)[0] - cdouble{1.0, 0.0}) < 1e-14);
  CHECK(std::abs(t.value(out)[1] - cdouble{0.0, -1.0}) < 1e-14);

  // Already real-positive first entry: unchanged.
  NodeId v = t.input(ComplexTensor({2, 1}, {cdouble{2.0, 0.0}, cdouble{0.5, 0.5}}));
  NodeId same = ops::phase_normalize(t, v);
  CHECK(max_abs_diff(t.value(same), t.value(v)) < 1e-14);

  NodeId zero_first = t.input(ComplexTensor({2, 1}, {cdouble{0.0, 0.0}, cdouble{1.0, 0.0}}));
  CHECK_THROWS_AS(ops::phase_normalize(t, zero_first), std::domain_error);
}

TEST_CASE("phase_normalize gradient matches the oracle") {
  Rng rng(65);
  ComplexTensor u = rng.tensor({3, 1}, 0.1, 2.0);
  auto build = [&](Tape& t, const std::vector<NodeId>& ids) {
    NodeId out = ops::phase_normalize(t, ids[0]);
    return ops::sum(t, ops::re(t, ops::mul(t, t.constant(u), out)));
  };
  for (int k = 0; k < 10; ++k) {
    auto report =
        gradcheck::check(build, {gradcheck::LeafSpec{rng.tensor({3, 1}, 0.3, 3.0), false, false}});
    CHECK(report.max_rel_err < 1e-5);
  }
}

// First-order product-rule check: d(AB) along (dA, dB) equals dA B + A dB.
TEST_CASE("matrix product rule holds to first order") {
  Rng rng(66);
  double eps = 1e-6;
  for (int k = 0; k < 10; ++k) {
    ComplexTensor a = rng.tensor({3, 3});
    ComplexTensor b = rng.tensor({3, 3});
    ComplexTensor da = rng.gaussian_tensor({3, 3});
    ComplexTensor db = rng.gaussian_tensor({3, 3});
    ComplexTensor plus = matmul_fwd(add(a, scale(da, eps)), add(b, scale(db, eps)));
    ComplexTensor minus = matmul_fwd(sub(a, scale(da, eps)), sub(b, scale(db, eps)));
    ComplexTensor fd = scale(sub(plus, minus), 1.0 / (2.0 * eps));
    ComplexTensor expected = add(matmul_fwd(da, b), matmul_fwd(a, db));
    CHECK(max_abs_diff(fd, expected) < 1e-7 * std::max(1.0, expected.max_abs()));
  }
}

// C diag(L) - diag(L) C equals the Hadamard product with the gap matrix.
TEST_CASE("commutator with a diagonal matrix is the gap Hadamard product") {
  Rng rng(67);
  std::size_t d = 4;
  ComplexTensor c = rng.tensor({d, d});
  ComplexTensor lambda = rng.tensor({d});
  EigGapMatrix gaps = eig_gaps(lambda, 0.0);
  ComplexTensor diag = ComplexTensor::zeros({d, d});
  for (std::size_t i = 0; i < d; ++i) diag[i * d + i] = lambda[i];
  ComplexTensor commutator = sub(matmul_fwd(c, diag), matmul_fwd(diag, c));
  ComplexTensor expected = hadamard(gaps.differences, c);
  CHECK(max_abs_diff(commutator, expected) < 1e-12 * std::max(1.0, expected.max_abs()));
  // E is antisymmetric.
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      CHECK(std::abs(gaps.differences[i * d + j] + gaps.differences[j * d + i]) < 1e-15);
}

// Factorize, rebuild W diag(L) W^-1, and push a cotangent through: it must
// come back unchanged.
TEST_CASE("eig reconstruction returns the cotangent unchanged") {
  Rng rng(68);
  for (std::size_t d : {3ul, 4ul}) {
    for (int k = 0; k < 5; ++k) {
      ComplexTensor phi = scale(rng.gaussian_tensor({d, d}), 2.0);
      Tape t;
      NodeId leaf = t.input(phi);
      ops::EigNodes pair = ops::eig(t, leaf);
      NodeId rebuilt = ops::matmul(
          t, ops::matmul(t, pair.vectors, ops::diag_embed(t, pair.values)),
          ops::inv(t, pair.vectors));
      CHECK(max_abs_diff(t.value(rebuilt), phi) < 1e-8 * std::max(1.0, phi.max_abs()));
      ComplexTensor seed = rng.tensor({d, d}, 0.1, 2.0);
      GradientMap g = t.backward_with_seed(rebuilt, seed);
      ComplexTensor back = g.at(leaf);
      double scale_ref = seed.max_abs();
      CHECK(max_abs_diff(back, seed) < 1e-8 * scale_ref);
    }
  }
}

TEST_CASE("eig gap matrix inverse guards small gaps") {
  ComplexTensor lambda = ComplexTensor::vector({{1.0, 0.0}, {1.0 + 1e-12, 0.0}});
  CHECK_THROWS_AS(eig_gaps(lambda, 1e-8), std::domain_error);
}

TEST_CASE("transpose is an index shuffle with a matching adjoint") {
  Rng rng(69);
  ComplexTensor a = rng.tensor({2, 3});
  ComplexTensor at = transpose_fwd(a);
  CHECK(at.rows() == 3);
  CHECK(at.cols() == 2);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 3; ++j) CHECK(at[j * 2 + i] == a[i * 3 + j]);
}
