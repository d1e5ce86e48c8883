#include "susyfact/models.hpp"
#include "susyfact/susy.hpp"

#include <Eigen/Dense>

#include <catch_amalgamated.hpp>

#include <random>

using namespace susyfact;

namespace {

std::vector<ModelBundle> all_bundles() {
  std::vector<ModelBundle> out;
  auto s1 = witten_space(1), s2 = witten_space(2);
  Poly x = Poly::variable(s1, 0);
  out.push_back(make_witten(x * x * Rational(1, 2), 2));
  out.push_back(make_witten((x * x - Poly::constant(s1, 1)).pow(2) * Rational(1, 4), 1));
  Poly a = Poly::variable(s2, 0), b = Poly::variable(s2, 1);
  out.push_back(make_witten(a.pow(4) + a * b + b * b, Rational(3, 2)));
  auto k1 = kfp_space(1);
  Poly kx = Poly::variable(k1, "x");
  out.push_back(make_kfp(kx.pow(4) * Rational(1, 4) - kx * kx * Rational(1, 2), 2));
  auto k2 = kfp_space(2);
  out.push_back(make_kfp(Poly::variable(k2, "x1").pow(2) * Poly::variable(k2, "x2"), 3));
  auto cfg = default_chain();
  out.push_back(make_chain(cfg));
  cfg.deltaW = cfg.var('x', 1) * cfg.var('x', 2).pow(3) * Rational(1, 10);
  out.push_back(make_chain(cfg));
  cfg.alpha2 = cfg.alpha1;
  out.push_back(make_chain(cfg));
  return out;
}

}  // namespace

TEST_CASE("generators annihilate constants under the adjoint") {
  for (const auto& b : all_bundles()) {
    INFO(b.name);
    Poly one = Poly::constant(b.op.space(), 1);
    CHECK(apply(adjoint(b.op), one).is_zero());
    CHECK(b.conjugated == exp_conjugate(b.op, b.phi0, 1));
    if (b.reference_susy) CHECK(check_reference(b).pass);
  }
}

TEST_CASE("Witten bundle") {
  auto sp = witten_space(1);
  Poly x = Poly::variable(sp, "x");
  auto b = make_witten(x * x * Rational(1, 2), 2);
  // (-h d + x)(h d + x) = -h^2 d^2 + x^2 - h.
  SecondOrderOperator expect(sp, identity_matrix(sp), zero_vector(sp), x * x - Poly::hbar(sp, 1));
  CHECK(b.conjugated == expect);
  CHECK(kernel_test(b.op, b.phi0 * Rational(2)).vanishes);
  CHECK(!kernel_test(b.op, b.phi0).vanishes);
}

TEST_CASE("KFP bundle") {
  auto sp = kfp_space(2);
  Poly x1 = Poly::variable(sp, "x1"), x2 = Poly::variable(sp, "x2");
  Poly y1 = Poly::variable(sp, "y1"), y2 = Poly::variable(sp, "y2");
  Poly V = x1.pow(4) * Rational(1, 4) + x1 * x2 + x2 * x2;
  auto b = make_kfp(V, 2);
  // y h d_x - dV h d_y - h^2 Delta_y + y^2 - h n.
  PolyMatrix B = zero_matrix(sp);
  B[2][2] = B[3][3] = Poly::constant(sp, 1);
  PolyVector v{y1, y2, -V.partial(0), -V.partial(1)};
  SecondOrderOperator K(sp, B, v, y1 * y1 + y2 * y2 - Poly::hbar(sp, 1) * Rational(2));
  CHECK(b.conjugated == K);
  CHECK(kernel_test(b.op, b.phi0 * Rational(2)).vanishes);
  CHECK(check_reference(b).pass);
}

TEST_CASE("chain kernel conditions") {
  auto cfg = default_chain();
  auto b0 = make_chain(cfg);
  CHECK(kernel_test(b0.op, b0.phi0 * Rational(2)).vanishes);
  CHECK(b0.reference_susy);

  cfg.alpha1 = cfg.alpha2 = Rational(3, 2);
  cfg.deltaW = cfg.var('x', 1).pow(2) * cfg.var('x', 2) - cfg.var('x', 2).pow(3);
  auto be = make_chain(cfg);
  CHECK(be.phi0 == chain_phi0(cfg) + cfg.deltaW * (Rational(2, 3)));
  CHECK(kernel_test(be.op, be.phi0 * Rational(2)).vanishes);

  auto cu = default_chain();
  cu.deltaW = cu.var('x', 1) * cu.var('x', 2).pow(2);
  auto bu = make_chain(cu);
  CHECK(!bu.reference_susy);
  for (const Poly& cand : {bu.phi0, bu.phi0 + cu.deltaW * (Rational(2) / cu.alpha1)})
    CHECK(check_necessary(bu.conjugated, cand, Poly(cu.space())).status == SusyStatus::necessary_condition_failed);
}

TEST_CASE("Hamilton-Jacobi symbol") {
  auto cfg = default_chain();
  auto p0 = hamiltonian_p(cfg);
  const auto& T = p0.space();
  const auto N = cfg.space()->size();
  std::vector<std::size_t> duals;
  for (std::size_t i = 0; i < N; ++i) duals.push_back(N + i);
  CHECK(p0.restrict_zero(duals).is_zero());

  for (int m : {3, 4}) {
    cfg.deltaW = cfg.var('x', 1).pow(2) * cfg.var('x', 2).pow(m) - cfg.var('x', 2).pow(m) * Rational(1, 3);
    auto p = hamiltonian_p(cfg);
    std::vector<std::size_t> w2;
    for (auto i : cfg.block(2)) {
      w2.push_back(i);
      w2.push_back(N + i);
    }
    for (auto i : w2) CHECK(p.partial(i).restrict_zero(w2).is_zero());

    // p(w, omega) is the principal symbol of the generator at 2 d phi0 + omega.
    auto q = symbols(chain_operator(cfg)).q;
    Poly phi0 = chain_phi0(cfg);
    for (std::size_t k = 0; k < N; ++k)
      q = q.substitute(N + k, phi0.partial(k).embed(T) * Rational(2) + Poly::variable(T, N + k));
    CHECK(q == p);
  }
}

TEST_CASE("phi0 on the stationary subspace") {
  auto cfg = default_chain();
  cfg.alpha2 = 3;
  Poly phi0 = chain_phi0(cfg);
  const auto& sp = cfg.space();
  Poly r = phi0;
  for (int j = 1; j <= 2; ++j) {
    r = r.substitute(cfg.idx('z', j), cfg.var('x', j));
    r = r.substitute(cfg.idx('y', j), Poly(sp));
  }
  CHECK(r == cfg.W1 * (Rational(1) / cfg.alpha1) + cfg.W2 * (Rational(1) / cfg.alpha2));

  // Transverse Hessian in the y and (z - x) directions.
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> U(-2, 2);
  const long n = static_cast<long>(sp->size());
  for (int t = 0; t < 10; ++t) {
    std::vector<double> pt(sp->size(), 0.0);
    for (int j = 1; j <= 2; ++j) pt[cfg.idx('x', j)] = pt[cfg.idx('z', j)] = U(rng);
    Eigen::MatrixXd H(n, n);
    for (long a = 0; a < n; ++a)
      for (long c = 0; c < n; ++c)
        H(a, c) = phi0.partial(static_cast<std::size_t>(a)).partial(static_cast<std::size_t>(c)).evaluate(pt, 0.0);
    Eigen::MatrixXd Q = Eigen::MatrixXd::Zero(n, 4);
    int col = 0;
    for (int j = 1; j <= 2; ++j) {
      Q(static_cast<long>(cfg.idx('y', j)), col++) = 1;
      Q(static_cast<long>(cfg.idx('z', j)), col) = 1 / std::sqrt(2.0);
      Q(static_cast<long>(cfg.idx('x', j)), col++) = -1 / std::sqrt(2.0);
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Q.transpose() * H * Q);
    CHECK(es.eigenvalues().minCoeff() > 1e-10);
  }
  CHECK(eikonal_residual(make_chain(cfg).conjugated, phi0, EikonalKind::forward).is_zero());
}

TEST_CASE("chain configuration validation") {
  auto cfg = default_chain();
  cfg.alpha1 = -1;
  CHECK_THROWS_AS(make_chain(cfg), StructuralError);
  cfg = default_chain();
  cfg.gamma = 0;
  CHECK_THROWS_AS(make_chain(cfg), StructuralError);
  cfg = default_chain();
  cfg.W2 = -cfg.W2;
  CHECK_THROWS_AS(make_chain(cfg), StructuralError);
  cfg = default_chain();
  cfg.W2 = cfg.W2 + cfg.var('x', 2).pow(3);
  CHECK_THROWS_AS(make_chain(cfg), StructuralError);
  cfg = default_chain();
  cfg.W1 = cfg.W1 + cfg.var('x', 2);
  CHECK_THROWS_AS(make_chain(cfg), StructuralError);
  cfg = default_chain();
  cfg.deltaW = cfg.var('y', 1);
  CHECK_THROWS_AS(make_chain(cfg), StructuralError);
}

TEST_CASE("multi-oscillator chain") {
  ChainConfig cfg;
  cfg.n = 2;
  auto sp = chain_space(2);
  cfg.W1 = Poly(sp);
  cfg.W2 = Poly(sp);
  cfg.deltaW = Poly(sp);
  Poly a = Poly::variable(sp, "x1_1"), b = Poly::variable(sp, "x1_2");
  Poly c = Poly::variable(sp, "x2_1"), d = Poly::variable(sp, "x2_2");
  cfg.W1 = a.pow(4) + b.pow(4) - a * b;
  cfg.W2 = c * c + c * d + d * d;
  auto bundle = make_chain(cfg);
  CHECK(check_reference(bundle).pass);
  CHECK(kernel_test(bundle.op, bundle.phi0 * Rational(2)).vanishes);
  cfg.alpha2 = 1;
  cfg.deltaW = a * c * d;
  CHECK(check_reference(make_chain(cfg)).pass);
}
