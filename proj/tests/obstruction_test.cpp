#include "susyfact/obstruction.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace susyfact;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

ChainConfig unequal_chain() {
  auto cfg = default_chain();
  cfg.deltaW = cfg.var('x', 1) * cfg.var('x', 2).pow(3) * Rational(1, 10);
  return cfg;
}

/// Random polynomial homogeneous of degree k in w2 with polynomial w1 coefficients.
Poly random_graded(const ChainConfig& cfg, int k, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> c(-3, 3), e(0, 2), pick(0, 2);
  const auto w1 = cfg.block(1), w2 = cfg.block(2);
  Poly p(cfg.space());
  for (int t = 0; t < 3; ++t) {
    std::vector<int> ex(cfg.space()->size(), 0);
    for (int r = 0; r < k; ++r) ex[w2[static_cast<std::size_t>(pick(rng))]]++;
    ex[w1[static_cast<std::size_t>(pick(rng))]] += e(rng);
    p += Poly::monomial(cfg.space(), ex, 0, c(rng));
  }
  return p;
}

}  // namespace

TEST_CASE("graded residual examples") {
  auto cfg = unequal_chain();
  auto rhs = weight_rhs(cfg).homogeneous_components("w2");
  REQUIRE(rhs.size() == 1);
  CHECK(rhs.begin()->first == 3);

  auto zero = graded_residual(cfg, {});
  REQUIRE(zero.size() == 1);
  CHECK(zero.at(3) == -rhs.at(3));
  CHECK(graded_lhs(cfg, {}).empty());

  Poly x2 = cfg.var('x', 2), y2 = cfg.var('y', 2), z2 = cfg.var('z', 2);
  Poly psi2 = x2 * z2 * cfg.var('y', 1) + y2 * y2 * Rational(1, 3) - z2 * z2 * cfg.var('x', 1).pow(2);
  auto g = graded_lhs(cfg, {{2, psi2}});
  auto nu = nu_field(cfg);
  Poly dz = psi2.partial(cfg.idx('z', 2));
  CHECK(g.at(2) == nu.apply(psi2) + dz * dz * (cfg.gamma * cfg.alpha2 / 2));

  CHECK_THROWS_AS(graded_lhs(cfg, {{2, psi2 + x2}}), StructuralError);
}

TEST_CASE("graded parts sum to the full equation") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 6; ++trial) {
    auto cfg = unequal_chain();
    if (trial % 2) cfg.deltaW = cfg.var('x', 1).pow(2) * cfg.var('x', 2).pow(4) - cfg.var('x', 2).pow(4);
    std::map<int, Poly> psi;
    Poly total(cfg.space());
    for (int k = 0; k <= 3; ++k) {
      psi[k] = random_graded(cfg, k, rng);
      total += psi[k];
    }
    Poly sum(cfg.space());
    for (const auto& [mu, p] : graded_lhs(cfg, psi)) {
      CHECK(p.is_homogeneous_in("w2", mu));
      sum += p;
    }
    CHECK(sum == weight_lhs(cfg, total));

    // Left minus right side is the Hamilton-Jacobi symbol on the graph of d psi.
    Poly res(cfg.space());
    for (const auto& [mu, p] : graded_residual(cfg, psi)) res += p;
    Poly hp = hamiltonian_p(cfg);
    const auto N = cfg.space()->size();
    Poly sub = hp;
    for (std::size_t k = 0; k < N; ++k) sub = sub.substitute(N + k, total.partial(k).embed(hp.space()));
    CHECK(sub == res.embed(hp.space()));
  }
}

TEST_CASE("substitution identity") {
  auto cfg = unequal_chain();
  auto nu = nu_field(cfg);
  Poly rhs16(cfg.space());
  for (int j = 1; j <= 2; ++j)
    rhs16 += cfg.var('y', j) * cfg.deltaW.partial(cfg.idx('x', j)) * (Rational(2) / cfg.alpha(j));
  CHECK(rhs16 == weight_rhs(cfg));
  Poly left = rhs16 - nu.apply(cfg.deltaW * (Rational(2) / cfg.alpha1));
  Rational f = Rational(2) / cfg.alpha2 - Rational(2) / cfg.alpha1;
  CHECK(left == cfg.var('y', 2) * cfg.deltaW.partial(cfg.idx('x', 2)) * f);
}

TEST_CASE("eigencoordinates of the second block") {
  auto cfg = unequal_chain();
  auto ec = eigencoords_w2(cfg);
  auto ref = cubic_roots(1);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(ec.lambdas[i] - ref[i]) < 1e-10);
  CHECK(std::abs(ec.lambdas[0] - std::conj(ec.lambdas[1])) < 1e-12);

  Poly x2 = cfg.var('x', 2), y2 = cfg.var('y', 2), z2 = cfg.var('z', 2);
  Poly p = y2 * x2 * x2 * 3 - z2.pow(3) + x2 * y2 * z2 * Rational(1, 2);
  auto w = to_omega(p, ec);
  // Real input: swapping the conjugate pair conjugates the coefficient.
  for (const auto& [a, c] : w) {
    MultiIndex b = a;
    std::swap(b[0], b[1]);
    CHECK(std::abs(w.at(b) - std::conj(c)) < 1e-12);
  }
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int t = 0; t < 10; ++t) {
    Eigen::VectorXd w2(3);
    w2 << U(rng), U(rng), U(rng);
    State full(cfg.space()->size(), 0.0);
    for (long i = 0; i < 3; ++i) full[ec.vars[static_cast<std::size_t>(i)]] = w2(i);
    Eigen::VectorXcd om = ec.L * w2.cast<cplx>();
    CHECK(std::abs(eval_omega(w, om) - p.evaluate(full, 0.0)) < 1e-12);
    // nu_2(omega^alpha) = (lambda . alpha) omega^alpha.
    Eigen::VectorXcd dom = ec.L * (ec.N2 * w2).cast<cplx>();
    for (MultiIndex a : {MultiIndex{3, 0, 0}, MultiIndex{1, 1, 1}, MultiIndex{0, 2, 1}}) {
      cplx val = 1, deriv = 0;
      for (int k = 0; k < 3; ++k) val *= std::pow(om(k), a[static_cast<std::size_t>(k)]);
      for (int k = 0; k < 3; ++k)
        if (a[static_cast<std::size_t>(k)]) deriv += val * static_cast<double>(a[static_cast<std::size_t>(k)]) / om(k) * dom(k);
      CHECK(std::abs(deriv - lambda_dot(ec.lambdas, a) * val) < 1e-12);
    }
  }
}

TEST_CASE("scalar transport calibration") {
  Bump b{1.0, 2.0, 1.0};
  auto g = [&](double t) { return cplx(b(t), 0.0); };
  auto sol = transport_ode(1.0, g, 0.0, 4.0, 0.0, 0.01);
  using boost::math::quadrature::gauss_kronrod;
  double K = gauss_kronrod<double, 61>::integrate([&](double s) { return std::exp(s) * b(s); }, 1.0, 2.0, 10, 1e-14);
  for (std::size_t k = 0; k < sol.t.size(); ++k)
    if (sol.t[k] > 2) CHECK(std::abs(sol.u[k] - K * std::exp(-sol.t[k])) < 1e-8);
  auto z = transport_ode(cplx(0.5, 1.0), [](double) { return cplx(0); }, 0.0, 5.0, 0.0);
  for (const auto& u : z.u) CHECK(u == cplx(0));
  CHECK(b(1.5) == 1.0);
  CHECK(b(0.9) == 0.0);
  CHECK(b(1.2) > 0);
}

TEST_CASE("obstruction on the bundled instance") {
  auto cfg = unequal_chain();
  auto h = heteroclinic_gamma1(cfg);
  Perturbation pert;
  pert.homog = cfg.var('x', 2).pow(3);
  auto rep = transport_solve(cfg, pert, h);
  CHECK(rep.lambda_dot_alpha.real() > 0);
  CHECK(rep.verdict == Verdict::nonsmooth_at_saddle);
  CHECK(rep.nearest_integer_distance > 1e-3);
  CHECK(rep.tail_rate_rel_error < 0.05);
  CHECK(rep.tail_constancy < 1e-6);
  CHECK(std::abs(rep.forced_constant - rep.forced_constant_quad) < 1e-6 * std::abs(rep.forced_constant));
  CHECK(std::abs(rep.exponent - rep.lambda_dot_alpha / rep.mu1) < 1e-14);
  int len = 0;
  for (int a : rep.alpha0) len += a;
  CHECK(len == 3);

  ObstructionOptions sad;
  sad.branch = Branch::saddle;
  CHECK(transport_solve(cfg, pert, h, sad).verdict == Verdict::blowup_at_minimum);

  // Amplitude only rescales the solution.
  auto big = pert;
  big.bump.amp = 1e-3;
  auto rb = transport_solve(cfg, big, h);
  CHECK(rb.alpha0 == rep.alpha0);
  CHECK(rb.verdict == rep.verdict);
  CHECK_THAT(rb.tail_rate_fit, WithinRel(rep.tail_rate_fit, 1e-9));

  auto bad = pert;
  bad.bump = Bump{0.8, 1.2, 1.0};
  CHECK_THROWS_AS(transport_solve(cfg, bad, h), StructuralError);
  bad = pert;
  bad.homog = cfg.var('x', 2).pow(2);
  bad.m = 2;
  CHECK_THROWS_AS(transport_solve(cfg, bad, h), StructuralError);
}

TEST_CASE("equal temperatures remove the obstruction") {
  auto cfg = unequal_chain();
  cfg.alpha2 = cfg.alpha1;
  auto h = heteroclinic_gamma1(cfg);
  Perturbation pert;
  pert.homog = cfg.var('x', 2).pow(3);
  auto rep = transport_solve(cfg, pert, h);
  CHECK(rep.rhs_zero);
  CHECK(rep.verdict == Verdict::inconclusive);
  Poly F = cfg.var('y', 2) * cfg.deltaW.partial(cfg.idx('x', 2)) * (Rational(2) / cfg.alpha2 - Rational(2) / cfg.alpha1);
  CHECK(F.is_zero());
}

TEST_CASE("invariant subspace of the Hamilton flow") {
  auto cfg = unequal_chain();
  State start(cfg.space()->size(), 0.0);
  start[cfg.idx('x', 1)] = 0.6;
  start[cfg.idx('y', 1)] = 0.1;
  start[cfg.idx('z', 1)] = 0.4;
  auto rep = invariant_subspace_check(cfg, start);
  CHECK(rep.symbolic_zero);
  CHECK(rep.max_drift < 1e-9);
  CHECK(rep.max_deviation_from_nu1 < 1e-8);
  cfg.deltaW = cfg.var('x', 1) * cfg.var('x', 2).pow(2);
  CHECK_THROWS_AS(invariant_subspace_check(cfg, start), StructuralError);
}

TEST_CASE("vanishing of the lower hierarchy") {
  auto cfg = default_chain();
  cfg.deltaW = cfg.var('x', 1).pow(2) * cfg.var('x', 2).pow(5);
  auto h = heteroclinic_gamma1(cfg);
  auto zero = vanishing_hierarchy_check(cfg, {}, h);
  CHECK(zero.symbolic_ok);
  CHECK(zero.max_riccati < 1e-10);
  CHECK(zero.max_linear < 1e-10);
  auto pert = vanishing_hierarchy_check(cfg, {}, h, 1e-3);
  CHECK(pert.max_riccati > 1e-6);
  CHECK(pert.max_linear > 1e-6);
  Poly psi2 = cfg.var('z', 2).pow(2);
  CHECK(!vanishing_hierarchy_check(cfg, {{2, psi2}}, h).symbolic_ok);
}
