// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include "susyfact/io.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>

using namespace susyfact;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

Poly random_poly(const SpacePtr& sp, std::mt19937_64& rng, int max_deg, int terms) {
  std::uniform_int_distribution<int> c(-4, 4), den(1, 3);
  Poly p(sp);
  for (int t = 0; t < terms; ++t) {
    std::vector<int> e(sp->size());
    int left = max_deg;
    for (auto& x : e) {
      std::uniform_int_distribution<int> d(0, left);
      x = d(rng);
      left -= x;
    }
    std::shuffle(e.begin(), e.end(), rng);
    p += Poly::monomial(sp, e, 0, make_rational(c(rng), den(rng)));
  }
  return p;
}

ChainConfig bundled_unequal() {
  auto cfg = default_chain();
  cfg.deltaW = cfg.var('x', 1) * cfg.var('x', 2).pow(3) * Rational(1, 10);
  return cfg;
}

/// Hand-expanded chain operator after conjugation by phi: per block
/// B_zz = gamma a/2, v0 += (gamma a/2)(((z-x)/a)^2 - h/a), drift y d_x - (dW + x - z) d_y.
SecondOrderOperator chain_oracle(const ChainConfig& cfg, const Rational& a1, const Rational& a2) {
  const auto& cs = cfg.space();
  PolyMatrix B = zero_matrix(cs);
  PolyVector v(cs->size(), Poly(cs));
  Poly v0(cs);
  for (int j = 1; j <= 2; ++j) {
    const Rational a = j == 1 ? a1 : a2;
    Poly x = cfg.var('x', j), y = cfg.var('y', j), z = cfg.var('z', j);
    Poly c = (z - x) * (Rational(1) / a);
    B[cfg.idx('z', j)][cfg.idx('z', j)] = Poly::constant(cs, cfg.gamma * a / 2);
    v0 += (c * c - Poly::hbar(cs, 1) * (Rational(1) / a)) * (cfg.gamma * a / 2);
    v[cfg.idx('x', j)] = y;
    v[cfg.idx('y', j)] = -(cfg.W().partial(cfg.idx('x', j)) + x - z);
  }
  return {cs, B, v, v0};
}

// 1. (gamma/2)(-h^2 Delta + |dV|^2 - h Delta V) from A = (gamma/2) I, phi = psi = V.
Outcome witten() {
  Outcome o;
  for (std::size_t n : {1u, 2u})
    for (int which = 0; which < 2; ++which)
      for (Rational g : {Rational(1), Rational(3, 2)}) {
        auto sp = witten_space(n);
        Poly V(sp);
        for (std::size_t i = 0; i < n; ++i) {
          Poly x = Poly::variable(sp, i);
          V += which ? (x * x - Poly::constant(sp, 1)).pow(2) * Rational(1, 4) : x * x * Rational(1, 2);
        }
        Poly gradsq(sp), lap(sp);
        for (std::size_t i = 0; i < n; ++i) {
          gradsq += V.partial(i).pow(2);
          lap += V.partial(i).partial(i);
        }
        SecondOrderOperator expected(sp, identity_matrix(sp, g / 2), zero_vector(sp), (gradsq - lap.shift_h(1)) * (g / 2));
        auto got = assemble_factorization(identity_matrix(sp, g / 2), V, V);
        o.require(got == expected, "n=" + std::to_string(n) + " V#" + std::to_string(which));
        o.require(make_witten(V, g).conjugated == expected, "bundled conjugation n=" + std::to_string(n));
      }
  return o;
}

// 2. K = y h d_x - V' h d_y + (gamma/2)(-h^2 d_y^2 + y^2 - h).
Outcome kfp() {
  Outcome o;
  auto sp = kfp_space(1);
  Poly x = Poly::variable(sp, 0), y = Poly::variable(sp, 1);
  Poly V = (x * x - Poly::constant(sp, 1)).pow(2) * Rational(1, 4);
  const Rational g = 2;
  PolyMatrix A = zero_matrix(sp);
  A[0][1] = Poly::constant(sp, Rational(1, 2));
  A[1][0] = Poly::constant(sp, Rational(-1, 2));
  A[1][1] = Poly::constant(sp, g / 2);
  Poly phi = y * y * Rational(1, 2) + V;
  PolyMatrix B = zero_matrix(sp);
  B[1][1] = Poly::constant(sp, g / 2);
  SecondOrderOperator expected(sp, B, {y, -V.partial(0)}, (y * y - Poly::hbar(sp, 1)) * (g / 2));
  o.require(assemble_factorization(A, phi, phi) == expected, "assembled operator differs");
  o.require(make_kfp(V, g).conjugated == expected, "bundled conjugation differs");
  return o;
}

// 3. Equal temperatures and decoupled chains.
Outcome chains() {
  Outcome o;
  auto eq = bundled_unequal();
  eq.alpha2 = eq.alpha1;
  auto be = make_chain(eq);
  o.require(assemble_factorization(chain_equal_temperature_A(eq), be.phi0, be.phi0) == chain_oracle(eq, 1, 1),
            "equal temperature");
  auto dec = default_chain();
  auto bd = make_chain(dec);
  o.require(assemble_factorization(chain_decoupled_A(dec), bd.phi0, bd.phi0) == chain_oracle(dec, 1, 2), "decoupled");
  return o;
}

// 4. Kernel conditions with unequal temperatures.
Outcome breakage() {
  Outcome o;
  auto cfg = bundled_unequal();
  auto b = make_chain(cfg);
  Poly phi0 = chain_phi0(cfg);
  Poly F = cfg.var('y', 2) * cfg.deltaW.partial(cfg.idx('x', 2)) * (Rational(2) / cfg.alpha2 - Rational(2) / cfg.alpha1);
  auto r0 = kernel_test(b.conjugated, phi0);
  auto r1 = kernel_test(b.conjugated, phi0 + cfg.deltaW * (Rational(2) / cfg.alpha1));
  o.require(!r0.vanishes && !r1.vanishes, "a candidate passed");
  o.require(!F.is_zero(), "right side vanished");
  // phi0 leaves the full source 2 d_x deltaW . d_y phi0; the substitution reduces it to F.
  o.require(r0.residual == weight_rhs(cfg), "phi0 residual is not the source term");
  o.require(r1.residual == F, "substituted residual differs from the predicted term");
  o.require(r0.residual - nu_field(cfg).apply(cfg.deltaW * (Rational(2) / cfg.alpha1)) == F, "substitution identity");
  return o;
}

// 5. Homotopy inverse and construction on random divergence-free fields.
Outcome round_trip() {
  Outcome o;
  std::mt19937_64 rng(2024);
  int ok = 0;
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t n = 2 + static_cast<std::size_t>(trial % 3);
    std::vector<std::string> names;
    for (std::size_t i = 1; i <= n; ++i) names.push_back("x" + std::to_string(i));
    auto sp = VarSpace::make(names);
    MultiVector G0(sp, 2);
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = j + 1; k < n; ++k) G0.add({j, k}, random_poly(sp, rng, 4, 3));
    MultiVector v = delta(G0).scaled(Rational(-1, 2));
    if (v.is_zero()) {
      ++ok;
      continue;
    }
    MultiVector G = homotopy_inverse_delta(v);
    bool good = delta(G) == v.scaled(Rational(-2));
    SecondOrderOperator P(sp, identity_matrix(sp), components(v), Poly(sp), trial % 2 == 0);
    auto r = construct(P, Poly(sp), Poly(sp));
    good = good && r.status == SusyStatus::constructed && verify_structure(P, *r.structure);
    ok += good;
  }
  o.require(ok == 50, std::to_string(ok) + "/50 passed");
  return o;
}

// 6. Cubic spectrum over [-10, 10] and the critical point of F.
Outcome cubic() {
  Outcome o;
  double worst = 0, sum_err = 0;
  int mismatches = 0;
  for (int i = 0; i < 200; ++i) {
    double w = -10 + 20.0 * i / 199;
    auto roots = cubic_roots(w);
    cplx s = 0;
    for (const auto& l : roots) {
      worst = std::max(worst, cubic_residual(w, l));
      s += l;
    }
    sum_err = std::max(sum_err, std::abs(s - 1.0));
    RootClass expect = w > 0 ? RootClass::all_re_positive : w < 0 ? RootClass::one_negative : RootClass::one_zero;
    mismatches += classify_roots(roots) != expect;
  }
  mismatches += classify_roots(0.0) != RootClass::one_zero;
  auto [m, Fm] = F_critical_point();
  o.require(worst < 1e-10, "residual " + detail::format_double(worst));
  o.require(sum_err < 1e-10, "root sum error " + detail::format_double(sum_err));
  o.require(mismatches == 0, std::to_string(mismatches) + " classification mismatches");
  o.require(std::abs(m - 1.5652) < 1e-3 && Fm < 0, "m = " + detail::format_double(m));
  return o;
}

// 7. Cascade identities, heteroclinic orbit, monotonicity and the quintic probe.
Outcome flow() {
  Outcome o;
  for (auto [a1, a2] : {std::pair<int, int>{1, 2}, {2, 3}}) {
    auto cfg = default_chain();
    cfg.alpha1 = a1;
    cfg.alpha2 = a2;
    o.require(cascade_identities_exact(cfg), "cascade identities");
  }
  auto cfg = default_chain();
  auto h = heteroclinic_gamma1(cfg);
  o.require(h.start_residual < 1e-6 && h.end_residual < 1e-6, "heteroclinic endpoints");
  o.require(phi0_monotonicity(cfg, h).strictly_increasing, "phi0 not strictly increasing");
  auto pt = [&](double a, double b, double c, double d, double e, double f) {
    State s(cfg.space()->size(), 0.0);
    s[cfg.idx('x', 1)] = a;
    s[cfg.idx('y', 1)] = b;
    s[cfg.idx('z', 1)] = c;
    s[cfg.idx('x', 2)] = d;
    s[cfg.idx('y', 2)] = e;
    s[cfg.idx('z', 2)] = f;
    return s;
  };
  auto grid = log_grid(1e-5, 1e-2, 8);
  std::vector<std::pair<State, double>> cases{{pt(0.5, 0.1, 0.3, 0.2, 0.1, 0.0), 1},
                                              {pt(0.5, 0.3, 0.5, 0.2, -0.1, 0.2), 3},
                                              {pt(0.5, 0, 0.5, 0.2, 0, 0.2), 5}};
  for (const auto& [p, s] : cases) {
    auto r = quintic_bound_probe(cfg, p, grid);
    o.require(r.positive && std::abs(r.slope - s) <= 0.3, "slope " + detail::format_double(r.slope));
  }
  return o;
}

// 8. Transport obstruction on the bundled instance.
Outcome obstruction() {
  Outcome o;
  auto cfg = bundled_unequal();
  auto h = heteroclinic_gamma1(cfg);
  Perturbation pert;
  pert.homog = cfg.var('x', 2).pow(3);
  auto rep = transport_solve(cfg, pert, h);
  o.require(rep.lambda_dot_alpha.real() > 0, "Re(lambda.alpha) <= 0");
  o.require(rep.tail_rate_rel_error < 0.05, "tail rate error " + detail::format_double(rep.tail_rate_rel_error));
  o.require(rep.nearest_integer_distance > 1e-3, "exponent near an integer");
  o.require(rep.verdict == Verdict::blowup_at_minimum || rep.verdict == Verdict::nonsmooth_at_saddle, "no verdict");
  State start(cfg.space()->size(), 0.0);
  start[cfg.idx('x', 1)] = 0.6;
  start[cfg.idx('y', 1)] = 0.1;
  start[cfg.idx('z', 1)] = 0.4;
  o.require(invariant_subspace_check(cfg, start).symbolic_zero, "invariant subspace");
  auto eq = cfg;
  eq.alpha2 = eq.alpha1;
  auto he = heteroclinic_gamma1(eq);
  auto re = transport_solve(eq, pert, he);
  Poly F = eq.var('y', 2) * eq.deltaW.partial(eq.idx('x', 2)) * (Rational(2) / eq.alpha2 - Rational(2) / eq.alpha1);
  o.require(F.is_zero() && re.rhs_zero, "equal temperatures leave a source");
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// 9. Every CLI command twice with the same seed, compared byte for byte.
Outcome determinism() {
  Outcome o;
  const std::string cli = SUSYFACT_CLI, conf = SUSYFACT_CONFIG_DIR;
  fs::path dir = fs::temp_directory_path() / ("susyfact_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const std::vector<std::pair<std::string, std::string>> cmds{
      {"check", "check --operator " + conf + "/witten.json --phi 2V"},
      {"check_chain", "check --config " + conf + "/chain_unequal.json --phi \"phi0 + 2*deltaW/alpha1\""},
      {"construct", "construct --operator " + conf + "/kfp.json"},
      {"verify", "verify-models"},
      {"spectral", "spectral --config " + conf + "/chain_unequal.json"},
      {"flow", "flow --config " + conf + "/chain_unequal.json"},
      {"obstruct", "obstruct --config " + conf + "/chain_unequal.json"}};
  for (const auto& [name, args] : cmds) {
    std::string first[2];
    for (int rep = 0; rep < 2; ++rep) {
      fs::path out = dir / (name + "_" + std::to_string(rep) + ".json");
      std::string cmd = cli + " " + args + " --seed 11 --out " + out.string() + " > /dev/null 2>&1";
      int st = std::system(cmd.c_str());
      if (!WIFEXITED(st) || WEXITSTATUS(st) > 1) o.require(false, name + " did not run");
      fs::path csv = out;
      csv.replace_extension(".csv");
      first[rep] = slurp(out) + "\n--\n" + (fs::exists(csv) ? slurp(csv) : "");
    }
    o.require(!first[0].empty() && first[0] == first[1], name + " outputs differ");
  }
  fs::remove_all(dir);
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* title;
    double limit_s;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> all{{1, "Witten factorization", 1, witten},
                                   {2, "KFP factorization", 1, kfp},
                                   {3, "chain equal-temperature and decoupled", 5, chains},
                                   {4, "necessary-condition breakage", 5, breakage},
                                   {5, "construction round trip", 30, round_trip},
                                   {6, "cubic spectrum", 1, cubic},
                                   {7, "flow", 60, flow},
                                   {8, "obstruction", 120, obstruction},
                                   {9, "determinism", 0, determinism}};
  int failures = 0;
  for (const auto& c : all) {
    auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0 && secs >= c.limit_s) o.require(false, "runtime over " + detail::format_double(c.limit_s) + " s");
    char line[160];
    std::snprintf(line, sizeof line, "criterion %d %s (%.3f s) %s", c.id, o.pass ? "PASS" : "FAIL", secs, c.title);
    std::cout << line << (o.detail.empty() ? "" : ": " + o.detail) << "\n";
    failures += !o.pass;
  }
  return failures ? 1 : 0;
}
