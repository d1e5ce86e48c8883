#pragma once

// Witten, Kramers-Fokker-Planck and two-bath oscillator chain models.

#include "susyfact/susy.hpp"

#include <optional>
#include <string>
#include <vector>

namespace susyfact {

struct ModelBundle {
  std::string name;
  SecondOrderOperator op;  // un-conjugated generator
  Poly phi0;
  SecondOrderOperator conjugated;
  std::optional<SusyStructure> reference_susy;
};

inline std::vector<std::string> indexed(const std::string& base, std::size_t n) {
  if (n == 1) return {base};
  std::vector<std::string> r;
  for (std::size_t i = 1; i <= n; ++i) r.push_back(base + std::to_string(i));
  return r;
}

inline SpacePtr witten_space(std::size_t n) {
  auto xs = indexed("x", n);
  return VarSpace::make_named(xs, {{"x", xs}});
}

inline SpacePtr kfp_space(std::size_t n) {
  auto xs = indexed("x", n), ys = indexed("y", n);
  std::vector<std::string> all = xs;
  all.insert(all.end(), ys.begin(), ys.end());
  return VarSpace::make_named(all, {{"x", xs}, {"y", ys}});
}

/// Operator -(gamma/2) h d.(h d + 2 dV) with phi0 = V.
inline ModelBundle make_witten(const Poly& V, const Rational& gamma) {
  const auto& sp = V.space();
  const auto n = sp->size();
  PolyVector g = gradient(V);
  PolyVector v(n, Poly(sp));
  for (std::size_t j = 0; j < n; ++j) v[j] = g[j] * (-gamma);
  Poly v0 = divergence(g).shift_h(1) * (-gamma);
  SecondOrderOperator op(sp, identity_matrix(sp, gamma / 2), v, v0, true);
  auto conj = exp_conjugate(op, V, 1);
  auto ref = SusyStructure::from_matrix(identity_matrix(sp, gamma / 2), V, V);
  return {"witten", op, V, conj, ref};
}

/// V is a polynomial over kfp_space(n) depending on x only.
inline ModelBundle make_kfp(const Poly& V, const Rational& gamma) {
  const auto& sp = V.space();
  const auto n2 = sp->size();
  if (n2 % 2) throw StructuralError("KFP space must have equally many x and y variables");
  const auto n = n2 / 2;
  for (std::size_t i = n; i < n2; ++i)
    if (V.depends_on(i)) throw StructuralError("KFP potential must depend on x only");
  PolyMatrix B = zero_matrix(sp);
  PolyVector v(n2, Poly(sp));
  for (std::size_t i = 0; i < n; ++i) {
    Poly y = Poly::variable(sp, n + i);
    B[n + i][n + i] = Poly::constant(sp, gamma / 2);
    v[i] = y;
    v[n + i] = y * (-gamma) - V.partial(i);
  }
  Poly v0 = Poly::hbar(sp, 1) * (-gamma * Rational(static_cast<long>(n)));
  SecondOrderOperator op(sp, B, v, v0, true);
  Poly phi0 = V;
  for (std::size_t i = 0; i < n; ++i) phi0 += Poly::variable(sp, n + i).pow(2) * Rational(1, 2);
  auto conj = exp_conjugate(op, phi0, 1);
  PolyMatrix A = zero_matrix(sp);
  for (std::size_t i = 0; i < n; ++i) {
    A[i][n + i] = Poly::constant(sp, Rational(1, 2));
    A[n + i][i] = Poly::constant(sp, Rational(-1, 2));
    A[n + i][n + i] = Poly::constant(sp, gamma / 2);
  }
  return {"kfp", op, phi0, conj, SusyStructure::from_matrix(A, phi0, phi0)};
}

/// Variables ordered x (both oscillators), y, z; blocks w1 and w2 gather
/// (x_j, y_j, z_j) of oscillator j.
inline SpacePtr chain_space(std::size_t n) {
  auto name = [&](const char* b, int j, std::size_t i) {
    std::string s = std::string(b) + std::to_string(j);
    return n == 1 ? s : s + "_" + std::to_string(i + 1);
  };
  std::vector<std::string> all;
  std::vector<std::string> w1, w2;
  for (const char* b : {"x", "y", "z"}) {
    for (int j = 1; j <= 2; ++j)
      for (std::size_t i = 0; i < n; ++i) {
        all.push_back(name(b, j, i));
        (j == 1 ? w1 : w2).push_back(all.back());
      }
  }
  return VarSpace::make_named(all, {{"w1", w1}, {"w2", w2}});
}

struct ChainConfig {
  std::size_t n = 1;
  Poly W1, W2, deltaW;  // over chain_space(n)
  Rational alpha1 = 1, alpha2 = 2, gamma = 1;

  const SpacePtr& space() const { return W1.space(); }
  /// Index of coordinate i of kind 'x','y','z' for oscillator j (1 or 2).
  std::size_t idx(char kind, int j, std::size_t i = 0) const {
    std::size_t base = kind == 'x' ? 0 : kind == 'y' ? 2 * n : 4 * n;
    return base + static_cast<std::size_t>(j - 1) * n + i;
  }
  Poly var(char kind, int j, std::size_t i = 0) const { return Poly::variable(space(), idx(kind, j, i)); }
  const Rational& alpha(int j) const { return j == 1 ? alpha1 : alpha2; }
  Poly W0() const { return W1 + W2; }
  Poly W() const { return W1 + W2 + deltaW; }
  std::vector<std::size_t> block(int j) const {
    std::vector<std::size_t> r;
    for (char k : {'x', 'y', 'z'})
      for (std::size_t i = 0; i < n; ++i) r.push_back(idx(k, j, i));
    return r;
  }
};

namespace detail {

inline Rational determinant(std::vector<std::vector<Rational>> M) {
  const auto n = M.size();
  Rational det = 1;
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    while (p < n && M[p][c] == 0) ++p;
    if (p == n) return 0;
    if (p != c) {
      std::swap(M[p], M[c]);
      det = -det;
    }
    det *= M[c][c];
    for (std::size_t r = c + 1; r < n; ++r) {
      Rational f = M[r][c] / M[c][c];
      for (std::size_t k = c; k < n; ++k) M[r][k] -= f * M[c][k];
    }
  }
  return det;
}

}  // namespace detail

inline void validate(const ChainConfig& cfg) {
  if (cfg.alpha1 <= 0 || cfg.alpha2 <= 0 || cfg.gamma <= 0)
    throw StructuralError("alpha1, alpha2 and gamma must be positive");
  const auto& sp = cfg.space();
  if (!same_space(sp, cfg.W2.space()) || !same_space(sp, cfg.deltaW.space()))
    throw StructuralError("chain potentials must share the chain space");
  if (sp->size() != 6 * cfg.n) throw StructuralError("chain space dimension must be 6n");
  auto only = [&](const Poly& p, const std::vector<std::size_t>& allowed, const char* what) {
    for (std::size_t i = 0; i < sp->size(); ++i)
      if (p.depends_on(i) && std::find(allowed.begin(), allowed.end(), i) == allowed.end())
        throw StructuralError(std::string(what) + " depends on a disallowed variable '" + sp->name(i) + "'");
    if (!p.h_free()) throw StructuralError(std::string(what) + " must not depend on h");
  };
  std::vector<std::size_t> x1, x2, x;
  for (std::size_t i = 0; i < cfg.n; ++i) {
    x1.push_back(cfg.idx('x', 1, i));
    x2.push_back(cfg.idx('x', 2, i));
  }
  x = x1;
  x.insert(x.end(), x2.begin(), x2.end());
  only(cfg.W1, x1, "W1");
  only(cfg.W2, x2, "W2");
  only(cfg.deltaW, x, "deltaW");
  for (const auto& [m, c] : cfg.W2.terms())
    if (m.degree() != 2) throw StructuralError("W2 must be a quadratic form");
  std::vector<std::vector<Rational>> H(cfg.n, std::vector<Rational>(cfg.n));
  for (std::size_t a = 0; a < cfg.n; ++a)
    for (std::size_t b = 0; b < cfg.n; ++b) {
      auto c = cfg.W2.partial(x2[a]).partial(x2[b]).terms();
      H[a][b] = c.empty() ? Rational(0) : c.begin()->second;
    }
  for (std::size_t k = 1; k <= cfg.n; ++k) {
    std::vector<std::vector<Rational>> M(k, std::vector<Rational>(k));
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) M[a][b] = H[a][b];
    if (detail::determinant(M) <= 0) throw StructuralError("W2 must be positive definite");
  }
}

/// Bundled instance: n = 1, W1 = (x1^2-1)^2/4, W2 = x2^2/2, gamma = 1, alpha = (1, 2).
inline ChainConfig default_chain(Poly deltaW = Poly()) {
  ChainConfig c;
  c.n = 1;
  auto sp = chain_space(1);
  Poly x1 = Poly::variable(sp, "x1"), x2 = Poly::variable(sp, "x2");
  c.W1 = (x1 * x1 - Poly::constant(sp, 1)).pow(2) * Rational(1, 4);
  c.W2 = x2 * x2 * Rational(1, 2);
  c.deltaW = deltaW.space() ? deltaW : Poly(sp);
  return c;
}

/// phi0 = sum_j (y_j^2/2 + W_j + (x_j - z_j)^2/2) / alpha_j.
inline Poly chain_phi0(const ChainConfig& cfg) {
  Poly phi(cfg.space());
  for (int j = 1; j <= 2; ++j) {
    Poly s = j == 1 ? cfg.W1 : cfg.W2;
    for (std::size_t i = 0; i < cfg.n; ++i) {
      Poly d = cfg.var('x', j, i) - cfg.var('z', j, i);
      s += cfg.var('y', j, i).pow(2) * Rational(1, 2) + d * d * Rational(1, 2);
    }
    phi += s * (Rational(1) / cfg.alpha(j));
  }
  return phi;
}

/// The generator with baths at temperatures alpha_j h / 2.
inline SecondOrderOperator chain_operator(const ChainConfig& cfg) {
  const auto& sp = cfg.space();
  PolyMatrix B = zero_matrix(sp);
  PolyVector v(sp->size(), Poly(sp));
  Poly W = cfg.W();
  for (int j = 1; j <= 2; ++j)
    for (std::size_t i = 0; i < cfg.n; ++i) {
      auto xi = cfg.idx('x', j, i), yi = cfg.idx('y', j, i), zi = cfg.idx('z', j, i);
      Poly x = cfg.var('x', j, i), y = cfg.var('y', j, i), z = cfg.var('z', j, i);
      B[zi][zi] = Poly::constant(sp, cfg.gamma * cfg.alpha(j) / 2);
      v[xi] = y;
      v[yi] = -(W.partial(xi) + x - z);
      v[zi] = (z - x) * (-cfg.gamma);
    }
  Poly v0 = Poly::hbar(sp, 1) * (-cfg.gamma * Rational(static_cast<long>(2 * cfg.n)));
  return {sp, B, v, v0, true};
}

inline PolyMatrix chain_equal_temperature_A(const ChainConfig& cfg) {
  const auto& sp = cfg.space();
  PolyMatrix A = zero_matrix(sp);
  const Rational a2 = cfg.alpha1 / 2;
  for (int j = 1; j <= 2; ++j)
    for (std::size_t i = 0; i < cfg.n; ++i) {
      A[cfg.idx('x', j, i)][cfg.idx('y', j, i)] = Poly::constant(sp, a2);
      A[cfg.idx('y', j, i)][cfg.idx('x', j, i)] = Poly::constant(sp, -a2);
      A[cfg.idx('z', j, i)][cfg.idx('z', j, i)] = Poly::constant(sp, a2 * cfg.gamma);
    }
  return A;
}

inline PolyMatrix chain_decoupled_A(const ChainConfig& cfg) {
  const auto& sp = cfg.space();
  PolyMatrix A = zero_matrix(sp);
  for (int j = 1; j <= 2; ++j)
    for (std::size_t i = 0; i < cfg.n; ++i) {
      const Rational a2 = cfg.alpha(j) / 2;
      A[cfg.idx('x', j, i)][cfg.idx('y', j, i)] = Poly::constant(sp, a2);
      A[cfg.idx('y', j, i)][cfg.idx('x', j, i)] = Poly::constant(sp, -a2);
      A[cfg.idx('z', j, i)][cfg.idx('z', j, i)] = Poly::constant(sp, a2 * cfg.gamma);
    }
  return A;
}

inline ModelBundle make_chain(const ChainConfig& cfg) {
  validate(cfg);
  auto op = chain_operator(cfg);
  Poly phi0 = chain_phi0(cfg);
  const bool equal = cfg.alpha1 == cfg.alpha2;
  if (equal) phi0 += cfg.deltaW * (Rational(1) / cfg.alpha1);
  auto conj = exp_conjugate(op, phi0, 1);
  std::optional<SusyStructure> ref;
  if (equal) ref = SusyStructure::from_matrix(chain_equal_temperature_A(cfg), phi0, phi0);
  else if (cfg.deltaW.is_zero()) ref = SusyStructure::from_matrix(chain_decoupled_A(cfg), phi0, phi0);
  return {"chain", op, phi0, conj, ref};
}

/// The Hamilton-Jacobi symbol p(w, omega) of the perturbed weight equation.
inline Poly hamiltonian_p(const ChainConfig& cfg) {
  validate(cfg);
  const auto& sp = cfg.space();
  auto T = phase_space(sp);
  const auto N = sp->size();
  auto lift = [&](const Poly& p) { return p.embed(T); };
  auto dual = [&](std::size_t i) { return Poly::variable(T, N + i); };
  Poly phi0 = chain_phi0(cfg);
  Poly W0 = cfg.W0();
  Poly p(T);
  for (int j = 1; j <= 2; ++j)
    for (std::size_t i = 0; i < cfg.n; ++i) {
      auto xi = cfg.idx('x', j, i), yi = cfg.idx('y', j, i), zi = cfg.idx('z', j, i);
      Poly x = lift(cfg.var('x', j, i)), y = lift(cfg.var('y', j, i)), z = lift(cfg.var('z', j, i));
      Poly ddW = lift(cfg.deltaW.partial(xi));
      p += y * dual(xi) + (z - x) * dual(zi) * cfg.gamma - (lift(W0.partial(xi)) + x - z) * dual(yi);
      p += dual(zi).pow(2) * (cfg.gamma * cfg.alpha(j) / 2);
      p -= ddW * dual(yi) + ddW * lift(phi0.partial(yi)) * Rational(2);
    }
  return p;
}

struct ReferenceCheck {
  std::string model;
  bool pass = false;
  std::string detail;
};

inline ReferenceCheck check_reference(const ModelBundle& b) {
  if (!b.reference_susy) return {b.name, false, "no reference structure"};
  const auto& s = *b.reference_susy;
  auto Q = assemble_factorization(s.A, s.phi, s.psi, b.conjugated.semiclassical());
  auto diff = Q.first_difference(b.conjugated);
  if (diff) return {b.name, false, *diff};
  return {b.name, true, ""};
}

}  // namespace susyfact
