#pragma once

// Factorizations P = d_psi^{A,*} d_phi: assembly, necessary conditions,
// and construction of the antisymmetric part of A.

#include "susyfact/extcalc.hpp"
#include "susyfact/linsolve.hpp"
#include "susyfact/operator.hpp"

#include <algorithm>
#include <functional>
#include <optional>
#include <string>

namespace susyfact {

/// A = sym_part + antisym_part. When h_shift = s > 0 the stored matrix is
/// h^s times the actual one, which is then a Laurent polynomial in h; the
/// identity checked is h^s P = assemble(A, phi, psi).
struct SusyStructure {
  PolyMatrix A;
  Poly phi;
  Poly psi;
  PolyMatrix sym_part;
  PolyMatrix antisym_part;
  int h_shift = 0;

  static SusyStructure from_matrix(PolyMatrix A, Poly phi, Poly psi, int h_shift = 0) {
    SusyStructure s{A, std::move(phi), std::move(psi), susyfact::sym_part(A), susyfact::antisym_part(A), h_shift};
    return s;
  }
};

enum class SusyStatus { verified, constructed, necessary_condition_failed, construction_failed };

inline std::string to_string(SusyStatus s) {
  switch (s) {
    case SusyStatus::verified: return "verified";
    case SusyStatus::constructed: return "constructed";
    case SusyStatus::necessary_condition_failed: return "necessary_condition_failed";
    case SusyStatus::construction_failed: return "construction_failed";
  }
  return "unknown";
}

struct SusyVerdict {
  SusyStatus status = SusyStatus::construction_failed;
  std::optional<SusyStructure> structure;
  std::optional<Poly> failure_witness;
  std::string detail;
};

/// Normal form of u -> sum_j (-h d_j + d_j psi) sum_k A_kj (h d_k u + (d_k phi) u).
inline SecondOrderOperator assemble_factorization(const PolyMatrix& A, const Poly& phi, const Poly& psi,
                                                  bool semiclassical = true) {
  const auto& sp = phi.space();
  if (!same_space(sp, psi.space())) throw StructuralError("phi and psi live in different spaces");
  const auto n = sp->size();
  if (A.size() != n) throw StructuralError("A must be n x n");
  for (const auto& row : A)
    if (row.size() != n) throw StructuralError("A must be n x n");
  auto hp = [&](const Poly& p) { return semiclassical ? p.shift_h(1) : p.freeze_h(); };
  PolyVector a = gradient(phi), b = gradient(psi);
  PolyMatrix C = antisym_part(A);
  PolyVector Ata = mat_vec(transpose(A), a);
  PolyVector Ab = mat_vec(A, b);
  PolyVector v(n, Poly(sp));
  for (std::size_t k = 0; k < n; ++k) {
    Poly divC(sp);
    for (std::size_t j = 0; j < n; ++j) divC += C[j][k].partial(j);
    v[k] = hp(divC) - Ata[k] + Ab[k];
  }
  Poly v0 = -hp(divergence(Ata)) + dot(a, Ab);
  return {sp, sym_part(A), v, v0, semiclassical};
}

inline bool verify_structure(const SecondOrderOperator& P, const SusyStructure& s) {
  auto Q = assemble_factorization(s.A, s.phi, s.psi, P.semiclassical());
  if (!P.semiclassical() || s.h_shift == 0) return Q == P;
  auto shift = [&](const Poly& p) { return p.shift_h(s.h_shift); };
  PolyVector v = P.v();
  for (auto& e : v) e = shift(e);
  SecondOrderOperator hP(P.space(), map_entries(P.B(), shift), v, shift(P.v0()), true);
  return Q == hP;
}

namespace detail {

// Antisymmetric C with h div C - C-weighted gradient term equal to rhs:
//   h sum_j d_j C_jk - sum_j (d_j chi) C_jk = rhs_k,
// searched as a polynomial of bounded degree in x and h.
inline std::optional<PolyMatrix> solve_weighted_divergence(const PolyVector& rhs, const Poly& chi, bool semiclassical,
                                                           int max_degree, int max_h) {
  const auto& sp = chi.space();
  const auto n = sp->size();
  PolyVector gchi = gradient(chi);
  auto hp = [&](const Poly& p) { return semiclassical ? p.shift_h(1) : p.freeze_h(); };

  struct Unknown {
    std::size_t j, k;
    Monomial m;
  };
  std::vector<Unknown> unknowns;
  // Monomials of degree <= max_degree enumerated by recursion.
  std::vector<std::vector<int>> exps;
  std::vector<int> cur(n, 0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int left) {
    if (i == n) {
      exps.push_back(cur);
      return;
    }
    for (int e = 0; e <= left; ++e) {
      cur[i] = e;
      rec(i + 1, left - e);
    }
    cur[i] = 0;
  };
  rec(0, max_degree);
  const int hmax = semiclassical ? max_h : 0;
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = j + 1; k < n; ++k)
      for (const auto& e : exps)
        for (int hp_ = 0; hp_ <= hmax; ++hp_) unknowns.push_back({j, k, Monomial{e, hp_}});

  // Equation rows keyed by (component, monomial).
  std::map<std::pair<std::size_t, Monomial>, SparseRationalSystem::Row,
           std::function<bool(const std::pair<std::size_t, Monomial>&, const std::pair<std::size_t, Monomial>&)>>
      rows([](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first < b.first;
        return MonomialOrder{}(a.second, b.second);
      });
  auto contribute = [&](std::size_t comp, const Poly& p, std::size_t col) {
    for (const auto& [m, c] : p.terms()) {
      auto& row = rows[{comp, m}];
      auto [it, ins] = row.try_emplace(col, 0);
      it->second += c;
      if (it->second == 0) row.erase(it);
    }
  };
  for (std::size_t u = 0; u < unknowns.size(); ++u) {
    const auto& [j, k, m] = unknowns[u];
    Poly mono(sp);
    mono.add_term(m, 1);
    // C_jk = mono feeds component k; C_kj = -mono feeds component j.
    contribute(k, hp(mono.partial(j)) - gchi[j] * mono, u);
    contribute(j, -(hp(mono.partial(k)) - gchi[k] * mono), u);
  }
  std::map<std::pair<std::size_t, Monomial>, Rational, decltype(rows.key_comp())> rhs_terms(rows.key_comp());
  for (std::size_t k = 0; k < n; ++k)
    for (const auto& [m, c] : rhs[k].terms()) rhs_terms[{k, m}] = c;
  for (const auto& [key, c] : rhs_terms)
    if (!rows.count(key)) return std::nullopt;

  SparseRationalSystem sys(unknowns.size());
  for (auto& [key, row] : rows) {
    auto it = rhs_terms.find(key);
    Rational r = it == rhs_terms.end() ? Rational(0) : it->second;
    if (!sys.add_equation(row, r)) return std::nullopt;
  }
  auto x = sys.solve();
  if (!x) return std::nullopt;
  PolyMatrix C = zero_matrix(sp);
  for (std::size_t u = 0; u < unknowns.size(); ++u) {
    if ((*x)[u] == 0) continue;
    const auto& [j, k, m] = unknowns[u];
    C[j][k].add_term(m, (*x)[u]);
    C[k][j].add_term(m, -(*x)[u]);
  }
  return C;
}

inline bool divisible_by_h(const PolyVector& v) {
  for (const auto& p : v)
    if (p.min_h_order().value_or(1) < 1) return false;
  return true;
}

}  // namespace detail

/// Builds A = B + C with P = assemble(A, phi, psi), for P satisfying the kernel conditions.
inline SusyVerdict construct(const SecondOrderOperator& P, const Poly& phi, const Poly& psi) {
  const auto& sp = P.space();
  const bool sc = P.semiclassical();
  const auto n = P.dim();
  SusyVerdict out;
  SecondOrderOperator Q = exp_conjugate(P, phi, 1);
  if (!Q.v0().is_zero()) {
    out.status = SusyStatus::construction_failed;
    out.failure_witness = Q.v0();
    out.detail = "the conjugated operator does not annihilate constants";
    return out;
  }
  Poly chi = sc ? phi + psi : (phi + psi).freeze_h();
  PolyVector Bchi = mat_vec(P.B(), gradient(chi));
  PolyVector vt(n, Poly(sp));
  for (std::size_t k = 0; k < n; ++k) vt[k] = Q.v()[k] - Bchi[k];

  // Compatibility: sum_k (h d_k - d_k chi) vt_k = 0.
  {
    Poly comp(sp);
    for (std::size_t k = 0; k < n; ++k) comp += (sc ? vt[k].partial(k).shift_h(1) : vt[k].partial(k)) - gradient(chi)[k] * vt[k];
    if (!sc) comp = comp.freeze_h();
    if (!comp.is_zero()) {
      out.status = SusyStatus::construction_failed;
      out.failure_witness = comp;
      out.detail = "divergence compatibility fails";
      return out;
    }
  }

  std::optional<PolyMatrix> C;
  int shift = 0;
  const bool unweighted = chi.is_zero();
  if (unweighted) {
    PolyVector target = vt;
    if (sc) {
      if (detail::divisible_by_h(vt)) {
        for (auto& e : target) e = e.shift_h(-1);
      } else {
        shift = 1;
      }
    }
    try {
      bool all_zero = std::all_of(target.begin(), target.end(), [](const Poly& p) { return p.is_zero(); });
      C = all_zero ? zero_matrix(sp) : antisym_matrix(homotopy_inverse_delta(vector_field(target, sp)));
    } catch (const StructuralError& e) {
      out.status = SusyStatus::construction_failed;
      out.detail = e.what();
      return out;
    }
  } else {
    int maxdeg = 0, maxh = 0;
    for (const auto& e : vt) {
      maxdeg = std::max(maxdeg, e.degree());
      maxh = std::max(maxh, e.max_h_order());
    }
    for (int s = 0; s <= (sc ? 1 : 0) && !C; ++s) {
      PolyVector rhs = vt;
      if (s)
        for (auto& e : rhs) e = e.shift_h(1);
      for (int D = 0; D <= maxdeg + 1 && !C; ++D) {
        C = detail::solve_weighted_divergence(rhs, chi, sc, D, maxh + s);
        if (C) shift = s;
      }
    }
    if (!C) {
      out.status = SusyStatus::construction_failed;
      out.detail = "no polynomial antisymmetric part within the degree bound";
      return out;
    }
  }

  PolyMatrix A = P.B();
  if (shift)
    for (auto& row : A)
      for (auto& e : row) e = e.shift_h(shift);
  A = add(A, *C);
  auto S = SusyStructure::from_matrix(A, sc ? phi : phi.freeze_h(), sc ? psi : psi.freeze_h(), shift);
  if (!verify_structure(P, S)) {
    out.status = SusyStatus::construction_failed;
    out.detail = "factorization identity check failed";
    return out;
  }
  out.status = SusyStatus::constructed;
  out.structure = std::move(S);
  return out;
}

inline SusyVerdict check_necessary(const SecondOrderOperator& P, const Poly& phi, const Poly& psi) {
  SusyVerdict out;
  auto k1 = kernel_test(P, phi);
  if (!k1.vanishes) {
    out.status = SusyStatus::necessary_condition_failed;
    out.failure_witness = k1.residual;
    out.detail = "P(exp(-phi/h)) != 0";
    return out;
  }
  auto k2 = kernel_test(adjoint(P), psi);
  if (!k2.vanishes) {
    out.status = SusyStatus::necessary_condition_failed;
    out.failure_witness = k2.residual;
    out.detail = "P*(exp(-psi/h)) != 0";
    return out;
  }
  out = construct(P, phi, psi);
  if (out.status == SusyStatus::constructed) out.status = SusyStatus::verified;
  return out;
}

}  // namespace susyfact
