#pragma once

// Polynomial differential forms and multivector fields on R^n.

#include "susyfact/poly.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <vector>

namespace susyfact {

using IndexTuple = std::vector<std::size_t>;

namespace detail {

inline bool strictly_increasing(const IndexTuple& I) {
  for (std::size_t k = 1; k < I.size(); ++k)
    if (I[k - 1] >= I[k]) return false;
  return true;
}

// Sign of the permutation sorting the concatenation I ++ J (both sorted,
// disjoint), i.e. the number of pairs (a in I, b in J) with a > b.
inline int shuffle_sign(const IndexTuple& I, const IndexTuple& J) {
  std::size_t inv = 0;
  for (auto a : I)
    for (auto b : J)
      if (a > b) ++inv;
  return inv % 2 ? -1 : 1;
}

inline IndexTuple complement(const IndexTuple& I, std::size_t n) {
  IndexTuple c;
  std::size_t p = 0;
  for (std::size_t j = 0; j < n; ++j) {
    if (p < I.size() && I[p] == j) {
      ++p;
      continue;
    }
    c.push_back(j);
  }
  return c;
}

}  // namespace detail

/// Sections of the k-th exterior power, keyed by strictly increasing index
/// tuples. Tag distinguishes forms (dx_I) from multivectors (d/dx_I).
template <class Tag>
class GradedSection {
 public:
  GradedSection(SpacePtr space, std::size_t degree) : space_(std::move(space)), degree_(degree) {
    if (degree_ > space_->size()) throw StructuralError("degree exceeds dimension");
  }

  const SpacePtr& space() const { return space_; }
  std::size_t degree() const { return degree_; }
  std::size_t dim() const { return space_->size(); }
  const std::map<IndexTuple, Poly>& coeffs() const { return coeffs_; }

  void add(const IndexTuple& I, const Poly& f) {
    if (I.size() != degree_ || !detail::strictly_increasing(I))
      throw StructuralError("index tuple must be strictly increasing of length equal to the degree");
    for (auto i : I)
      if (i >= dim()) throw StructuralError("index out of range");
    if (f.is_zero()) return;
    auto it = coeffs_.find(I);
    if (it == coeffs_.end()) {
      coeffs_.emplace(I, f);
      return;
    }
    it->second += f;
    if (it->second.is_zero()) coeffs_.erase(it);
  }

  Poly coeff(const IndexTuple& I) const {
    auto it = coeffs_.find(I);
    return it == coeffs_.end() ? Poly(space_) : it->second;
  }

  bool is_zero() const { return coeffs_.empty(); }

  GradedSection& operator+=(const GradedSection& o) {
    if (o.degree_ != degree_) throw StructuralError("degree mismatch");
    for (const auto& [I, f] : o.coeffs_) add(I, f);
    return *this;
  }
  GradedSection operator-() const {
    GradedSection r(space_, degree_);
    for (const auto& [I, f] : coeffs_) r.add(I, -f);
    return r;
  }
  GradedSection& operator-=(const GradedSection& o) { return *this += -o; }
  GradedSection scaled(const Rational& s) const {
    GradedSection r(space_, degree_);
    for (const auto& [I, f] : coeffs_) r.add(I, f * s);
    return r;
  }
  GradedSection scaled(const Poly& s) const {
    GradedSection r(space_, degree_);
    for (const auto& [I, f] : coeffs_) r.add(I, f * s);
    return r;
  }
  GradedSection map(const std::function<Poly(const Poly&)>& fn) const {
    GradedSection r(space_, degree_);
    for (const auto& [I, f] : coeffs_) r.add(I, fn(f));
    return r;
  }

  friend GradedSection operator+(GradedSection a, const GradedSection& b) { return a += b; }
  friend GradedSection operator-(GradedSection a, const GradedSection& b) { return a -= b; }
  bool operator==(const GradedSection& o) const { return degree_ == o.degree_ && coeffs_ == o.coeffs_; }

 private:
  SpacePtr space_;
  std::size_t degree_;
  std::map<IndexTuple, Poly> coeffs_;
};

struct FormTag {};
struct VectorTag {};
using FormField = GradedSection<FormTag>;
using MultiVector = GradedSection<VectorTag>;

inline FormField d(const FormField& w) {
  FormField r(w.space(), std::min(w.degree() + 1, w.dim()));
  if (w.degree() == w.dim()) return r;
  for (const auto& [I, f] : w.coeffs()) {
    for (std::size_t j = 0; j < w.dim(); ++j) {
      if (std::find(I.begin(), I.end(), j) != I.end()) continue;
      Poly df = f.partial(j);
      if (df.is_zero()) continue;
      IndexTuple J = I;
      J.insert(std::upper_bound(J.begin(), J.end(), j), j);
      int sign = detail::shuffle_sign({j}, I);
      r.add(J, sign > 0 ? df : -df);
    }
  }
  return r;
}

/// The divergence-type operator -sum_j d/dx_j o (dx_j contraction).
inline MultiVector delta(const MultiVector& X) {
  if (X.degree() == 0) throw StructuralError("delta needs degree >= 1");
  MultiVector r(X.space(), X.degree() - 1);
  for (const auto& [I, f] : X.coeffs()) {
    for (std::size_t p = 0; p < I.size(); ++p) {
      IndexTuple J = I;
      J.erase(J.begin() + static_cast<long>(p));
      Poly g = f.partial(I[p]);
      r.add(J, (p % 2) ? g : -g);
    }
  }
  return r;
}

/// Contraction with dx_1 ^ ... ^ dx_n: f d/dx_I -> eps(I, I^c) f dx_{I^c}.
inline FormField hodge(const MultiVector& X) {
  FormField r(X.space(), X.dim() - X.degree());
  for (const auto& [I, f] : X.coeffs()) {
    auto Ic = detail::complement(I, X.dim());
    r.add(Ic, detail::shuffle_sign(I, Ic) > 0 ? f : -f);
  }
  return r;
}

inline MultiVector hodge_inverse(const FormField& w) {
  MultiVector r(w.space(), w.dim() - w.degree());
  for (const auto& [J, g] : w.coeffs()) {
    auto Jc = detail::complement(J, w.dim());
    r.add(Jc, detail::shuffle_sign(Jc, J) > 0 ? g : -g);
  }
  return r;
}

/// Radial homotopy at the origin, K(w)(x) = int_0^1 t^{p-1} w_I(tx) (x contracted into dx_I) dt,
/// integrated exactly on monomials. Satisfies dK + Kd = id on forms of degree >= 1.
inline FormField radial_homotopy(const FormField& w) {
  if (w.degree() == 0) throw StructuralError("radial homotopy needs degree >= 1");
  const auto& sp = w.space();
  FormField r(sp, w.degree() - 1);
  const auto p = static_cast<long>(w.degree());
  for (const auto& [I, f] : w.coeffs()) {
    for (const auto& [m, c] : f.terms()) {
      const Rational weight = Rational(1) / Rational(m.degree() + p);
      for (std::size_t q = 0; q < I.size(); ++q) {
        Monomial mm = m;
        mm.exps[I[q]] += 1;
        IndexTuple J = I;
        J.erase(J.begin() + static_cast<long>(q));
        Poly t(sp);
        Rational cw = c * weight;
        if (q % 2) cw = -cw;
        t.add_term(mm, cw);
        r.add(J, t);
      }
    }
  }
  return r;
}

/// Error raised when the input does not satisfy delta v = 0.
class PreconditionError : public StructuralError {
 public:
  PreconditionError(const std::string& what, Poly residual) : StructuralError(what), residual_(std::move(residual)) {}
  const Poly& residual() const { return residual_; }

 private:
  Poly residual_;
};

/// For a divergence-free vector field v, returns a 2-vector G with
/// delta G = -2 v, built through the volume-form duality and the radial homotopy.
inline MultiVector homotopy_inverse_delta(const MultiVector& v) {
  if (v.degree() != 1) throw StructuralError("homotopy_inverse_delta expects a vector field");
  const auto& sp = v.space();
  MultiVector dv = delta(v);
  if (!dv.is_zero()) throw PreconditionError("vector field is not divergence free", dv.coeff({}));
  MultiVector zero(sp, std::min<std::size_t>(2, v.dim()));
  if (v.is_zero()) return zero;
  if (v.dim() < 2) throw StructuralError("no 2-vectors in dimension 1; a nonzero constant field is not exact");
  FormField w = hodge(v);
  MultiVector G0 = hodge_inverse(radial_homotopy(w));
  MultiVector back = delta(G0);
  Rational c;
  if (back == v) c = 1;
  else if (back == -v) c = -1;
  else throw StructuralError("homotopy residual check failed");
  MultiVector G = G0.scaled(Rational(-2) / c);
  if (!(delta(G) == v.scaled(Rational(-2)))) throw StructuralError("homotopy residual check failed");
  return G;
}

/// Antisymmetric matrix C with G = sum_{j,k} C_jk d_j ^ d_k.
inline std::vector<std::vector<Poly>> antisym_matrix(const MultiVector& G) {
  if (G.degree() != 2) throw StructuralError("antisym_matrix expects a 2-vector");
  const auto n = G.dim();
  std::vector<std::vector<Poly>> C(n, std::vector<Poly>(n, Poly(G.space())));
  const Rational half(1, 2);
  for (const auto& [I, g] : G.coeffs()) {
    C[I[0]][I[1]] = g * half;
    C[I[1]][I[0]] = g * (-half);
  }
  return C;
}

inline MultiVector two_vector(const std::vector<std::vector<Poly>>& C, const SpacePtr& sp) {
  MultiVector G(sp, 2);
  for (std::size_t j = 0; j < C.size(); ++j)
    for (std::size_t k = j + 1; k < C.size(); ++k) G.add({j, k}, C[j][k] - C[k][j]);
  return G;
}

inline MultiVector vector_field(const std::vector<Poly>& v, const SpacePtr& sp) {
  MultiVector X(sp, 1);
  for (std::size_t j = 0; j < v.size(); ++j) X.add({j}, v[j]);
  return X;
}

inline std::vector<Poly> components(const MultiVector& X) {
  if (X.degree() != 1) throw StructuralError("components expects a vector field");
  std::vector<Poly> v(X.dim(), Poly(X.space()));
  for (const auto& [I, f] : X.coeffs()) v[I[0]] = f;
  return v;
}

}  // namespace susyfact
