#pragma once

// Second-order operators in the normal form
//   P = -sum h d_j B_jk h d_k + sum v_j h d_j + v0

#include "susyfact/poly.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace susyfact {

using PolyMatrix = std::vector<std::vector<Poly>>;
using PolyVector = std::vector<Poly>;

inline PolyMatrix zero_matrix(const SpacePtr& sp) {
  return PolyMatrix(sp->size(), PolyVector(sp->size(), Poly(sp)));
}
inline PolyMatrix identity_matrix(const SpacePtr& sp, const Rational& s = 1) {
  auto M = zero_matrix(sp);
  for (std::size_t i = 0; i < sp->size(); ++i) M[i][i] = Poly::constant(sp, s);
  return M;
}
inline PolyVector zero_vector(const SpacePtr& sp) { return PolyVector(sp->size(), Poly(sp)); }

inline PolyVector gradient(const Poly& f) {
  PolyVector g;
  for (std::size_t i = 0; i < f.space()->size(); ++i) g.push_back(f.partial(i));
  return g;
}
inline Poly dot(const PolyVector& a, const PolyVector& b) {
  Poly s(a.at(0).space());
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}
inline PolyVector mat_vec(const PolyMatrix& M, const PolyVector& x) {
  PolyVector r(M.size(), Poly(x.at(0).space()));
  for (std::size_t i = 0; i < M.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) r[i] += M[i][j] * x[j];
  return r;
}
inline PolyMatrix transpose(const PolyMatrix& M) {
  PolyMatrix T = M;
  for (std::size_t i = 0; i < M.size(); ++i)
    for (std::size_t j = 0; j < M.size(); ++j) T[i][j] = M[j][i];
  return T;
}
inline PolyMatrix sym_part(const PolyMatrix& M) {
  PolyMatrix S = M;
  const Rational half(1, 2);
  for (std::size_t i = 0; i < M.size(); ++i)
    for (std::size_t j = 0; j < M.size(); ++j) S[i][j] = (M[i][j] + M[j][i]) * half;
  return S;
}
inline PolyMatrix antisym_part(const PolyMatrix& M) {
  PolyMatrix S = M;
  const Rational half(1, 2);
  for (std::size_t i = 0; i < M.size(); ++i)
    for (std::size_t j = 0; j < M.size(); ++j) S[i][j] = (M[i][j] - M[j][i]) * half;
  return S;
}
inline PolyMatrix add(const PolyMatrix& a, const PolyMatrix& b) {
  PolyMatrix r = a;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) r[i][j] += b[i][j];
  return r;
}
inline PolyMatrix map_entries(const PolyMatrix& M, const std::function<Poly(const Poly&)>& fn) {
  PolyMatrix r = M;
  for (auto& row : r)
    for (auto& e : row) e = fn(e);
  return r;
}
inline bool is_symmetric(const PolyMatrix& M) {
  for (std::size_t i = 0; i < M.size(); ++i)
    for (std::size_t j = i + 1; j < M.size(); ++j)
      if (!(M[i][j] == M[j][i])) return false;
  return true;
}

class SecondOrderOperator {
 public:
  SecondOrderOperator(SpacePtr space, PolyMatrix B, PolyVector v, Poly v0, bool semiclassical = true)
      : space_(std::move(space)), B_(std::move(B)), v_(std::move(v)), v0_(std::move(v0)), semiclassical_(semiclassical) {
    const auto n = space_->size();
    if (B_.size() != n || v_.size() != n) throw StructuralError("operator coefficient dimensions do not match the space");
    for (const auto& row : B_)
      if (row.size() != n) throw StructuralError("B must be square");
    auto chk = [&](const Poly& p) {
      if (!same_space(p.space(), space_)) throw StructuralError("operator coefficient lives in another space");
    };
    for (const auto& row : B_)
      for (const auto& e : row) chk(e);
    for (const auto& e : v_) chk(e);
    chk(v0_);
    if (!is_symmetric(B_)) throw StructuralError("B must be symmetric");
    if (!semiclassical_) {
      B_ = map_entries(B_, [](const Poly& p) { return p.freeze_h(); });
      for (auto& e : v_) e = e.freeze_h();
      v0_ = v0_.freeze_h();
    }
  }

  const SpacePtr& space() const { return space_; }
  const PolyMatrix& B() const { return B_; }
  const PolyVector& v() const { return v_; }
  const Poly& v0() const { return v0_; }
  bool semiclassical() const { return semiclassical_; }
  std::size_t dim() const { return space_->size(); }

  /// Multiplication by h^k, or the identity when h is frozen to 1.
  Poly hp(const Poly& p, int k = 1) const { return semiclassical_ ? p.shift_h(k) : p.freeze_h(); }

  bool operator==(const SecondOrderOperator& o) const {
    return same_space(space_, o.space_) && semiclassical_ == o.semiclassical_ && B_ == o.B_ && v_ == o.v_ &&
           v0_ == o.v0_;
  }

  /// First coefficient that differs from another operator, or nullopt.
  std::optional<std::string> first_difference(const SecondOrderOperator& o) const {
    if (!same_space(space_, o.space_)) return "variable spaces differ";
    if (semiclassical_ != o.semiclassical_) return "semiclassical flags differ";
    for (std::size_t i = 0; i < dim(); ++i)
      for (std::size_t j = i; j < dim(); ++j)
        if (!(B_[i][j] == o.B_[i][j]))
          return "B[" + space_->name(i) + "," + space_->name(j) + "]: " + B_[i][j].to_string() + " vs " +
                 o.B_[i][j].to_string();
    for (std::size_t i = 0; i < dim(); ++i)
      if (!(v_[i] == o.v_[i]))
        return "v[" + space_->name(i) + "]: " + v_[i].to_string() + " vs " + o.v_[i].to_string();
    if (!(v0_ == o.v0_)) return "v0: " + v0_.to_string() + " vs " + o.v0_.to_string();
    return std::nullopt;
  }

  SecondOrderOperator operator+(const SecondOrderOperator& o) const {
    PolyVector v = v_;
    for (std::size_t i = 0; i < dim(); ++i) v[i] += o.v_[i];
    return {space_, add(B_, o.B_), v, v0_ + o.v0_, semiclassical_};
  }
  SecondOrderOperator scaled(const Rational& s) const {
    PolyVector v = v_;
    for (auto& e : v) e *= s;
    return {space_, map_entries(B_, [&](const Poly& p) { return p * s; }), v, v0_ * s, semiclassical_};
  }

 private:
  SpacePtr space_;
  PolyMatrix B_;
  PolyVector v_;
  Poly v0_;
  bool semiclassical_;
};

inline Poly apply(const SecondOrderOperator& P, const Poly& f) {
  if (!same_space(P.space(), f.space())) throw StructuralError("apply: spaces differ");
  const auto n = P.dim();
  Poly r = P.v0() * f;
  std::vector<Poly> hdf;
  for (std::size_t k = 0; k < n; ++k) hdf.push_back(P.hp(f.partial(k)));
  for (std::size_t j = 0; j < n; ++j) {
    Poly inner(P.space());
    for (std::size_t k = 0; k < n; ++k) inner += P.B()[j][k] * hdf[k];
    r -= P.hp(inner.partial(j));
    r += P.v()[j] * hdf[j];
  }
  return P.semiclassical() ? r : r.freeze_h();
}

inline Poly divergence(const PolyVector& v) {
  Poly s(v.at(0).space());
  for (std::size_t j = 0; j < v.size(); ++j) s += v[j].partial(j);
  return s;
}

inline SecondOrderOperator adjoint(const SecondOrderOperator& P) {
  PolyVector v = P.v();
  for (auto& e : v) e = -e;
  return {P.space(), P.B(), v, P.v0() - P.hp(divergence(P.v())), P.semiclassical()};
}

/// e^{s phi/h} o P o e^{-s phi/h} in normal form.
inline SecondOrderOperator exp_conjugate(const SecondOrderOperator& P, const Poly& phi, int sign = 1) {
  if (sign != 1 && sign != -1) throw StructuralError("sign must be +1 or -1");
  if (!same_space(P.space(), phi.space())) throw StructuralError("exp_conjugate: spaces differ");
  const auto n = P.dim();
  PolyVector a = gradient(P.semiclassical() ? phi : phi.freeze_h());
  if (sign < 0)
    for (auto& e : a) e = -e;
  PolyVector Ba = mat_vec(P.B(), a);
  PolyVector v = P.v();
  for (std::size_t k = 0; k < n; ++k) v[k] += Ba[k] * Rational(2);
  Poly v0 = P.v0() - dot(P.v(), a) - dot(a, Ba) + P.hp(divergence(Ba));
  return {P.space(), P.B(), v, v0, P.semiclassical()};
}

struct KernelTestReport {
  Poly residual;
  bool vanishes = false;
  std::optional<int> leading_h_order;
};

inline KernelTestReport kernel_test(const SecondOrderOperator& P, const Poly& phi) {
  KernelTestReport r{exp_conjugate(P, phi, 1).v0(), false, std::nullopt};
  r.vanishes = r.residual.is_zero();
  r.leading_h_order = r.residual.min_h_order();
  return r;
}

/// Dual coordinate name: x.. -> xi.., y.. -> eta.., z.. -> zeta.., else p_name.
inline std::string dual_name(const std::string& v) {
  switch (v[0]) {
    case 'x': return "xi" + v.substr(1);
    case 'y': return "eta" + v.substr(1);
    case 'z': return "zeta" + v.substr(1);
    default: return "p_" + v;
  }
}

/// Phase space over a base space: base variables followed by their duals.
inline SpacePtr phase_space(const SpacePtr& base) {
  std::vector<std::string> names = base->names();
  for (const auto& v : base->names()) names.push_back(dual_name(v));
  std::vector<VarSpace::Block> blocks = base->blocks();
  const auto n = base->size();
  for (const auto& b : base->blocks()) {
    VarSpace::Block d{"dual_" + b.name, {}};
    for (auto i : b.vars) d.vars.push_back(i + n);
    blocks.push_back(std::move(d));
  }
  return VarSpace::make(std::move(names), std::move(blocks));
}

struct Symbols {
  SpacePtr phase;
  Poly p_re;  // sum B xi xi + v0 (h^0 parts)
  Poly p_im;  // sum v xi
  Poly q;     // real symbol: sum B Xi Xi + sum v Xi - v0
};

inline Symbols symbols(const SecondOrderOperator& P) {
  const auto n = P.dim();
  auto T = phase_space(P.space());
  auto lift = [&](const Poly& p) { return p.h_component(0).embed(T); };
  auto xi = [&](std::size_t k) { return Poly::variable(T, n + k); };
  Poly quad(T), lin(T);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k)
      if (!P.B()[j][k].is_zero()) quad += lift(P.B()[j][k]) * xi(j) * xi(k);
    if (!P.v()[j].is_zero()) lin += lift(P.v()[j]) * xi(j);
  }
  Poly v0 = lift(P.v0());
  return {T, quad + v0, lin, quad + lin - v0};
}

enum class EikonalKind { forward, adjoint };

inline Poly eikonal_residual(const SecondOrderOperator& P, const Poly& phi0, EikonalKind which) {
  if (!phi0.h_free()) throw StructuralError("eikonal phase must not depend on h");
  const auto n = P.dim();
  PolyVector g = gradient(phi0);
  Poly quad(P.space()), lin(P.space());
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = 0; k < n; ++k) quad += P.B()[j][k].h_component(0) * g[j] * g[k];
    lin += P.v()[j].h_component(0) * g[j];
  }
  Poly v0 = P.v0().h_component(0);
  return which == EikonalKind::forward ? quad + lin - v0 : -quad + lin + v0;
}

}  // namespace susyfact
