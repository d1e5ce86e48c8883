#pragma once

// Stationary points of the drift field, its linearization, and the cubic
// lambda^3 - lambda^2 + (1 + w) lambda - w = 0 governing the spectrum.

#include "susyfact/poly.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <vector>

namespace susyfact {

using cplx = std::complex<double>;

enum class RootClass { all_re_positive, one_zero, one_negative };

inline std::string to_string(RootClass c) {
  switch (c) {
    case RootClass::all_re_positive: return "all_re_positive";
    case RootClass::one_zero: return "one_zero";
    case RootClass::one_negative: return "one_negative";
  }
  return "unknown";
}

inline void sort_roots(std::vector<cplx>& r) {
  std::sort(r.begin(), r.end(), [](const cplx& a, const cplx& b) {
    if (a.real() != b.real()) return a.real() < b.real();
    return a.imag() < b.imag();
  });
}

/// Roots of sum_k c[k] t^k (c.back() != 0) via the companion matrix and a Newton polish.
inline std::vector<cplx> polynomial_roots(const std::vector<double>& c) {
  std::size_t deg = c.size() - 1;
  while (deg > 0 && c[deg] == 0.0) --deg;
  if (deg == 0) return {};
  Eigen::MatrixXd Cm = Eigen::MatrixXd::Zero(static_cast<long>(deg), static_cast<long>(deg));
  for (std::size_t i = 1; i < deg; ++i) Cm(static_cast<long>(i), static_cast<long>(i - 1)) = 1.0;
  for (std::size_t i = 0; i < deg; ++i) Cm(static_cast<long>(i), static_cast<long>(deg - 1)) = -c[i] / c[deg];
  Eigen::EigenSolver<Eigen::MatrixXd> es(Cm, false);
  std::vector<cplx> roots;
  for (long i = 0; i < es.eigenvalues().size(); ++i) roots.push_back(es.eigenvalues()(i));
  auto eval = [&](cplx t, cplx& dp) {
    cplx p = c[deg];
    dp = 0;
    for (std::size_t k = deg; k-- > 0;) {
      dp = dp * t + p;
      p = p * t + c[k];
    }
    return p;
  };
  for (auto& r : roots) {
    for (int it = 0; it < 3; ++it) {
      cplx dp;
      cplx p = eval(r, dp);
      if (std::abs(dp) < 1e-300) break;
      cplx nr = r - p / dp;
      cplx dq;
      if (std::abs(eval(nr, dq)) <= std::abs(p)) r = nr;
      else break;
    }
    // Real coefficients: snap round-off imaginary parts of isolated real roots.
    if (std::abs(r.imag()) < 1e-12 * std::max(1.0, std::abs(r.real()))) {
      cplx dp;
      cplx p_real = eval(cplx(r.real(), 0.0), dp);
      cplx dp2;
      if (std::abs(p_real) <= std::abs(eval(r, dp2)) * 10 + 1e-14) r = cplx(r.real(), 0.0);
    }
  }
  sort_roots(roots);
  return roots;
}

inline std::vector<cplx> cubic_roots(double w) { return polynomial_roots({-w, 1.0 + w, -1.0, 1.0}); }

inline double cubic_residual(double w, cplx l) { return std::abs(l * l * l - l * l + (1.0 + w) * l - w); }

inline RootClass classify_roots(const std::vector<cplx>& roots, double tol = 1e-10) {
  int zero = 0, neg = 0;
  for (const auto& r : roots) {
    if (std::abs(r) < tol) ++zero;
    else if (r.real() < -tol) ++neg;
  }
  if (zero) return RootClass::one_zero;
  if (neg) return RootClass::one_negative;
  return RootClass::all_re_positive;
}
inline RootClass classify_roots(double w) { return classify_roots(cubic_roots(w)); }

inline double F_of(double l) { return l / (1.0 - l) - l * l; }
inline double G_of(double l) { return 1.0 - 2.0 * l * (1.0 - l) * (1.0 - l); }

/// The critical point m > 1 of F, i.e. the root of G on (1, 2), and F(m).
inline std::pair<double, double> F_critical_point() {
  double a = 1.0, b = 2.0;
  for (int i = 0; i < 60 && b - a > 1e-6; ++i) {
    double c = 0.5 * (a + b);
    (G_of(c) > 0 ? a : b) = c;
  }
  double m = 0.5 * (a + b);
  for (int i = 0; i < 20; ++i) {
    double dG = -2.0 * (1.0 - m) * (1.0 - m) + 4.0 * m * (1.0 - m);
    double step = G_of(m) / dG;
    m -= step;
    if (std::abs(step) < 1e-15) break;
  }
  return {m, F_of(m)};
}

/// Real roots of a univariate polynomial in variable `var`.
inline std::vector<double> real_roots_1d(const Poly& p, std::size_t var, double tol = 1e-8) {
  std::vector<double> c(static_cast<std::size_t>(p.degree()) + 1, 0.0);
  for (const auto& [m, q] : p.terms()) {
    for (std::size_t i = 0; i < m.exps.size(); ++i)
      if (i != var && m.exps[i]) throw StructuralError("real_roots_1d: polynomial is not univariate");
    c[static_cast<std::size_t>(m.exps[var])] += q.get_d();
  }
  std::vector<double> out;
  for (const auto& r : polynomial_roots(c))
    if (std::abs(r.imag()) < tol * std::max(1.0, std::abs(r.real()))) out.push_back(r.real());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end(), [](double a, double b) { return std::abs(a - b) < 1e-9; }),
            out.end());
  return out;
}

/// Critical points of a separable W0 over the listed variables (others ignored).
inline std::vector<std::vector<double>> critical_points(const Poly& W0, const std::vector<std::size_t>& vars) {
  for (const auto& [m, c] : W0.terms()) {
    int used = 0;
    for (auto v : vars) used += m.exps[v] > 0;
    if (used > 1) throw StructuralError("critical_points supports separable potentials only");
  }
  std::vector<std::vector<double>> per;
  for (auto v : vars) {
    Poly d = W0.partial(v);
    if (d.is_zero()) throw StructuralError("potential is flat in a coordinate");
    per.push_back(real_roots_1d(d, v));
  }
  std::vector<std::vector<double>> out{{}};
  for (const auto& roots : per) {
    std::vector<std::vector<double>> next;
    for (const auto& pre : out)
      for (double r : roots) {
        auto q = pre;
        q.push_back(r);
        next.push_back(q);
      }
    out = std::move(next);
  }
  return out;
}

/// Jacobian of gamma (z-x) d_z + y d_x - (dW + x - z) d_y at a stationary point, in (x, y, z) blocks.
inline Eigen::MatrixXd linearization_N(const Eigen::MatrixXd& H, double gamma = 1.0) {
  if (gamma != 1.0) throw StructuralError("linearization_N is defined for gamma = 1 only");
  const long n = H.rows();
  Eigen::MatrixXd N = Eigen::MatrixXd::Zero(3 * n, 3 * n);
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  N.block(0, n, n, n) = I;
  N.block(n, 0, n, n) = -H - I;
  N.block(n, 2 * n, n, n) = I;
  N.block(2 * n, 0, n, n) = -gamma * I;
  N.block(2 * n, 2 * n, n, n) = gamma * I;
  return N;
}

inline std::vector<cplx> matrix_eigenvalues(const Eigen::MatrixXd& M) {
  Eigen::EigenSolver<Eigen::MatrixXd> es(M, false);
  std::vector<cplx> r;
  for (long i = 0; i < es.eigenvalues().size(); ++i) r.push_back(es.eigenvalues()(i));
  sort_roots(r);
  return r;
}

struct EigvecReport {
  bool defective = false;
  double max_y_error = 0, max_z_error = 0, max_x_error = 0;
  bool ok = true;
};

/// Checks y = lambda x, z = x/(1-lambda) and H x = F(lambda) x for every eigenpair of N.
inline EigvecReport eigvec_x_consistency(const Eigen::MatrixXd& N, const Eigen::MatrixXd& H, double tol = 1e-8) {
  const long n = H.rows();
  Eigen::EigenSolver<Eigen::MatrixXd> es(N, true);
  Eigen::MatrixXcd V = es.eigenvectors();
  EigvecReport rep;
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(V);
  const auto& s = svd.singularValues();
  if (s(s.size() - 1) < 1e-7 * s(0)) {
    rep.defective = true;
    return rep;
  }
  Eigen::MatrixXcd Hc = H.cast<cplx>();
  for (long k = 0; k < V.cols(); ++k) {
    cplx l = es.eigenvalues()(k);
    Eigen::VectorXcd v = V.col(k) / V.col(k).norm();
    Eigen::VectorXcd x = v.segment(0, n), y = v.segment(n, n), z = v.segment(2 * n, n);
    rep.max_y_error = std::max(rep.max_y_error, (y - l * x).norm());
    rep.max_z_error = std::max(rep.max_z_error, (z - x / (1.0 - l)).norm());
    cplx F = l / (1.0 - l) - l * l;
    rep.max_x_error = std::max(rep.max_x_error, (Hc * x - F * x).norm());
  }
  rep.ok = rep.max_y_error < tol && rep.max_z_error < tol && rep.max_x_error < tol;
  return rep;
}

struct CriticalPointReport {
  std::vector<double> x0;
  std::vector<double> hessian_eigs;
  Eigen::MatrixXd N;
  std::vector<cplx> lambdas;
  std::vector<RootClass> classification;
  std::optional<double> mu1;
};

/// Analysis at a stationary point (x0, 0, x0) of the drift for the potential W0 over vars.
inline CriticalPointReport analyze_critical_point(const Poly& W0, const std::vector<std::size_t>& vars,
                                                  const std::vector<double>& x0, double gamma = 1.0) {
  const long n = static_cast<long>(vars.size());
  std::vector<double> pt(W0.space()->size(), 0.0);
  for (long i = 0; i < n; ++i) pt[vars[static_cast<std::size_t>(i)]] = x0[static_cast<std::size_t>(i)];
  Eigen::MatrixXd H(n, n);
  for (long a = 0; a < n; ++a)
    for (long b = 0; b < n; ++b)
      H(a, b) = W0.partial(vars[static_cast<std::size_t>(a)]).partial(vars[static_cast<std::size_t>(b)]).evaluate(pt, 0.0);
  CriticalPointReport r;
  r.x0 = x0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> hs(H);
  for (long i = 0; i < n; ++i) r.hessian_eigs.push_back(hs.eigenvalues()(i));
  r.N = linearization_N(H, gamma);
  r.lambdas = matrix_eigenvalues(r.N);
  for (double w : r.hessian_eigs) r.classification.push_back(classify_roots(w));
  std::vector<cplx> neg;
  for (const auto& l : r.lambdas)
    if (l.real() < -1e-10 && std::abs(l.imag()) < 1e-10) neg.push_back(l);
  if (neg.size() == 1) r.mu1 = -neg[0].real();
  return r;
}

}  // namespace susyfact
