#pragma once

// Transport obstruction for unequal bath temperatures: graded weight hierarchy,
// eigencoordinates of the second block, and the forced transport along the
// heteroclinic orbit.

#include "susyfact/flow.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <map>
#include <string>
#include <vector>

namespace susyfact {

// ---------------------------------------------------------------- graded hierarchy

inline void check_homogeneous_input(const std::map<int, Poly>& psi) {
  for (const auto& [k, p] : psi)
    if (!p.is_homogeneous_in("w2", k))
      throw StructuralError("component " + std::to_string(k) + " is not homogeneous of that degree in w2");
}

inline void check_perturbation_shape(const ChainConfig& cfg, int m) {
  if (m < 3) throw StructuralError("perturbation degree m must be at least 3");
  if (!cfg.deltaW.is_homogeneous_in("w2", m))
    throw StructuralError("deltaW must be homogeneous of degree m in the x2 variables");
}

/// Degree of deltaW in the w2 block, or -1 when it is not homogeneous there.
inline int perturbation_degree(const ChainConfig& cfg) {
  auto comps = cfg.deltaW.homogeneous_components("w2");
  if (comps.size() != 1) return -1;
  return comps.begin()->first;
}

/// Right side 2 d_x deltaW . d_y phi0.
inline Poly weight_rhs(const ChainConfig& cfg) {
  Poly phi0 = chain_phi0(cfg);
  Poly r(cfg.space());
  for (int j = 1; j <= 2; ++j)
    for (std::size_t i = 0; i < cfg.n; ++i)
      r += cfg.deltaW.partial(cfg.idx('x', j, i)) * phi0.partial(cfg.idx('y', j, i)) * Rational(2);
  return r;
}

/// Full left side nu psi + (gamma/2) sum alpha_j (d_z psi)^2 - d_x deltaW . d_y psi.
inline Poly weight_lhs(const ChainConfig& cfg, const Poly& psi) {
  auto nu = nu_field(cfg);
  Poly r = nu.apply(psi);
  for (int j = 1; j <= 2; ++j)
    for (std::size_t i = 0; i < cfg.n; ++i) {
      Poly dz = psi.partial(cfg.idx('z', j, i));
      r += dz * dz * (cfg.gamma * cfg.alpha(j) / 2);
      r -= cfg.deltaW.partial(cfg.idx('x', j, i)) * psi.partial(cfg.idx('y', j, i));
    }
  return r;
}

/// Degree-mu parts of the left side assembled from homogeneous components psi_k.
inline std::map<int, Poly> graded_lhs(const ChainConfig& cfg, const std::map<int, Poly>& psi) {
  check_homogeneous_input(psi);
  const int m = perturbation_degree(cfg);
  auto nu = nu_field(cfg);
  const auto& sp = cfg.space();
  auto get = [&](int k) {
    auto it = psi.find(k);
    return it == psi.end() ? Poly(sp) : it->second;
  };
  int top = 0;
  for (const auto& [k, p] : psi) top = std::max(top, k);
  const int max_mu = 2 * top + std::max(m, 0) + 2;
  std::map<int, Poly> out;
  for (int mu = 0; mu <= max_mu; ++mu) {
    Poly r = nu.apply(get(mu));
    for (std::size_t i = 0; i < cfg.n; ++i) {
      auto z1 = cfg.idx('z', 1, i), z2 = cfg.idx('z', 2, i);
      for (int k = 0; k <= mu; ++k) {
        r += get(k).partial(z1) * get(mu - k).partial(z1) * (cfg.gamma * cfg.alpha1 / 2);
        r += get(k + 1).partial(z2) * get(mu - k + 1).partial(z2) * (cfg.gamma * cfg.alpha2 / 2);
      }
      if (m >= 0) {
        if (mu - m >= 0) r -= cfg.deltaW.partial(cfg.idx('x', 1, i)) * get(mu - m).partial(cfg.idx('y', 1, i));
        if (mu + 2 - m >= 0) r -= cfg.deltaW.partial(cfg.idx('x', 2, i)) * get(mu + 2 - m).partial(cfg.idx('y', 2, i));
      }
    }
    if (!r.is_zero()) out[mu] = r;
  }
  return out;
}

/// Degree-mu parts of left side minus right side.
inline std::map<int, Poly> graded_residual(const ChainConfig& cfg, const std::map<int, Poly>& psi) {
  auto out = graded_lhs(cfg, psi);
  for (const auto& [d, p] : weight_rhs(cfg).homogeneous_components("w2")) {
    out[d] = (out.count(d) ? out[d] : Poly(cfg.space())) - p;
    if (out[d].is_zero()) out.erase(d);
  }
  return out;
}

// ---------------------------------------------------------------- eigencoordinates

using MultiIndex = std::vector<int>;
using CPoly = std::map<MultiIndex, cplx>;

struct EigenCoords {
  std::vector<std::size_t> vars;  // w2 variables, (x, y, z) block order
  Eigen::MatrixXd N2;
  Eigen::MatrixXcd R;             // w2 = R omega
  Eigen::MatrixXcd L;             // omega = L w2
  std::vector<cplx> lambdas;
};

inline EigenCoords eigencoords_w2(const ChainConfig& cfg) {
  auto nu = nu_field(cfg);
  EigenCoords ec;
  ec.vars = cfg.block(2);
  const long d = static_cast<long>(ec.vars.size());
  State origin(cfg.space()->size(), 0.0);
  Eigen::MatrixXd J = jacobian(nu, origin);
  ec.N2.resize(d, d);
  for (long a = 0; a < d; ++a)
    for (long b = 0; b < d; ++b) {
      ec.N2(a, b) = J(static_cast<long>(ec.vars[static_cast<std::size_t>(a)]),
                      static_cast<long>(ec.vars[static_cast<std::size_t>(b)]));
      // nu_2 must not depend on w1 for the block decomposition.
    }
  for (auto i : ec.vars)
    for (auto k : cfg.block(1))
      if (!nu.components[i].partial(k).is_zero()) throw StructuralError("second block is coupled to the first");
  Eigen::EigenSolver<Eigen::MatrixXd> es(ec.N2, true);
  std::vector<long> order(static_cast<std::size_t>(d));
  for (long k = 0; k < d; ++k) order[static_cast<std::size_t>(k)] = k;
  std::sort(order.begin(), order.end(), [&](long a, long b) {
    cplx la = es.eigenvalues()(a), lb = es.eigenvalues()(b);
    if (std::abs(la.real() - lb.real()) > 1e-12) return la.real() < lb.real();
    return la.imag() < lb.imag();
  });
  ec.R.resize(d, d);
  for (long c = 0; c < d; ++c) {
    long k = order[static_cast<std::size_t>(c)];
    ec.lambdas.push_back(es.eigenvalues()(k));
    Eigen::VectorXcd v = es.eigenvectors().col(k);
    long piv = 0;
    for (long i = 1; i < d; ++i)
      if (std::abs(v(i)) > std::abs(v(piv)) + 1e-12) piv = i;
    long first = std::abs(v(0)) > 1e-10 ? 0 : piv;
    v *= std::conj(v(first)) / std::abs(v(first));
    v /= v.norm();
    ec.R.col(c) = v;
  }
  Eigen::JacobiSVD<Eigen::MatrixXcd> svd(ec.R);
  const auto& s = svd.singularValues();
  if (s(s.size() - 1) < 1e-8 * s(0))
    throw StructuralError("second-block linearization has a Jordan block; perturb W2 to separate eigenvalues");
  ec.L = ec.R.inverse();
  return ec;
}

inline CPoly cpoly_mul(const CPoly& a, const CPoly& b) {
  CPoly r;
  for (const auto& [ea, ca] : a)
    for (const auto& [eb, cb] : b) {
      MultiIndex e(ea.size());
      for (std::size_t i = 0; i < e.size(); ++i) e[i] = ea[i] + eb[i];
      r[e] += ca * cb;
    }
  return r;
}

/// Expansion of a polynomial in the w2 variables into omega monomials.
inline CPoly to_omega(const Poly& p, const EigenCoords& ec) {
  const std::size_t d = ec.vars.size();
  std::vector<CPoly> lin(d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k < d; ++k) {
      MultiIndex e(d, 0);
      e[k] = 1;
      lin[i][e] = ec.R(static_cast<long>(i), static_cast<long>(k));
    }
  CPoly out;
  for (const auto& [m, c] : p.terms()) {
    for (std::size_t i = 0; i < m.exps.size(); ++i)
      if (m.exps[i] && std::find(ec.vars.begin(), ec.vars.end(), i) == ec.vars.end())
        throw StructuralError("to_omega expects a polynomial in the w2 variables only");
    CPoly term{{MultiIndex(d, 0), cplx(c.get_d(), 0.0)}};
    for (std::size_t i = 0; i < d; ++i)
      for (int e = 0; e < m.exps[ec.vars[i]]; ++e) term = cpoly_mul(term, lin[i]);
    for (const auto& [e, v] : term) out[e] += v;
  }
  return out;
}

inline cplx eval_omega(const CPoly& p, const Eigen::VectorXcd& w) {
  cplx s = 0;
  for (const auto& [e, c] : p) {
    cplx t = c;
    for (std::size_t i = 0; i < e.size(); ++i) t *= std::pow(w(static_cast<long>(i)), e[i]);
    s += t;
  }
  return s;
}

inline cplx lambda_dot(const std::vector<cplx>& l, const MultiIndex& a) {
  cplx s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += l[i] * static_cast<double>(a[i]);
  return s;
}

// ---------------------------------------------------------------- perturbation and transport

/// amp * S(min(2t, 2 - 2t))^2 on [lo, hi], t = (x - lo)/(hi - lo), S the quintic smoothstep.
struct Bump {
  double lo = 0.3, hi = 0.7, amp = 1.0;
  double operator()(double x) const {
    if (x <= lo || x >= hi) return 0.0;
    double t = (x - lo) / (hi - lo);
    double u = std::min(2 * t, 2 - 2 * t);
    double S = u * u * u * (10 + u * (-15 + 6 * u));
    return amp * S * S;
  }
};

struct Perturbation {
  Bump bump;
  Poly homog;  // v(x2), homogeneous of degree m
  int sign = 1;
  int m = 3;
};

inline void validate(const Perturbation& p, const ChainConfig& cfg, const Heteroclinic& h) {
  if (p.m < 3) throw StructuralError("perturbation degree must be at least 3");
  if (!p.homog.is_homogeneous_in("w2", p.m)) throw StructuralError("v must be homogeneous of degree m in x2");
  for (auto k : cfg.block(1))
    if (p.homog.depends_on(k)) throw StructuralError("v must depend on x2 only");
  if (p.sign != 1 && p.sign != -1) throw StructuralError("sign must be +1 or -1");
  if (!(p.bump.amp > 0) || !(p.bump.lo < p.bump.hi)) throw StructuralError("bump must have positive amplitude");
  const auto i1 = cfg.idx('x', 1);
  for (double c : {h.minimum[i1], h.saddle[i1]})
    if (c > p.bump.lo && c < p.bump.hi) throw StructuralError("bump support must avoid the stationary points");
  bool hit = false;
  for (const auto& s : h.traj.states) hit = hit || p.bump(s[i1]) > 0;
  if (!hit) throw StructuralError("bump vanishes along the heteroclinic orbit");
}

struct TransportSolution {
  std::vector<double> t;
  std::vector<cplx> u;
};

/// Solves u' = -L u + g(t) from t0 to t1 (either direction) with u(t0) = u0.
inline TransportSolution transport_ode(cplx L, const std::function<cplx(double)>& g, double t0, double t1, cplx u0,
                                       double dt = 0.01, Tolerances tol = {1e-10, 1e-12, 0.05}) {
  Field f = [&](const State& s, State& ds) {
    cplx u(s[0], s[1]);
    cplx du = -L * u + g(s[2]);
    ds = {du.real(), du.imag(), 1.0};
  };
  auto tr = integrate(f, {u0.real(), u0.imag(), t0}, t0, t1, dt, tol);
  TransportSolution out;
  for (std::size_t k = 0; k < tr.size(); ++k) {
    out.t.push_back(tr.times[k]);
    out.u.emplace_back(tr.states[k][0], tr.states[k][1]);
  }
  return out;
}

enum class Verdict { blowup_at_minimum, nonsmooth_at_saddle, inconclusive };

inline std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::blowup_at_minimum: return "blowup_at_minimum";
    case Verdict::nonsmooth_at_saddle: return "nonsmooth_at_saddle";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "unknown";
}

enum class Branch { minimum, saddle };

struct ObstructionReport {
  MultiIndex alpha0;
  cplx coefficient = 0;  // r_alpha, so that g_alpha(x1) = sign r_alpha bump(x1)
  cplx lambda_dot_alpha = 0;
  double mu1 = 0;
  cplx exponent = 0;
  double nearest_integer_distance = 0;
  bool exponent_is_integer = false;
  double tail_rate_fit = 0;
  double tail_rate_rel_error = 0;
  double tail_constancy = 0;
  cplx forced_constant = 0;      // K = int e^{L s} g(s) ds
  cplx forced_constant_quad = 0;
  double support_t_lo = 0, support_t_hi = 0;
  Branch branch = Branch::minimum;
  Verdict verdict = Verdict::inconclusive;
  bool rhs_zero = false;
  TransportSolution minimum_branch, saddle_branch;
  std::string note;
};

inline double integer_distance(cplx z) { return std::hypot(z.real() - std::round(z.real()), z.imag()); }

struct ObstructionOptions {
  Branch branch = Branch::minimum;
  double dt = 0.01;
  double integer_tol = 1e-6;
  double tail_margin = 1.0;
};

inline ObstructionReport transport_solve(const ChainConfig& cfg, const Perturbation& pert, const Heteroclinic& h,
                                         ObstructionOptions opt = {}) {
  validate(pert, cfg, h);
  auto ec = eigencoords_w2(cfg);
  ObstructionReport rep;
  rep.branch = opt.branch;
  rep.mu1 = h.mu1;
  for (const auto& l : ec.lambdas)
    if (l.real() <= 0) throw StructuralError("second-block eigenvalue with nonpositive real part");

  // (2/alpha2 - 2/alpha1) y2 . d_x2 v in omega coordinates.
  const Rational factor = Rational(2) / cfg.alpha2 - Rational(2) / cfg.alpha1;
  Poly F(cfg.space());
  for (std::size_t i = 0; i < cfg.n; ++i)
    F += cfg.var('y', 2, i) * pert.homog.partial(cfg.idx('x', 2, i)) * factor;
  CPoly Fw = to_omega(F, ec);
  double best = 0;
  for (const auto& [a, c] : Fw) {
    if (std::abs(c) > best * (1 + 1e-9) + 1e-14) {
      best = std::abs(c);
      rep.alpha0 = a;
      rep.coefficient = c;
    }
  }
  if (rep.alpha0.empty()) {
    rep.rhs_zero = true;
    rep.alpha0 = MultiIndex(ec.lambdas.size(), 0);
    rep.alpha0.back() = pert.m;
    rep.note = "right side vanishes identically; no obstruction";
  }
  const cplx L = lambda_dot(ec.lambdas, rep.alpha0);
  rep.lambda_dot_alpha = L;
  rep.exponent = L / h.mu1;
  rep.nearest_integer_distance = integer_distance(rep.exponent);
  rep.exponent_is_integer = rep.nearest_integer_distance <= opt.integer_tol;

  auto nu = nu_field(cfg);
  auto field = nu.field();
  const auto i1 = cfg.idx('x', 1);
  const cplx r = rep.coefficient * static_cast<double>(pert.sign);
  auto g = [&](double t) { return r * pert.bump(h.traj.at(t, field)[i1]); };
  const double t0 = h.traj.times.front(), t1 = h.traj.times.back();
  rep.support_t_lo = t1;
  rep.support_t_hi = t0;
  for (std::size_t k = 0; k < h.traj.size(); ++k)
    if (pert.bump(h.traj.states[k][i1]) > 0) {
      rep.support_t_lo = std::min(rep.support_t_lo, h.traj.times[std::max<std::size_t>(k, 1) - 1]);
      rep.support_t_hi = std::max(rep.support_t_hi, h.traj.times[std::min(k + 1, h.traj.size() - 1)]);
    }

  rep.minimum_branch = transport_ode(L, g, t0, t1, 0.0, opt.dt);
  rep.saddle_branch = transport_ode(L, g, t1, t0, 0.0, opt.dt);

  // Forced constant K from the far side of the support, and by quadrature.
  const auto& mb = rep.minimum_branch;
  double cmin = INFINITY, cmax = 0;
  for (std::size_t k = 0; k < mb.t.size(); ++k)
    if (mb.t[k] > rep.support_t_hi) {
      cplx K = mb.u[k] * std::exp(L * mb.t[k]);
      rep.forced_constant = K;
      cmin = std::min(cmin, std::abs(K));
      cmax = std::max(cmax, std::abs(K));
    }
  rep.tail_constancy = cmax > 0 ? (cmax - cmin) / cmax : 0;
  using boost::math::quadrature::gauss_kronrod;
  auto integrand = [&](double s, bool im) {
    cplx v = std::exp(L * s) * g(s);
    return im ? v.imag() : v.real();
  };
  double qr = 0, qi = 0;
  // Split on the sample grid so the quadrature sees the bump's breakpoints resolved.
  const double step = 0.5;
  for (double a = rep.support_t_lo; a < rep.support_t_hi; a += step) {
    double b = std::min(a + step, rep.support_t_hi);
    qr += gauss_kronrod<double, 61>::integrate([&](double s) { return integrand(s, false); }, a, b, 8, 1e-13);
    qi += gauss_kronrod<double, 61>::integrate([&](double s) { return integrand(s, true); }, a, b, 8, 1e-13);
  }
  rep.forced_constant_quad = cplx(qr, qi);

  // Growth toward the minimum on the saddle branch: log|u| = c - Re(L) t.
  const auto& sb = rep.saddle_branch;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int cnt = 0;
  for (std::size_t k = 0; k < sb.t.size(); ++k) {
    if (sb.t[k] > rep.support_t_lo - opt.tail_margin || std::abs(sb.u[k]) == 0) continue;
    double x = sb.t[k], y = std::log(std::abs(sb.u[k]));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++cnt;
  }
  if (cnt >= 2) rep.tail_rate_fit = -(cnt * sxy - sx * sy) / (cnt * sxx - sx * sx);
  rep.tail_rate_rel_error = std::abs(rep.tail_rate_fit - L.real()) / std::abs(L.real());

  const bool forced = !rep.rhs_zero && std::abs(rep.forced_constant) > 1e-12 * best;
  if (rep.rhs_zero) rep.verdict = Verdict::inconclusive;
  else if (opt.branch == Branch::minimum)
    rep.verdict = forced && !rep.exponent_is_integer ? Verdict::nonsmooth_at_saddle : Verdict::inconclusive;
  else
    rep.verdict = forced && rep.tail_rate_fit > 0 ? Verdict::blowup_at_minimum : Verdict::inconclusive;
  if (rep.note.empty())
    rep.note = "diagnostics are independent of the bump amplitude since the transport equation is linear";
  return rep;
}

// ---------------------------------------------------------------- structural checks

struct InvariantSubspaceReport {
  bool symbolic_zero = false;
  double max_drift = 0;
  double max_deviation_from_nu1 = 0;
};

inline InvariantSubspaceReport invariant_subspace_check(const ChainConfig& cfg, const State& w1_start,
                                                        double t_end = 20) {
  const int m = perturbation_degree(cfg);
  check_perturbation_shape(cfg, m);
  Poly p = hamiltonian_p(cfg);
  const auto N = cfg.space()->size();
  std::vector<std::size_t> sub;
  for (auto i : cfg.block(2)) {
    sub.push_back(i);
    sub.push_back(N + i);
  }
  InvariantSubspaceReport rep;
  rep.symbolic_zero = true;
  for (auto i : sub) rep.symbolic_zero = rep.symbolic_zero && p.partial(i).restrict_zero(sub).is_zero();

  // Hamilton flow: w' = d_omega p, omega' = -d_w p.
  std::vector<CompiledPoly> rhs(2 * N);
  for (std::size_t i = 0; i < N; ++i) {
    rhs[i] = CompiledPoly(p.partial(N + i));
    rhs[N + i] = CompiledPoly(-p.partial(i));
  }
  Field hf = [&](const State& s, State& ds) {
    ds.resize(2 * N);
    for (std::size_t i = 0; i < 2 * N; ++i) ds[i] = rhs[i](s);
  };
  State s0(2 * N, 0.0);
  for (std::size_t i = 0; i < N; ++i) s0[i] = w1_start[i];
  for (auto i : cfg.block(2)) s0[i] = 0;
  auto tr = integrate(hf, s0, 0.0, t_end, 0.1);
  auto nu = nu_field(cfg);
  State x0(w1_start.begin(), w1_start.begin() + static_cast<long>(N));
  for (auto i : cfg.block(2)) x0[i] = 0;
  auto ref = integrate(nu.field(), x0, 0.0, t_end, 0.1);
  for (std::size_t k = 0; k < tr.size(); ++k) {
    for (auto i : sub) rep.max_drift = std::max(rep.max_drift, std::abs(tr.states[k][i]));
    for (std::size_t i = 0; i < N; ++i) {
      rep.max_drift = std::max(rep.max_drift, std::abs(tr.states[k][N + i]));
      rep.max_deviation_from_nu1 = std::max(rep.max_deviation_from_nu1, std::abs(tr.states[k][i] - ref.states[k][i]));
    }
  }
  return rep;
}

struct HierarchyReport {
  bool symbolic_ok = false;
  double max_riccati = 0;
  double max_linear = 0;
};

/// Transports the degree-2 Riccati step and the linear steps nu psi_mu = 0 (2 < mu < m)
/// along the orbit and a tube of nearby orbits, starting from the given data.
inline HierarchyReport vanishing_hierarchy_check(const ChainConfig& cfg, const std::map<int, Poly>& psi,
                                                 const Heteroclinic& h, double perturb = 0.0) {
  const int m = perturbation_degree(cfg);
  check_perturbation_shape(cfg, m);
  HierarchyReport rep;
  auto res = graded_residual(cfg, psi);
  rep.symbolic_ok = true;
  for (const auto& [mu, r] : res)
    if (mu < m) rep.symbolic_ok = false;

  auto ec = eigencoords_w2(cfg);
  const long d = ec.N2.rows();
  auto nu = nu_field(cfg);
  const auto w1 = cfg.block(1);
  const auto w2 = cfg.block(2);
  const State& start = h.traj.states.front();

  // psi_2 = w2^T Q w2 / 2 with Q' + N2^T Q + Q N2 + gamma alpha2 Q e_z e_z^T Q = 0.
  Eigen::MatrixXd Q0 = Eigen::MatrixXd::Zero(d, d);
  if (psi.count(2))
    for (long a = 0; a < d; ++a)
      for (long b = 0; b < d; ++b)
        Q0(a, b) = psi.at(2).partial(w2[static_cast<std::size_t>(a)]).partial(w2[static_cast<std::size_t>(b)]).evaluate(start, 0.0);
  Q0 += perturb * Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd Ez = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t i = 0; i < cfg.n; ++i) Ez(static_cast<long>(2 * cfg.n + i), static_cast<long>(2 * cfg.n + i)) = 1;
  const double ga2 = Rational(cfg.gamma * cfg.alpha2).get_d();
  const std::size_t nw = w1.size();
  Field ric = [&](const State& s, State& ds) {
    State x(cfg.space()->size(), 0.0), dx;
    for (std::size_t i = 0; i < nw; ++i) x[w1[i]] = s[i];
    nu(x, dx);
    ds.assign(s.size(), 0.0);
    for (std::size_t i = 0; i < nw; ++i) ds[i] = dx[w1[i]];
    Eigen::Map<const Eigen::MatrixXd> Q(s.data() + nw, d, d);
    Eigen::MatrixXd dQ = -(ec.N2.transpose() * Q + Q * ec.N2 + ga2 * Q * Ez * Q);
    for (long k = 0; k < d * d; ++k) ds[nw + static_cast<std::size_t>(k)] = dQ.data()[k];
  };
  const double span = h.traj.times.back() - h.traj.times.front();
  auto track = [&](const Trajectory& tr) {
    for (const auto& s : tr.states)
      for (long k = 0; k < d * d; ++k)
        rep.max_riccati = std::max(rep.max_riccati, std::abs(s[s.size() - static_cast<std::size_t>(d * d - k)]));
  };
  // N2 is the same at every point of w2 = 0, so along the orbit Q evolves on its own.
  // Re-integrating w1 forward from the orbit start would drift off the orbit.
  Field ric_q = [&](const State& s, State& ds) {
    Eigen::Map<const Eigen::MatrixXd> Q(s.data(), d, d);
    Eigen::MatrixXd dQ = -(ec.N2.transpose() * Q + Q * ec.N2 + ga2 * Q * Ez * Q);
    ds.assign(dQ.data(), dQ.data() + d * d);
  };
  track(integrate(ric_q, State(Q0.data(), Q0.data() + d * d), 0.0, span, 0.5));
  // Short segments of the orbit and of nearby orbits launched off its interior, with w1 coupled.
  // Nearby orbits separate from the orbit exponentially, so their segments stay short.
  for (double frac : {0.25, 0.5, 0.75})
    for (double off : {-1e-3, 0.0, 1e-3}) {
      auto k = static_cast<std::size_t>(frac * static_cast<double>(h.traj.size() - 1));
      State s0;
      for (auto i : w1) s0.push_back(h.traj.states[k][i]);
      s0[0] += off;
      for (long j = 0; j < d * d; ++j) s0.push_back(Q0.data()[j]);
      track(integrate(ric, s0, 0.0, std::min(10.0, h.traj.times.back() - h.traj.times[k]), 0.5));
    }

  // Linear steps in omega coordinates: c_alpha' = -(lambda . alpha) c_alpha.
  for (int mu = 3; mu < m; ++mu) {
    CPoly c0;
    if (psi.count(mu)) {
      Poly slice = psi.at(mu);
      for (auto i : w1) slice = slice.substitute(i, Poly::constant(cfg.space(), Rational(start[i])));
      c0 = to_omega(slice, ec);
    }
    if (perturb != 0) {
      MultiIndex a(static_cast<std::size_t>(d), 0);
      a[0] = mu;
      c0[a] += perturb;
    }
    for (const auto& [a, c] : c0) {
      cplx L = lambda_dot(ec.lambdas, a);
      auto sol = transport_ode(L, [](double) { return cplx(0); }, 0.0, span, c, 0.5);
      for (const auto& u : sol.u) rep.max_linear = std::max(rep.max_linear, std::abs(u));
    }
  }
  return rep;
}

}  // namespace susyfact
