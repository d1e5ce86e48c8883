#pragma once

// The drift field nu = gamma (z - x) d_z + y d_x - (dW0 + x - z) d_y of the chain,
// its heteroclinic orbit from the well minimum to the saddle, and the
// monotonicity cascade of phi0 along it.

#include "susyfact/models.hpp"
#include "susyfact/ode.hpp"
#include "susyfact/spectral.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace susyfact {

struct NuField {
  SpacePtr space;
  PolyVector components;
  std::vector<CompiledPoly> compiled;

  void operator()(const State& x, State& dx) const {
    dx.resize(compiled.size());
    for (std::size_t i = 0; i < compiled.size(); ++i) dx[i] = compiled[i](x);
  }
  Field field() const {
    return [this](const State& x, State& dx) { (*this)(x, dx); };
  }
  /// Directional derivative nu(f), exact.
  Poly apply(const Poly& f) const {
    Poly r(space);
    for (std::size_t i = 0; i < components.size(); ++i)
      if (!components[i].is_zero()) r += components[i] * f.partial(i);
    return r;
  }
};

inline NuField nu_field(const ChainConfig& cfg) {
  validate(cfg);
  const auto& sp = cfg.space();
  Poly W0 = cfg.W0();
  NuField nu{sp, PolyVector(sp->size(), Poly(sp)), {}};
  for (int j = 1; j <= 2; ++j)
    for (std::size_t i = 0; i < cfg.n; ++i) {
      auto xi = cfg.idx('x', j, i), yi = cfg.idx('y', j, i), zi = cfg.idx('z', j, i);
      Poly x = cfg.var('x', j, i), y = cfg.var('y', j, i), z = cfg.var('z', j, i);
      nu.components[xi] = y;
      nu.components[yi] = -(W0.partial(xi) + x - z);
      nu.components[zi] = (z - x) * cfg.gamma;
    }
  for (const auto& c : nu.components) nu.compiled.emplace_back(c);
  return nu;
}

/// Lifts a point x0 of the x-coordinates (x1 block then x2 block) to (x0, 0, x0).
inline State lift_stationary(const ChainConfig& cfg, const std::vector<double>& x0) {
  State s(cfg.space()->size(), 0.0);
  std::size_t k = 0;
  for (int j = 1; j <= 2; ++j)
    for (std::size_t i = 0; i < cfg.n; ++i, ++k) s[cfg.idx('x', j, i)] = s[cfg.idx('z', j, i)] = x0[k];
  return s;
}

inline std::vector<std::size_t> x_indices(const ChainConfig& cfg) {
  std::vector<std::size_t> xs;
  for (int j = 1; j <= 2; ++j)
    for (std::size_t i = 0; i < cfg.n; ++i) xs.push_back(cfg.idx('x', j, i));
  return xs;
}

/// p(x + c) as an exact polynomial, so that evaluation near c keeps relative accuracy.
inline Poly translate(const Poly& p, const std::vector<Rational>& c) {
  Poly r = p;
  const auto& sp = p.space();
  for (std::size_t i = 0; i < c.size(); ++i)
    if (c[i] != 0) r = r.substitute(i, Poly::variable(sp, i) + Poly::constant(sp, c[i]));
  return r;
}

inline Eigen::MatrixXd jacobian(const NuField& nu, const State& at) {
  const long n = static_cast<long>(nu.components.size());
  Eigen::MatrixXd J(n, n);
  for (long a = 0; a < n; ++a)
    for (long b = 0; b < n; ++b)
      J(a, b) = nu.components[static_cast<std::size_t>(a)].partial(static_cast<std::size_t>(b)).evaluate(at, 0.0);
  return J;
}

struct HeteroclinicOptions {
  double seed_factor = 1e-6;
  double arrive_tol = 1e-8;
  double end_tol = 1e-6;
  double budget = 500;
  double chunk = 10;
  double dt = 0.1;
  double tail = 8;
  Tolerances tol;
};

struct Heteroclinic {
  Trajectory traj;
  State minimum, saddle;
  double mu1 = 0;
  double seed_sign = 1;
  double start_residual = 0, end_residual = 0;
};

/// Orbit from the well minimum m+ (x1 = max root) to the saddle s0 in the w1 block, w2 = 0.
inline Heteroclinic heteroclinic_gamma1(const ChainConfig& cfg, HeteroclinicOptions opt = {}) {
  if (cfg.n != 1) throw StructuralError("heteroclinic_gamma1 requires n = 1");
  auto nu = nu_field(cfg);
  auto roots = real_roots_1d(cfg.W1.partial(cfg.idx('x', 1)), cfg.idx('x', 1));
  Poly W1pp = cfg.W1.partial(cfg.idx('x', 1)).partial(cfg.idx('x', 1));
  std::optional<double> sad, mplus;
  auto at1 = [&](double x) {
    std::vector<double> pt(cfg.space()->size(), 0.0);
    pt[cfg.idx('x', 1)] = x;
    return W1pp.evaluate(pt, 0.0);
  };
  for (double r : roots) {
    if (at1(r) < 0 && !sad) sad = r;
  }
  if (!sad) throw StructuralError("W1 has no nondegenerate saddle");
  for (double r : roots)
    if (r > *sad && at1(r) > 0 && !mplus) mplus = r;
  if (!mplus) throw StructuralError("W1 has no minimum to the right of the saddle");
  auto x2roots = real_roots_1d(cfg.W2.partial(cfg.idx('x', 2)), cfg.idx('x', 2));
  Heteroclinic out;
  out.saddle = lift_stationary(cfg, {*sad, x2roots.at(0)});
  out.minimum = lift_stationary(cfg, {*mplus, x2roots.at(0)});

  Eigen::MatrixXd J = jacobian(nu, out.saddle);
  Eigen::EigenSolver<Eigen::MatrixXd> es(J, true);
  long kneg = -1;
  for (long k = 0; k < es.eigenvalues().size(); ++k) {
    auto l = es.eigenvalues()(k);
    if (l.real() < 0) {
      if (kneg >= 0) throw StructuralError("saddle has more than one stable direction");
      kneg = k;
    }
  }
  if (kneg < 0 || std::abs(es.eigenvalues()(kneg).imag()) > 1e-12)
    throw StructuralError("saddle has no real stable direction");
  out.mu1 = -es.eigenvalues()(kneg).real();
  Eigen::VectorXd ev = es.eigenvectors().col(kneg).real();
  ev /= ev.norm();
  const double eps = opt.seed_factor * std::abs(*mplus - *sad);
  const double side = ev(static_cast<long>(cfg.idx('x', 1))) >= 0 ? 1.0 : -1.0;

  auto field = nu.field();
  for (double sign : {side, -side}) {
    State seed = out.saddle;
    for (std::size_t i = 0; i < seed.size(); ++i) seed[i] += sign * eps * ev(static_cast<long>(i));
    Trajectory back;
    back.times = {0.0};
    back.states = {seed};
    double t = 0;
    bool arrived = false;
    try {
      while (-t < opt.budget) {
        auto piece = integrate(field, back.states.front(), t, t - opt.chunk, opt.dt, opt.tol);
        Trajectory merged = piece;
        merged.append(back, true);
        back = std::move(merged);
        t -= opt.chunk;
        if (distance(back.states.front(), out.minimum) < opt.arrive_tol) {
          arrived = true;
          break;
        }
        if (std::abs(back.states.front()[cfg.idx('x', 1)] - *sad) > 10 * std::abs(*mplus - *sad)) break;
      }
    } catch (const IntegrationError&) {
      arrived = false;
    }
    if (!arrived) continue;
    // Forward tail from the seed along the stable direction toward the saddle.
    auto tail = integrate(field, seed, 0.0, opt.tail, opt.dt, opt.tol);
    back.append(tail, true);
    out.traj = std::move(back);
    out.seed_sign = sign;
    out.start_residual = distance(out.traj.states.front(), out.minimum);
    out.end_residual = distance(out.traj.states.back(), out.saddle);
    out.traj.meta["start_residual"] = out.start_residual;
    out.traj.meta["end_residual"] = out.end_residual;
    out.traj.meta["seed_eps"] = eps;
    if (out.end_residual > opt.end_tol) throw IntegrationError("tail did not reach the saddle", out.traj.back(), 0);
    return out;
  }
  throw IntegrationError("backward shooting did not reach the minimum within the time budget", out.saddle, 0);
}

struct MonotonicityReport {
  bool strictly_increasing = true;
  bool inside_sublevel = true;
  double min_increment = 0;
  double max_phi = 0;
  double saddle_phi = 0;
  std::size_t first_failure = 0;
};

/// phi0 along the orbit. Values are expanded about the nearer endpoint so that
/// increments near either stationary point stay above round-off.
inline MonotonicityReport phi0_monotonicity(const ChainConfig& cfg, const Heteroclinic& h) {
  Poly phi0 = chain_phi0(cfg);
  struct Anchor {
    State at;
    double base;
    CompiledPoly offset;
  };
  auto make_anchor = [&](const State& at) {
    std::vector<Rational> c(at.size());
    for (std::size_t i = 0; i < c.size(); ++i) c[i] = Rational(at[i]);
    Poly t = translate(phi0, c);
    Poly base = t.restrict_zero([&] {
      std::vector<std::size_t> all(at.size());
      for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
      return all;
    }());
    return Anchor{at, base.evaluate(at, 0.0), CompiledPoly(t - base)};
  };
  const Anchor anchors[2] = {make_anchor(h.minimum), make_anchor(h.saddle)};
  struct Value {
    int anchor;
    double off;
  };
  State rel(h.minimum.size());
  auto value = [&](const State& s) {
    int a = distance(s, h.minimum) <= distance(s, h.saddle) ? 0 : 1;
    for (std::size_t i = 0; i < s.size(); ++i) rel[i] = s[i] - anchors[a].at[i];
    return Value{a, anchors[a].offset(rel)};
  };
  auto absolute = [&](const Value& v) { return anchors[v.anchor].base + v.off; };
  MonotonicityReport r;
  r.saddle_phi = anchors[1].base;
  r.min_increment = INFINITY;
  Value prev = value(h.traj.states.front());
  r.max_phi = absolute(prev);
  for (std::size_t k = 1; k < h.traj.size(); ++k) {
    Value v = value(h.traj.states[k]);
    double inc = v.anchor == prev.anchor ? v.off - prev.off : absolute(v) - absolute(prev);
    if (inc <= 0 && r.strictly_increasing) {
      r.strictly_increasing = false;
      r.first_failure = k;
    }
    r.min_increment = std::min(r.min_increment, inc);
    bool below = v.anchor == 1 ? v.off < 0 : absolute(v) < r.saddle_phi;
    if (k + 1 < h.traj.size() && !below) r.inside_sublevel = false;
    r.max_phi = std::max(r.max_phi, absolute(v));
    prev = v;
  }
  return r;
}

enum class CascadeCase { generic, y_nonzero_degenerate, fully_degenerate };

inline std::string to_string(CascadeCase c) {
  switch (c) {
    case CascadeCase::generic: return "generic";
    case CascadeCase::y_nonzero_degenerate: return "y_nonzero_degenerate";
    case CascadeCase::fully_degenerate: return "fully_degenerate";
  }
  return "unknown";
}

/// nu^k(phi0) for k = 1..5, exact.
inline std::vector<Poly> nu_powers_phi0(const ChainConfig& cfg, const NuField& nu) {
  std::vector<Poly> out;
  Poly f = chain_phi0(cfg);
  for (int k = 1; k <= 5; ++k) {
    f = nu.apply(f);
    out.push_back(f);
  }
  return out;
}

/// nu^k(phi0), k = 1..5, against the closed forms in u = z - x and its nu-derivatives, exactly.
inline bool cascade_identities_exact(const ChainConfig& cfg) {
  auto nu = nu_field(cfg);
  auto pw = nu_powers_phi0(cfg, nu);
  std::vector<Poly> s(5, Poly(cfg.space()));
  for (int j = 1; j <= 2; ++j)
    for (std::size_t i = 0; i < cfg.n; ++i) {
      Poly u = cfg.var('z', j, i) - cfg.var('x', j, i);
      Poly u1 = nu.apply(u), u2 = nu.apply(u1), u3 = nu.apply(u2), u4 = nu.apply(u3);
      Rational ia = Rational(1) / cfg.alpha(j);
      s[0] += u * u * ia;
      s[1] += u * u1 * (2 * ia);
      s[2] += (u1 * u1 + u * u2) * (2 * ia);
      s[3] += u1 * u2 * (6 * ia) + u * u3 * (2 * ia);
      s[4] += u2 * u2 * (6 * ia) + u1 * u3 * (8 * ia) + u * u4 * (2 * ia);
    }
  for (std::size_t k = 0; k < 5; ++k)
    if (!(pw[k] == s[k])) return false;
  return true;
}

struct CascadeReport {
  State point;
  std::vector<double> values;
  CascadeCase kind = CascadeCase::generic;
  bool signs_ok = false;
};

inline CascadeReport cascade_check(const ChainConfig& cfg, const State& point, double tol = 1e-12) {
  if (cfg.gamma != 1) throw StructuralError("cascade_check assumes gamma = 1");
  auto nu = nu_field(cfg);
  CascadeReport r;
  r.point = point;
  for (const auto& p : nu_powers_phi0(cfg, nu)) r.values.push_back(p.evaluate(point, 0.0));
  bool zx = true, y0 = true;
  for (int j = 1; j <= 2; ++j)
    for (std::size_t i = 0; i < cfg.n; ++i) {
      zx = zx && std::abs(point[cfg.idx('z', j, i)] - point[cfg.idx('x', j, i)]) <= tol;
      y0 = y0 && std::abs(point[cfg.idx('y', j, i)]) <= tol;
    }
  const auto& v = r.values;
  auto zero = [&](double a) { return std::abs(a) <= 1e-10; };
  if (!zx) {
    r.kind = CascadeCase::generic;
    r.signs_ok = v[0] > 0;
  } else if (!y0) {
    r.kind = CascadeCase::y_nonzero_degenerate;
    r.signs_ok = zero(v[0]) && zero(v[1]) && v[2] > 0;
  } else {
    r.kind = CascadeCase::fully_degenerate;
    r.signs_ok = zero(v[0]) && zero(v[1]) && zero(v[2]) && zero(v[3]) && v[4] > 0;
  }
  return r;
}

struct ProbePoint {
  State point;
  double slope = 0;
  double witness_C = 0;
  bool positive = true;
  std::vector<double> t, delta;
};

/// Delta phi0(t) = phi0(exp(t nu) x) - phi0(x) by quadrature of nu(phi0) along the flow.
inline ProbePoint quintic_bound_probe(const ChainConfig& cfg, const State& x0, const std::vector<double>& t_grid,
                                      double fit_lo = 1e-4, double fit_hi = 1e-3) {
  // Integrated in coordinates centred on x0 so that small displacements keep relative precision.
  auto nu = nu_field(cfg);
  std::vector<Rational> c(x0.size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = Rational(x0[i]);
  std::vector<CompiledPoly> comp;
  for (const auto& q : nu.components) comp.emplace_back(translate(q, c));
  CompiledPoly rate(translate(nu.apply(chain_phi0(cfg)), c));
  const std::size_t n = x0.size();
  Field aug = [&](const State& s, State& ds) {
    ds.resize(n + 1);
    for (std::size_t i = 0; i < n; ++i) ds[i] = comp[i](s);
    ds[n] = rate(s);
  };
  State s0(n + 1, 0.0);
  std::vector<double> times{0.0};
  times.insert(times.end(), t_grid.begin(), t_grid.end());
  auto tr = integrate_samples(aug, s0, times, {1e-10, 1e-300}, false);
  ProbePoint p;
  p.point = x0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t k = 1; k < tr.size(); ++k) {
    double t = tr.times[k], d = tr.states[k][n];
    p.t.push_back(t);
    p.delta.push_back(d);
    if (d <= 0) {
      p.positive = false;
      continue;
    }
    p.witness_C = std::max(p.witness_C, std::pow(t, 5) / d);
    if (t >= fit_lo * (1 - 1e-12) && t <= fit_hi * (1 + 1e-12)) {
      double lx = std::log(t), ly = std::log(d);
      sx += lx;
      sy += ly;
      sxx += lx * lx;
      sxy += lx * ly;
      ++m;
    }
  }
  if (m >= 2) p.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return p;
}

inline std::vector<double> log_grid(double lo, double hi, int per_decade) {
  std::vector<double> out;
  const int n = static_cast<int>(std::round(std::log10(hi / lo) * per_decade));
  for (int i = 0; i <= n; ++i) out.push_back(lo * std::pow(10.0, static_cast<double>(i) / per_decade));
  return out;
}

}  // namespace susyfact
