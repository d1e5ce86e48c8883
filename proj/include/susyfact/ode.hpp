#pragma once

// Adaptive Dormand-Prince integration with dense output, sampled on requested times.

#include <boost/numeric/odeint.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace susyfact {

using State = std::vector<double>;
using Field = std::function<void(const State&, State&)>;

struct IntegrationError : std::runtime_error {
  State last_state;
  double last_time;
  IntegrationError(const std::string& what, State s, double t)
      : std::runtime_error(what), last_state(std::move(s)), last_time(t) {}
};

struct Tolerances {
  double rel = 1e-10;
  double abs = 1e-12;
  double max_dt = 0;  // 0 leaves the step size unbounded
};

struct Trajectory {
  std::vector<double> times;
  std::vector<State> states;
  std::map<std::string, double> meta;

  std::size_t size() const { return times.size(); }
  const State& back() const { return states.back(); }

  void append(const Trajectory& o, bool skip_first) {
    for (std::size_t i = skip_first ? 1 : 0; i < o.size(); ++i) {
      times.push_back(o.times[i]);
      states.push_back(o.states[i]);
    }
  }

  /// Cubic Hermite interpolation between samples using the field for slopes.
  State at(double t, const Field& f) const {
    if (t <= times.front()) return states.front();
    if (t >= times.back()) return states.back();
    auto it = std::upper_bound(times.begin(), times.end(), t);
    std::size_t k = static_cast<std::size_t>(it - times.begin()) - 1;
    double t0 = times[k], t1 = times[k + 1], hh = t1 - t0, s = (t - t0) / hh;
    State d0(states[k].size()), d1(states[k].size()), out(states[k].size());
    f(states[k], d0);
    f(states[k + 1], d1);
    double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = h00 * states[k][i] + h10 * hh * d0[i] + h01 * states[k + 1][i] + h11 * hh * d1[i];
    return out;
  }
};

inline double distance(const State& a, const State& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

/// Integrates from sample_times.front() through all sample times (monotone in either direction).
/// The returned trajectory always has increasing times.
/// With dense = false the controlled stepper lands exactly on every sample time.
inline Trajectory integrate_samples(const Field& f, State x0, const std::vector<double>& sample_times,
                                    Tolerances tol = {}, bool dense = true) {
  namespace ode = boost::numeric::odeint;
  Trajectory tr;
  if (sample_times.empty()) return tr;
  const bool backward = sample_times.size() > 1 && sample_times.back() < sample_times.front();
  // Backward runs integrate the negated field in reversed time: the step adjuster
  // clamps against a positive max_dt and would flip the direction otherwise.
  std::vector<double> times = sample_times;
  if (backward)
    for (double& t : times) t = -t;
  auto sys = [&](const State& x, State& dx, double) {
    f(x, dx);
    if (backward)
      for (double& v : dx) v = -v;
  };
  double dt = times.size() > 1 ? (times[1] - times[0]) : 1e-3;
  const double max_dt = tol.max_dt > 0 ? tol.max_dt : 0.0;
  std::size_t rhs_calls = 0;
  auto counted = [&](const State& x, State& dx, double t) {
    ++rhs_calls;
    sys(x, dx, t);
  };
  State last = x0;
  double last_t = sample_times.front();
  auto observe = [&](const State& x, double t) {
    for (double v : x)
      if (!std::isfinite(v)) throw IntegrationError("non-finite state", x, backward ? -t : t);
    tr.times.push_back(backward ? -t : t);
    tr.states.push_back(x);
    last = x;
    last_t = backward ? -t : t;
  };
  try {
    if (dense)
      ode::integrate_times(ode::make_dense_output(tol.abs, tol.rel, max_dt, ode::runge_kutta_dopri5<State>()), counted,
                           x0, times.begin(), times.end(), dt, observe, ode::max_step_checker(100000));
    else
      ode::integrate_times(ode::make_controlled(tol.abs, tol.rel, max_dt, ode::runge_kutta_dopri5<State>()), counted,
                           x0, times.begin(), times.end(), dt, observe, ode::max_step_checker(100000));
  } catch (const IntegrationError&) {
    throw;
  } catch (const std::exception& e) {
    throw IntegrationError(std::string("integration failed: ") + e.what(), last, last_t);
  }
  if (backward) {
    std::reverse(tr.times.begin(), tr.times.end());
    std::reverse(tr.states.begin(), tr.states.end());
  }
  tr.meta["rhs_calls"] = static_cast<double>(rhs_calls);
  return tr;
}

inline std::vector<double> linspace_times(double t0, double t1, double dt) {
  std::vector<double> out;
  const double span = std::abs(t1 - t0);
  const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(span / dt - 1e-9)));
  for (std::size_t i = 0; i <= n; ++i) out.push_back(i == n ? t1 : t0 + (t1 - t0) * static_cast<double>(i) / n);
  return out;
}

/// Forward or backward integration over [t0, t1] sampled at spacing dt.
inline Trajectory integrate(const Field& f, State x0, double t0, double t1, double dt = 0.01, Tolerances tol = {}) {
  if (!std::isfinite(t0) || !std::isfinite(t1)) throw std::invalid_argument("time span must be finite");
  if (t0 == t1) {
    Trajectory tr;
    tr.times = {t0};
    tr.states = {x0};
    return tr;
  }
  return integrate_samples(f, std::move(x0), linspace_times(t0, t1, dt), tol);
}

}  // namespace susyfact
