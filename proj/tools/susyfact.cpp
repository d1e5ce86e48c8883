// susyfact: factorization checks, spectra, flows and transport obstructions from the command line.

#include "susyfact/io.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <random>

using namespace susyfact;

namespace {

constexpr int kOk = 0, kMathFailure = 1, kUsage = 2;

const char* kGrammar = R"(Polynomial expressions (--phi, --psi, config files):
  sums of products of rationals, variables, h and named definitions, with
  + - * / ^ and parentheses; juxtaposition multiplies.  Examples:
    "1/4*x1^4 - 1/2*x1^2"   "2V"   "phi0 + 2*deltaW/alpha1"   "(x1 - z1)^2/2"
  Division only by constants.  Operator files define extra names under "defs";
  chain configs provide W1, W2, deltaW, phi0, alpha1, alpha2 and gamma.)";

struct Options {
  std::string operator_file, model, config, phi, psi, w_grid, out, tol_overrides;
  unsigned long seed = 0;
};

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Parsed "key=value,key=value" overrides; each consumer removes the keys it knows.
std::map<std::string, double> parse_overrides(const std::string& text) {
  std::map<std::string, double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    auto eq = item.find('=');
    if (eq == std::string::npos) throw UsageError("--tol-overrides: expected key=value, got '" + item + "'");
    std::string key = item.substr(0, eq), val = item.substr(eq + 1);
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(val, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != val.size() || val.empty() || !std::isfinite(v) || v <= 0)
      throw UsageError("--tol-overrides: '" + key + "' needs a positive number");
    out[key] = v;
  }
  return out;
}

void apply_override(std::map<std::string, double>& ov, const std::string& key, double& target) {
  auto it = ov.find(key);
  if (it == ov.end()) return;
  target = it->second;
  ov.erase(it);
}

void reject_leftovers(const std::map<std::string, double>& ov, const std::string& command) {
  if (!ov.empty()) throw UsageError("--tol-overrides: '" + ov.begin()->first + "' does not apply to " + command);
}

/// Writes the report to --out (atomically) or stdout; side files take the --out stem.
void emit(const Options& o, json report, const std::map<std::string, std::string>& side = {}) {
  report["schema_version"] = kSchemaVersion;
  const std::string text = canonical_dump(report);
  if (o.out.empty()) {
    std::cout << text;
    return;
  }
  for (const auto& [ext, content] : side) {
    std::filesystem::path p(o.out);
    p.replace_extension(ext);
    write_atomic(p.string(), content);
  }
  write_atomic(o.out, text);
}

ChainFile load_chain(const Options& o) {
  if (o.config.empty()) throw UsageError("--config is required");
  return chain_from_json(read_json_file(o.config), o.config);
}

Poly weight(const std::string& expr, const SpacePtr& sp, const PolyDefs& defs, const std::string& flag) {
  try {
    return parse_poly(expr, sp, defs);
  } catch (const ParseError& e) {
    throw UsageError(flag + " \"" + expr + "\": " + e.what());
  } catch (const StructuralError& e) {
    throw UsageError(flag + " \"" + expr + "\": " + e.what());
  }
}

/// Bundled models addressable by --model, with their reference weights.
std::vector<ModelBundle> bundled_models() {
  std::vector<ModelBundle> out;
  for (std::size_t n : {1u, 2u}) {
    auto sp = witten_space(n);
    Poly quad(sp), dw(sp);
    for (std::size_t i = 0; i < n; ++i) {
      Poly x = Poly::variable(sp, i);
      quad += x * x * Rational(1, 2);
      dw += (x * x - Poly::constant(sp, 1)).pow(2) * Rational(1, 4);
    }
    auto a = make_witten(quad, 1);
    a.name = "witten_quadratic_n" + std::to_string(n);
    auto b = make_witten(dw, 1);
    b.name = "witten_double_well_n" + std::to_string(n);
    out.push_back(a);
    out.push_back(b);
  }
  {
    auto sp = kfp_space(1);
    Poly x = Poly::variable(sp, 0);
    auto k = make_kfp((x * x - Poly::constant(sp, 1)).pow(2) * Rational(1, 4), 2);
    k.name = "kfp_n1";
    out.push_back(k);
  }
  {
    auto cfg = default_chain();
    cfg.alpha2 = cfg.alpha1;
    cfg.deltaW = cfg.var('x', 1) * cfg.var('x', 2).pow(3) * Rational(1, 10);
    auto c = make_chain(cfg);
    c.name = "chain_equal";
    out.push_back(c);
  }
  {
    auto c = make_chain(default_chain());
    c.name = "chain_decoupled";
    out.push_back(c);
  }
  return out;
}

struct Target {
  SecondOrderOperator op;
  PolyDefs defs;
  std::string phi, psi;
  std::string source;
};

Target resolve_target(const Options& o) {
  int given = !o.operator_file.empty() + !o.model.empty() + !o.config.empty();
  if (given != 1) throw UsageError("give exactly one of --operator, --model, --config");
  if (!o.operator_file.empty()) {
    auto f = operator_from_json(read_json_file(o.operator_file), o.operator_file);
    return {*f.op, f.defs, f.phi.value_or("0"), f.psi.value_or("0"), o.operator_file};
  }
  if (!o.model.empty()) {
    for (auto& b : bundled_models())
      if (b.name == o.model) {
        const auto& s = *b.reference_susy;
        return {b.conjugated, {{"phi0", b.phi0}}, s.phi.to_string(), s.psi.to_string(), b.name};
      }
    std::string names;
    for (const auto& b : bundled_models()) names += " " + b.name;
    throw UsageError("unknown model '" + o.model + "'; available:" + names);
  }
  auto cf = load_chain(o);
  auto b = make_chain(cf.cfg);
  auto defs = chain_defs(cf.cfg);
  const auto& sp = cf.cfg.space();
  defs["alpha1"] = Poly::constant(sp, cf.cfg.alpha1);
  defs["alpha2"] = Poly::constant(sp, cf.cfg.alpha2);
  defs["gamma"] = Poly::constant(sp, cf.cfg.gamma);
  // The conjugated generator; the bundled weight includes deltaW/alpha1 at equal temperatures.
  return {b.conjugated, defs, b.phi0.to_string(), b.phi0.to_string(), o.config};
}

int cmd_check(const Options& o, bool build) {
  auto t = resolve_target(o);
  const auto& sp = t.op.space();
  Poly phi = weight(o.phi.empty() ? t.phi : o.phi, sp, t.defs, "--phi");
  Poly psi = weight(o.psi.empty() ? t.psi : o.psi, sp, t.defs, "--psi");
  auto v = build ? construct(t.op, phi, psi) : check_necessary(t.op, phi, psi);
  json r = verdict_json(v);
  r["command"] = build ? "construct" : "check";
  r["source"] = t.source;
  r["operator"] = operator_to_json(t.op);
  emit(o, r);
  const bool ok = v.status == SusyStatus::verified || v.status == SusyStatus::constructed;
  return ok ? kOk : kMathFailure;
}

int cmd_verify_models(const Options& o) {
  json rows = json::array();
  bool all = true, found = o.model.empty();
  for (const auto& b : bundled_models()) {
    if (!o.model.empty() && b.name != o.model) continue;
    found = true;
    auto c = check_reference(b);
    all = all && c.pass;
    rows.push_back({{"model", b.name}, {"pass", c.pass}, {"detail", c.detail}});
  }
  if (!found) throw UsageError("unknown model '" + o.model + "'");
  emit(o, {{"command", "verify-models"}, {"models", rows}, {"all_pass", all}});
  return all ? kOk : kMathFailure;
}

std::vector<double> parse_w_grid(const std::string& text) {
  std::vector<double> out;
  auto num = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || s.empty() || !std::isfinite(v)) throw UsageError("--w-grid: bad number '" + s + "'");
    return v;
  };
  if (text.find(':') != std::string::npos) {
    std::stringstream ss(text);
    std::string a, b, c;
    std::getline(ss, a, ':');
    std::getline(ss, b, ':');
    std::getline(ss, c);
    double lo = num(a), hi = num(b), cnt = num(c);
    if (cnt < 1 || cnt != std::floor(cnt) || cnt > 1e6) throw UsageError("--w-grid: count must be a positive integer");
    const auto n = static_cast<std::size_t>(cnt);
    for (std::size_t i = 0; i < n; ++i) out.push_back(n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (n - 1));
    return out;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(num(item));
  if (out.empty()) throw UsageError("--w-grid is empty");
  return out;
}

int cmd_spectral(const Options& o) {
  auto grid = parse_w_grid(o.w_grid.empty() ? "-10:10:201" : o.w_grid);
  json rows = json::array();
  std::ostringstream csv;
  csv << "w,re1,im1,re2,im2,re3,im3,class\n";
  double worst = 0;
  for (double w : grid) {
    auto roots = cubic_roots(w);
    json rj = json::array();
    cplx sum = 0;
    double res = 0;
    csv << detail::format_double(w);
    for (const auto& l : roots) {
      rj.push_back(cplx_json(l));
      sum += l;
      res = std::max(res, cubic_residual(w, l));
      csv << "," << detail::format_double(l.real()) << "," << detail::format_double(l.imag());
    }
    worst = std::max({worst, res, std::abs(sum - 1.0)});
    auto cls = to_string(classify_roots(roots));
    csv << "," << cls << "\n";
    rows.push_back({{"w", w}, {"roots", rj}, {"class", cls}, {"max_residual", res}, {"root_sum", cplx_json(sum)}});
  }
  auto [m, Fm] = F_critical_point();
  json r{{"command", "spectral"}, {"rows", rows}, {"F_critical_point", {{"m", m}, {"F", Fm}}}, {"max_error", worst}};
  if (!o.config.empty()) {
    auto cf = load_chain(o);
    const auto& c = cf.cfg;
    std::vector<std::size_t> xs;
    for (int j = 1; j <= 2; ++j)
      for (std::size_t i = 0; i < c.n; ++i) xs.push_back(c.idx('x', j, i));
    json cps = json::array();
    for (const auto& x0 : critical_points(c.W0(), xs)) {
      auto rep = analyze_critical_point(c.W0(), xs, x0, c.gamma.get_d());
      json lj = json::array(), cj = json::array();
      for (const auto& l : rep.lambdas) lj.push_back(cplx_json(l));
      for (auto k : rep.classification) cj.push_back(to_string(k));
      json e{{"x0", rep.x0}, {"hessian_eigs", rep.hessian_eigs}, {"lambdas", lj}, {"classification", cj}};
      if (rep.mu1) e["mu1"] = *rep.mu1;
      cps.push_back(e);
    }
    r["critical_points"] = cps;
  }
  emit(o, r, {{".csv", csv.str()}});
  return worst < 1e-10 ? kOk : kMathFailure;
}

int cmd_flow(const Options& o) {
  auto cf = load_chain(o);
  const auto& cfg = cf.cfg;
  auto ov = parse_overrides(o.tol_overrides);
  HeteroclinicOptions hopt;
  apply_override(ov, "rel", hopt.tol.rel);
  apply_override(ov, "abs", hopt.tol.abs);
  apply_override(ov, "seed_factor", hopt.seed_factor);
  apply_override(ov, "arrive_tol", hopt.arrive_tol);
  reject_leftovers(ov, "flow");
  auto h = heteroclinic_gamma1(cfg, hopt);
  auto mono = phi0_monotonicity(cfg, h);
  json het{{"minimum", h.minimum},
           {"saddle", h.saddle},
           {"mu1", h.mu1},
           {"seed_sign", h.seed_sign},
           {"start_residual", h.start_residual},
           {"end_residual", h.end_residual},
           {"t_range", json::array({h.traj.times.front(), h.traj.times.back()})},
           {"samples", h.traj.size()}};
  json mj{{"strictly_increasing", mono.strictly_increasing},
          {"inside_sublevel", mono.inside_sublevel},
          {"min_increment", mono.min_increment},
          {"max_phi", mono.max_phi},
          {"saddle_phi", mono.saddle_phi}};

  // Cascade signs at seeded random points.
  std::mt19937_64 rng(o.seed);
  std::uniform_real_distribution<double> U(-2, 2);
  json cas = json::array();
  bool signs = true;
  for (int i = 0; i < 8; ++i) {
    State p(cfg.space()->size());
    for (auto& v : p) v = U(rng);
    auto c = cascade_check(cfg, p);
    signs = signs && c.signs_ok;
    cas.push_back({{"point", c.point}, {"values", c.values}, {"case", to_string(c.kind)}, {"signs_ok", c.signs_ok}});
  }

  // Quintic probe on one point of each cascade case, anchored on the w1 minimum.
  const auto x1 = cfg.idx('x', 1), y1 = cfg.idx('y', 1), z1 = cfg.idx('z', 1);
  const auto x2 = cfg.idx('x', 2), y2 = cfg.idx('y', 2), z2 = cfg.idx('z', 2);
  auto pt = [&](double a, double b, double c, double d, double e, double f) {
    State s(cfg.space()->size(), 0.0);
    for (auto [i, v] : {std::pair{x1, a}, {y1, b}, {z1, c}, {x2, d}, {y2, e}, {z2, f}}) s[i] = v;
    return s;
  };
  struct ProbeCase {
    State p;
    double expected;
  };
  std::vector<ProbeCase> cases{{pt(0.5, 0.1, 0.3, 0.2, 0.1, 0.0), 1},
                               {pt(0.5, 0.3, 0.5, 0.2, -0.1, 0.2), 3},
                               {pt(0.5, 0, 0.5, 0.2, 0, 0.2), 5}};
  json probes = json::array();
  bool slopes = true;
  auto grid = log_grid(1e-5, 1e-2, 8);
  for (const auto& c : cases) {
    auto r = quintic_bound_probe(cfg, c.p, grid);
    const bool ok = r.positive && std::abs(r.slope - c.expected) <= 0.3;
    slopes = slopes && ok;
    probes.push_back({{"point", r.point}, {"slope", r.slope}, {"expected_slope", c.expected}, {"witness_C", r.witness_C},
                      {"positive", r.positive}, {"ok", ok}});
  }
  const bool ident = cascade_identities_exact(cfg);
  const bool ok = h.start_residual < 1e-6 && h.end_residual < 1e-6 && mono.strictly_increasing && signs && slopes && ident;
  json r{{"command", "flow"},
         {"seed", o.seed},
         {"heteroclinic", het},
         {"monotonicity", mj},
         {"cascade_identities_exact", ident},
         {"cascade_samples", cas},
         {"quintic_probe", probes},
         {"ok", ok}};
  emit(o, r, {{".csv", trajectory_csv(cfg, h.traj, cf.csv_stride)}});
  return ok ? kOk : kMathFailure;
}

int cmd_obstruct(const Options& o) {
  auto cf = load_chain(o);
  const auto& cfg = cf.cfg;
  ObstructionSettings s;
  if (cf.obstruction) s = *cf.obstruction;
  else s.pert.homog = cfg.var('x', 2).pow(3);
  auto ov = parse_overrides(o.tol_overrides);
  apply_override(ov, "dt", s.opt.dt);
  apply_override(ov, "integer_tol", s.opt.integer_tol);
  apply_override(ov, "tail_margin", s.opt.tail_margin);
  reject_leftovers(ov, "obstruct");
  auto h = heteroclinic_gamma1(cfg);
  ObstructionReport rep;
  try {
    rep = transport_solve(cfg, s.pert, h, s.opt);
  } catch (const StructuralError& e) {
    throw UsageError(o.config + ": /obstruction: " + e.what());
  }
  json r{{"command", "obstruct"}, {"obstruction", obstruction_json(rep)}};
  try {
    State start(cfg.space()->size(), 0.0);
    start[cfg.idx('x', 1)] = 0.6;
    start[cfg.idx('y', 1)] = 0.1;
    start[cfg.idx('z', 1)] = 0.4;
    auto inv = invariant_subspace_check(cfg, start);
    r["invariant_subspace"] = {{"symbolic_zero", inv.symbolic_zero},
                               {"max_drift", inv.max_drift},
                               {"max_deviation_from_nu1", inv.max_deviation_from_nu1}};
  } catch (const StructuralError& e) {
    r["invariant_subspace"] = {{"skipped", e.what()}};
  }
  emit(o, r);
  // No obstruction is the expected outcome when the right side vanishes.
  return rep.verdict != Verdict::inconclusive || rep.rhs_zero ? kOk : kMathFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Supersymmetric factorization toolkit"};
  app.footer(kGrammar);
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* s) {
    s->add_option("--out", o.out, "Report path (JSON); side files such as CSV share its stem");
    s->add_option("--seed", o.seed, "Seed for randomized samples");
    s->add_option("--tol-overrides", o.tol_overrides, "Comma separated key=value tolerance overrides");
  };
  auto target = [&](CLI::App* s) {
    s->add_option("--operator", o.operator_file, "Operator file (JSON)");
    s->add_option("--model", o.model, "Bundled model name");
    s->add_option("--config", o.config, "Chain config (JSON)");
    s->add_option("--phi", o.phi, "Weight phi (polynomial expression)");
    s->add_option("--psi", o.psi, "Weight psi (polynomial expression)");
  };
  auto* check = app.add_subcommand("check", "Test the kernel conditions and verify a factorization");
  auto* build = app.add_subcommand("construct", "Construct A = B + C for given weights");
  auto* models = app.add_subcommand("verify-models", "Check every bundled reference structure");
  auto* spectral = app.add_subcommand("spectral", "Cubic spectrum over a w-grid");
  auto* flow = app.add_subcommand("flow", "Heteroclinic orbit, monotonicity and cascade diagnostics");
  auto* obstruct = app.add_subcommand("obstruct", "Transport obstruction on the heteroclinic orbit");
  for (auto* s : {check, build}) {
    target(s);
    add_common(s);
  }
  models->add_option("--model", o.model, "Restrict to one bundled model");
  add_common(models);
  spectral->add_option("--w-grid", o.w_grid, "lo:hi:count or a comma separated list (default -10:10:201)");
  spectral->add_option("--config", o.config, "Chain config whose critical points are analyzed");
  add_common(spectral);
  for (auto* s : {flow, obstruct}) {
    s->add_option("--config", o.config, "Chain config (JSON)")->required();
    add_common(s);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (check->parsed()) return cmd_check(o, false);
    if (build->parsed()) return cmd_check(o, true);
    if (models->parsed()) return cmd_verify_models(o);
    if (spectral->parsed()) return cmd_spectral(o);
    if (flow->parsed()) return cmd_flow(o);
    if (obstruct->parsed()) return cmd_obstruct(o);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "failed: " << e.what() << "\n";
    return kMathFailure;
  }
  return kUsage;
}
