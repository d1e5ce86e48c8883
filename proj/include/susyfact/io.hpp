#pragma once

// JSON ingestion of operators and chain configs, canonical report output, CSV export.

#include "susyfact/obstruction.hpp"
#include "susyfact/parse.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace susyfact {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Malformed input; the message carries the file and JSON location.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------- canonical output

namespace detail {

inline std::string format_double(double v) {
  if (!std::isfinite(v)) return "null";
  if (v == 0) return "0";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void dump_canonical(const json& j, std::ostringstream& os, int indent) {
  const std::string pad(static_cast<std::size_t>(indent + 2), ' '), end(static_cast<std::size_t>(indent), ' ');
  switch (j.type()) {
    case json::value_t::object: {
      if (j.empty()) {
        os << "{}";
        return;
      }
      // nlohmann objects are std::map backed, so iteration is in sorted key order.
      os << "{\n";
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) os << ",\n";
        first = false;
        os << pad << json(it.key()).dump() << ": ";
        dump_canonical(it.value(), os, indent + 2);
      }
      os << "\n" << end << "}";
      return;
    }
    case json::value_t::array: {
      if (j.empty()) {
        os << "[]";
        return;
      }
      bool scalars = true;
      for (const auto& e : j) scalars = scalars && !e.is_structured();
      if (scalars) {
        os << "[";
        for (std::size_t i = 0; i < j.size(); ++i) {
          if (i) os << ", ";
          dump_canonical(j[i], os, indent);
        }
        os << "]";
        return;
      }
      os << "[\n";
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) os << ",\n";
        os << pad;
        dump_canonical(j[i], os, indent + 2);
      }
      os << "\n" << end << "]";
      return;
    }
    case json::value_t::number_float: os << format_double(j.get<double>()); return;
    default: os << j.dump(); return;
  }
}

}  // namespace detail

/// Sorted keys, two-space indent, floats at 17 significant digits.
inline std::string canonical_dump(const json& j) {
  std::ostringstream os;
  detail::dump_canonical(j, os, 0);
  os << "\n";
  return os.str();
}

/// Writes through a temporary file in the same directory and renames it into place.
inline void write_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write '" + tmp.string() + "'");
    f << content;
    if (!f.flush()) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

inline json cplx_json(cplx z) { return json::array({z.real(), z.imag()}); }

// ---------------------------------------------------------------- input helpers

/// Reads a JSON document, reporting parse errors with line and column.
inline json read_json_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError(path + ": cannot open file");
  std::stringstream ss;
  ss << f.rdbuf();
  const std::string text = ss.str();
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min<std::size_t>(e.byte ? e.byte - 1 : 0, text.size()); ++i) {
      if (text[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    throw ConfigError(path + ":" + std::to_string(line) + ":" + std::to_string(col) + ": malformed JSON");
  }
}

/// Cursor into a JSON document that remembers its location for error messages.
class JsonAt {
 public:
  JsonAt(const json& j, std::string file, std::string ptr = "") : j_(&j), file_(std::move(file)), ptr_(std::move(ptr)) {}

  [[noreturn]] void fail(const std::string& msg) const {
    throw ConfigError(file_ + ": " + (ptr_.empty() ? "/" : ptr_) + ": " + msg);
  }
  const json& value() const { return *j_; }
  bool has(const std::string& k) const { return j_->is_object() && j_->contains(k); }
  JsonAt operator[](const std::string& k) const {
    if (!j_->is_object()) fail("expected an object");
    if (!j_->contains(k)) fail("missing key '" + k + "'");
    return {j_->at(k), file_, ptr_ + "/" + k};
  }
  JsonAt operator[](std::size_t i) const {
    if (!j_->is_array()) fail("expected an array");
    if (i >= j_->size()) fail("index out of range");
    return {j_->at(i), file_, ptr_ + "/" + std::to_string(i)};
  }
  std::size_t size() const {
    if (!j_->is_array()) fail("expected an array");
    return j_->size();
  }
  std::vector<std::string> keys() const {
    if (!j_->is_object()) fail("expected an object");
    std::vector<std::string> k;
    for (auto it = j_->begin(); it != j_->end(); ++it) k.push_back(it.key());
    return k;
  }
  void allow_keys(std::initializer_list<const char*> allowed) const {
    for (const auto& k : keys()) {
      bool ok = false;
      for (const char* a : allowed) ok = ok || k == a;
      if (!ok) fail("unknown key '" + k + "'");
    }
  }

  std::string str() const {
    if (!j_->is_string()) fail("expected a string");
    return j_->get<std::string>();
  }
  bool boolean() const {
    if (!j_->is_boolean()) fail("expected true or false");
    return j_->get<bool>();
  }
  double number() const {
    if (!j_->is_number()) fail("expected a number");
    return j_->get<double>();
  }
  long integer() const {
    if (!j_->is_number_integer()) fail("expected an integer");
    return j_->get<long>();
  }
  /// Integers or strings "p/q"; floating literals are rejected to keep data exact.
  Rational rational() const {
    if (j_->is_number_integer()) return Rational(j_->get<long>());
    if (j_->is_string()) {
      try {
        return parse_rational(j_->get<std::string>());
      } catch (const StructuralError& e) {
        fail(e.what());
      }
    }
    fail("expected an integer or a rational string such as \"3/2\"");
  }
  Poly poly(const SpacePtr& sp, const PolyDefs& defs = {}) const {
    try {
      return parse_poly(str(), sp, defs);
    } catch (const StructuralError& e) {
      fail(e.what());
    }
  }

 private:
  const json* j_;
  std::string file_, ptr_;
};

inline std::string rational_json(const Rational& r) { return to_string(r); }

// ---------------------------------------------------------------- operators

/// An operator file: the operator plus named polynomials usable in weight expressions.
struct OperatorFile {
  std::optional<SecondOrderOperator> op;
  PolyDefs defs;
  std::optional<std::string> phi, psi;  // default weight expressions
};

inline OperatorFile operator_from_json(const json& doc, const std::string& file) {
  JsonAt r(doc, file);
  r.allow_keys({"schema_version", "variables", "blocks", "semiclassical", "B", "v", "v0", "defs", "weights", "name"});
  std::vector<std::string> names;
  auto vars = r["variables"];
  for (std::size_t i = 0; i < vars.size(); ++i) names.push_back(vars[i].str());
  std::vector<std::pair<std::string, std::vector<std::string>>> blocks;
  if (r.has("blocks")) {
    auto bl = r["blocks"];
    for (std::size_t b = 0; b < bl.size(); ++b) {
      bl[b].allow_keys({"name", "vars"});
      std::vector<std::string> bv;
      auto vs = bl[b]["vars"];
      for (std::size_t i = 0; i < vs.size(); ++i) bv.push_back(vs[i].str());
      blocks.emplace_back(bl[b]["name"].str(), bv);
    }
  }
  SpacePtr sp;
  try {
    sp = blocks.empty() ? VarSpace::make(names) : VarSpace::make_named(names, blocks);
  } catch (const StructuralError& e) {
    r.fail(e.what());
  }
  OperatorFile out;
  if (r.has("defs")) {
    auto d = r["defs"];
    // Definitions may refer to earlier ones in sorted key order.
    for (const auto& k : d.keys()) {
      if (sp->find(k) || k == "h") d[k].fail("definition shadows a variable");
      out.defs[k] = d[k].poly(sp, out.defs);
    }
  }
  auto var_index = [&](const JsonAt& a) -> std::size_t {
    if (a.value().is_number_integer()) {
      long i = a.integer();
      if (i < 0 || static_cast<std::size_t>(i) >= sp->size()) a.fail("variable index out of range");
      return static_cast<std::size_t>(i);
    }
    auto i = sp->find(a.str());
    if (!i) a.fail("unknown variable '" + a.str() + "'");
    return *i;
  };
  const bool sc = r["semiclassical"].boolean();
  PolyMatrix B = zero_matrix(sp);
  auto bj = r["B"];
  for (std::size_t k = 0; k < bj.size(); ++k) {
    auto e = bj[k];
    e.allow_keys({"i", "j", "poly"});
    auto i = var_index(e["i"]), j = var_index(e["j"]);
    Poly p = e["poly"].poly(sp, out.defs);
    if (!B[i][j].is_zero() || (i != j && !B[j][i].is_zero())) e.fail("duplicate B entry");
    B[i][j] = p;
    B[j][i] = p;
  }
  PolyVector v = zero_vector(sp);
  auto vj = r["v"];
  for (std::size_t k = 0; k < vj.size(); ++k) {
    auto e = vj[k];
    e.allow_keys({"i", "poly"});
    auto i = var_index(e["i"]);
    if (!v[i].is_zero()) e.fail("duplicate v entry");
    v[i] = e["poly"].poly(sp, out.defs);
  }
  Poly v0 = r["v0"].poly(sp, out.defs);
  if (r.has("weights")) {
    auto w = r["weights"];
    w.allow_keys({"phi", "psi"});
    if (w.has("phi")) out.phi = w["phi"].str();
    if (w.has("psi")) out.psi = w["psi"].str();
  }
  try {
    out.op.emplace(sp, B, v, v0, sc);
  } catch (const StructuralError& e) {
    r.fail(e.what());
  }
  return out;
}

/// Serializes only the operator itself; B is written as its upper triangle.
inline json operator_to_json(const SecondOrderOperator& P) {
  const auto& sp = P.space();
  json j;
  j["schema_version"] = kSchemaVersion;
  j["variables"] = sp->names();
  json bl = json::array();
  for (const auto& b : sp->blocks()) {
    json vs = json::array();
    for (auto i : b.vars) vs.push_back(sp->name(i));
    bl.push_back({{"name", b.name}, {"vars", vs}});
  }
  j["blocks"] = bl;
  j["semiclassical"] = P.semiclassical();
  json B = json::array();
  for (std::size_t i = 0; i < P.dim(); ++i)
    for (std::size_t k = i; k < P.dim(); ++k)
      if (!P.B()[i][k].is_zero()) B.push_back({{"i", sp->name(i)}, {"j", sp->name(k)}, {"poly", P.B()[i][k].to_string()}});
  j["B"] = B;
  json v = json::array();
  for (std::size_t i = 0; i < P.dim(); ++i)
    if (!P.v()[i].is_zero()) v.push_back({{"i", sp->name(i)}, {"poly", P.v()[i].to_string()}});
  j["v"] = v;
  j["v0"] = P.v0().to_string();
  return j;
}

inline json matrix_json(const PolyMatrix& M) {
  json a = json::array();
  for (const auto& row : M) {
    json r = json::array();
    for (const auto& e : row) r.push_back(e.to_string());
    a.push_back(r);
  }
  return a;
}

inline json verdict_json(const SusyVerdict& v) {
  json j;
  j["status"] = to_string(v.status);
  if (!v.detail.empty()) j["detail"] = v.detail;
  if (v.failure_witness) j["witness"] = v.failure_witness->to_string();
  if (v.structure) {
    const auto& s = *v.structure;
    j["structure"] = {{"A", matrix_json(s.A)},
                      {"sym_part", matrix_json(s.sym_part)},
                      {"antisym_part", matrix_json(s.antisym_part)},
                      {"phi", s.phi.to_string()},
                      {"psi", s.psi.to_string()},
                      {"weights", {{"phi", s.phi.to_string()}, {"psi", s.psi.to_string()}, {"h_shift", s.h_shift}}}};
  }
  return j;
}

// ---------------------------------------------------------------- chain configs

struct ObstructionSettings {
  Perturbation pert;
  ObstructionOptions opt;
};

struct ChainFile {
  ChainConfig cfg;
  std::optional<ObstructionSettings> obstruction;
  std::size_t csv_stride = 10;
};

/// Definitions available in weight expressions for a chain: W1, W2, deltaW, phi0.
inline PolyDefs chain_defs(const ChainConfig& cfg) {
  return {{"W1", cfg.W1}, {"W2", cfg.W2}, {"deltaW", cfg.deltaW}, {"phi0", chain_phi0(cfg)}};
}

inline ChainFile chain_from_json(const json& doc, const std::string& file) {
  JsonAt r(doc, file);
  r.allow_keys({"schema_version", "name", "n", "W1", "W2", "deltaW", "alpha1", "alpha2", "gamma", "obstruction", "flow"});
  ChainFile out;
  long n = r["n"].integer();
  if (n < 1 || n > 4) r["n"].fail("n must be between 1 and 4");
  auto& c = out.cfg;
  c.n = static_cast<std::size_t>(n);
  auto sp = chain_space(c.n);
  c.W1 = r["W1"].poly(sp);
  c.W2 = r["W2"].poly(sp);
  c.deltaW = r.has("deltaW") ? r["deltaW"].poly(sp) : Poly(sp);
  c.alpha1 = r["alpha1"].rational();
  c.alpha2 = r["alpha2"].rational();
  c.gamma = r.has("gamma") ? r["gamma"].rational() : Rational(1);
  try {
    validate(c);
  } catch (const StructuralError& e) {
    r.fail(e.what());
  }
  if (r.has("flow")) {
    auto f = r["flow"];
    f.allow_keys({"csv_stride"});
    if (f.has("csv_stride")) {
      long s = f["csv_stride"].integer();
      if (s < 1) f["csv_stride"].fail("stride must be positive");
      out.csv_stride = static_cast<std::size_t>(s);
    }
  }
  if (r.has("obstruction")) {
    auto o = r["obstruction"];
    o.allow_keys({"bump", "homog", "sign", "branch", "dt", "tail_margin"});
    ObstructionSettings s;
    auto b = o["bump"];
    b.allow_keys({"lo", "hi", "amp"});
    s.pert.bump = Bump{b["lo"].number(), b["hi"].number(), b.has("amp") ? b["amp"].number() : 1.0};
    s.pert.homog = o["homog"].poly(sp);
    s.pert.m = s.pert.homog.degree();
    if (!s.pert.homog.is_homogeneous_in("w2", s.pert.m)) o["homog"].fail("must be homogeneous in the second oscillator");
    if (o.has("sign")) s.pert.sign = static_cast<int>(o["sign"].integer());
    if (o.has("branch")) {
      std::string br = o["branch"].str();
      if (br == "minimum") s.opt.branch = Branch::minimum;
      else if (br == "saddle") s.opt.branch = Branch::saddle;
      else o["branch"].fail("branch must be \"minimum\" or \"saddle\"");
    }
    if (o.has("dt")) s.opt.dt = o["dt"].number();
    if (o.has("tail_margin")) s.opt.tail_margin = o["tail_margin"].number();
    out.obstruction = s;
  }
  return out;
}

inline json chain_to_json(const ChainConfig& c) {
  return {{"schema_version", kSchemaVersion}, {"n", c.n}, {"W1", c.W1.to_string()}, {"W2", c.W2.to_string()},
          {"deltaW", c.deltaW.to_string()}, {"alpha1", rational_json(c.alpha1)}, {"alpha2", rational_json(c.alpha2)},
          {"gamma", rational_json(c.gamma)}};
}

// ---------------------------------------------------------------- reports

inline json obstruction_json(const ObstructionReport& r) {
  json a = json::array();
  for (int k : r.alpha0) a.push_back(k);
  return {{"alpha", a},
          {"coefficient", cplx_json(r.coefficient)},
          {"lambda_dot_alpha", cplx_json(r.lambda_dot_alpha)},
          {"mu1", r.mu1},
          {"exponent", cplx_json(r.exponent)},
          {"nearest_integer_distance", r.nearest_integer_distance},
          {"exponent_is_integer", r.exponent_is_integer},
          {"tail_rate_fit", r.tail_rate_fit},
          {"tail_rate_rel_error", r.tail_rate_rel_error},
          {"tail_constancy", r.tail_constancy},
          {"forced_constant", cplx_json(r.forced_constant)},
          {"forced_constant_quad", cplx_json(r.forced_constant_quad)},
          {"support_t", json::array({r.support_t_lo, r.support_t_hi})},
          {"branch", r.branch == Branch::minimum ? "minimum" : "saddle"},
          {"rhs_zero", r.rhs_zero},
          {"verdict", to_string(r.verdict)},
          {"note", r.note}};
}

/// Columns t, x..., y..., z..., phi0, one row every `stride` samples (the last sample always).
inline std::string trajectory_csv(const ChainConfig& cfg, const Trajectory& tr, std::size_t stride) {
  std::ostringstream os;
  const auto& sp = cfg.space();
  os << "t";
  for (const auto& n : sp->names()) os << "," << n;
  os << ",phi0\n";
  CompiledPoly phi(chain_phi0(cfg));
  for (std::size_t k = 0; k < tr.size(); ++k) {
    if (k % stride && k + 1 != tr.size()) continue;
    os << detail::format_double(tr.times[k]);
    for (double v : tr.states[k]) os << "," << detail::format_double(v);
    os << "," << detail::format_double(phi(tr.states[k])) << "\n";
  }
  return os.str();
}

}  // namespace susyfact
