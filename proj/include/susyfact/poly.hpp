#pragma once

// Exact multivariate polynomials over Q with a separate grading by powers of
// the semiclassical parameter h.

#include <gmpxx.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace susyfact {

using Rational = mpq_class;

/// Raised on malformed input or incompatible operands (mismatched spaces,
/// unknown variables, missing assignments).
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline Rational make_rational(long num, long den = 1) {
  if (den == 0) throw StructuralError("zero denominator");
  Rational r(num, den);
  r.canonicalize();
  return r;
}

inline Rational parse_rational(const std::string& text) {
  if (text.empty()) throw StructuralError("empty rational literal");
  for (char c : text) {
    if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '/' || c == '+'))
      throw StructuralError("rational literal must be of the form p or p/q: '" + text + "'");
  }
  std::string t = text[0] == '+' ? text.substr(1) : text;
  Rational r;
  if (r.set_str(t, 10) != 0) throw StructuralError("bad rational literal '" + text + "'");
  if (r.get_den() == 0) throw StructuralError("zero denominator in '" + text + "'");
  r.canonicalize();
  return r;
}

inline std::string to_string(const Rational& r) { return r.get_str(); }

/// Ordered variable names with a partition into named blocks.
class VarSpace {
 public:
  struct Block {
    std::string name;
    std::vector<std::size_t> vars;
    bool operator==(const Block&) const = default;
  };

  explicit VarSpace(std::vector<std::string> names, std::vector<Block> blocks = {})
      : names_(std::move(names)), blocks_(std::move(blocks)) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
      if (names_[i].empty()) throw StructuralError("empty variable name");
      if (names_[i] == "h") throw StructuralError("'h' is reserved for the semiclassical parameter");
      if (!index_.emplace(names_[i], i).second)
        throw StructuralError("duplicate variable name '" + names_[i] + "'");
    }
    if (blocks_.empty()) {
      Block all{"all", {}};
      for (std::size_t i = 0; i < names_.size(); ++i) all.vars.push_back(i);
      blocks_.push_back(std::move(all));
    }
    std::vector<int> seen(names_.size(), 0);
    for (const auto& b : blocks_) {
      for (auto v : b.vars) {
        if (v >= names_.size()) throw StructuralError("block '" + b.name + "' references unknown index");
        if (seen[v]++) throw StructuralError("blocks overlap at variable '" + names_[v] + "'");
      }
    }
    for (std::size_t i = 0; i < seen.size(); ++i)
      if (!seen[i]) throw StructuralError("variable '" + names_[i] + "' is in no block");
  }

  static std::shared_ptr<const VarSpace> make(std::vector<std::string> names,
                                              std::vector<Block> blocks = {}) {
    return std::make_shared<const VarSpace>(std::move(names), std::move(blocks));
  }

  /// Builds blocks from (block name, variable names) pairs.
  static std::shared_ptr<const VarSpace> make_named(
      std::vector<std::string> names,
      const std::vector<std::pair<std::string, std::vector<std::string>>>& blocks) {
    std::unordered_map<std::string, std::size_t> idx;
    for (std::size_t i = 0; i < names.size(); ++i) idx[names[i]] = i;
    std::vector<Block> bl;
    for (const auto& [bname, vars] : blocks) {
      Block b{bname, {}};
      for (const auto& v : vars) {
        auto it = idx.find(v);
        if (it == idx.end()) throw StructuralError("block '" + bname + "' names unknown variable '" + v + "'");
        b.vars.push_back(it->second);
      }
      bl.push_back(std::move(b));
    }
    return make(std::move(names), std::move(bl));
  }

  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const std::vector<Block>& blocks() const { return blocks_; }

  std::optional<std::size_t> find(const std::string& n) const {
    auto it = index_.find(n);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t index(const std::string& n) const {
    auto i = find(n);
    if (!i) throw StructuralError("unknown variable '" + n + "'");
    return *i;
  }
  const Block& block(const std::string& n) const {
    for (const auto& b : blocks_)
      if (b.name == n) return b;
    throw StructuralError("unknown block '" + n + "'");
  }

  bool operator==(const VarSpace& o) const { return names_ == o.names_ && blocks_ == o.blocks_; }

 private:
  std::vector<std::string> names_;
  std::vector<Block> blocks_;
  std::unordered_map<std::string, std::size_t> index_;
};

using SpacePtr = std::shared_ptr<const VarSpace>;

inline bool same_space(const SpacePtr& a, const SpacePtr& b) { return a == b || (a && b && *a == *b); }

struct Monomial {
  std::vector<int> exps;
  int hpow = 0;

  int degree() const { return std::accumulate(exps.begin(), exps.end(), 0); }
  bool operator==(const Monomial&) const = default;
};

/// Graded lexicographic: total degree ascending, then larger exponents of
/// earlier variables first, then h-power ascending.
struct MonomialOrder {
  bool operator()(const Monomial& a, const Monomial& b) const {
    const int da = a.degree(), db = b.degree();
    if (da != db) return da < db;
    for (std::size_t i = 0; i < a.exps.size(); ++i)
      if (a.exps[i] != b.exps[i]) return a.exps[i] > b.exps[i];
    return a.hpow < b.hpow;
  }
};

class Poly {
 public:
  using Terms = std::map<Monomial, Rational, MonomialOrder>;

  Poly() = default;
  explicit Poly(SpacePtr space) : space_(std::move(space)) {
    if (!space_) throw StructuralError("polynomial needs a variable space");
  }

  static Poly constant(SpacePtr space, const Rational& c) {
    Poly p(std::move(space));
    p.add_term(Monomial{std::vector<int>(p.space_->size(), 0), 0}, c);
    return p;
  }
  static Poly variable(SpacePtr space, std::size_t i) {
    Poly p(std::move(space));
    if (i >= p.space_->size()) throw StructuralError("variable index out of range");
    Monomial m{std::vector<int>(p.space_->size(), 0), 0};
    m.exps[i] = 1;
    p.add_term(m, 1);
    return p;
  }
  static Poly variable(SpacePtr space, const std::string& name) {
    auto i = space->index(name);
    return variable(std::move(space), i);
  }
  /// The monomial h^k.
  static Poly hbar(SpacePtr space, int k = 1) {
    Poly p(std::move(space));
    p.add_term(Monomial{std::vector<int>(p.space_->size(), 0), k}, 1);
    return p;
  }
  static Poly monomial(SpacePtr space, std::vector<int> exps, int hpow, const Rational& c) {
    Poly p(std::move(space));
    if (exps.size() != p.space_->size()) throw StructuralError("exponent vector length does not match space");
    for (int e : exps)
      if (e < 0) throw StructuralError("negative exponent");
    if (hpow < 0) throw StructuralError("negative h-power");
    p.add_term(Monomial{std::move(exps), hpow}, c);
    return p;
  }

  const SpacePtr& space() const { return space_; }
  const Terms& terms() const { return terms_; }
  bool is_zero() const { return terms_.empty(); }
  std::size_t size() const { return terms_.size(); }

  /// Adds c·m; drops the term if it cancels.
  void add_term(const Monomial& m, const Rational& c) {
    if (c == 0) return;
    auto [it, inserted] = terms_.try_emplace(m, c);
    if (!inserted) {
      it->second += c;
      if (it->second == 0) terms_.erase(it);
    }
  }

  Rational coeff(const Monomial& m) const {
    auto it = terms_.find(m);
    return it == terms_.end() ? Rational(0) : it->second;
  }

  Poly& operator+=(const Poly& o) {
    check_space(o);
    for (const auto& [m, c] : o.terms_) add_term(m, c);
    return *this;
  }
  Poly& operator-=(const Poly& o) {
    check_space(o);
    for (const auto& [m, c] : o.terms_) add_term(m, -c);
    return *this;
  }
  Poly& operator*=(const Rational& s) {
    if (s == 0) {
      terms_.clear();
      return *this;
    }
    for (auto& [m, c] : terms_) c *= s;
    return *this;
  }
  friend Poly operator+(Poly a, const Poly& b) { return a += b; }
  friend Poly operator-(Poly a, const Poly& b) { return a -= b; }
  friend Poly operator-(Poly a) { return a *= Rational(-1); }
  friend Poly operator*(Poly a, const Rational& s) { return a *= s; }
  friend Poly operator*(const Rational& s, Poly a) { return a *= s; }
  friend Poly operator*(const Poly& a, const Poly& b) {
    a.check_space(b);
    Poly r(a.space_);
    const std::size_t n = a.space_->size();
    Monomial m{std::vector<int>(n, 0), 0};
    for (const auto& [ma, ca] : a.terms_) {
      for (const auto& [mb, cb] : b.terms_) {
        for (std::size_t i = 0; i < n; ++i) m.exps[i] = ma.exps[i] + mb.exps[i];
        m.hpow = ma.hpow + mb.hpow;
        r.add_term(m, ca * cb);
      }
    }
    return r;
  }
  Poly& operator*=(const Poly& o) { return *this = *this * o; }

  bool operator==(const Poly& o) const { return same_space(space_, o.space_) && terms_ == o.terms_; }

  Poly pow(unsigned k) const {
    Poly r = constant(space_, 1);
    Poly base = *this;
    while (k) {
      if (k & 1u) r *= base;
      k >>= 1u;
      if (k) base *= base;
    }
    return r;
  }

  Poly partial(std::size_t i) const {
    if (i >= space_->size()) throw StructuralError("partial: variable index out of range");
    Poly r(space_);
    for (const auto& [m, c] : terms_) {
      if (m.exps[i] == 0) continue;
      Monomial d = m;
      d.exps[i] -= 1;
      r.add_term(d, c * m.exps[i]);
    }
    return r;
  }
  Poly partial(const std::string& var) const { return partial(space_->index(var)); }

  /// Total degree in the variables of the block.
  static int block_degree(const Monomial& m, const VarSpace::Block& b) {
    int d = 0;
    for (auto v : b.vars) d += m.exps[v];
    return d;
  }

  std::map<int, Poly> homogeneous_components(const std::string& block) const {
    const auto& b = space_->block(block);
    std::map<int, Poly> out;
    for (const auto& [m, c] : terms_) {
      int d = block_degree(m, b);
      out.try_emplace(d, space_).first->second.add_term(m, c);
    }
    return out;
  }

  /// True when every term has the given degree in the block (zero counts).
  bool is_homogeneous_in(const std::string& block, int degree) const {
    const auto& b = space_->block(block);
    return std::all_of(terms_.begin(), terms_.end(),
                       [&](const auto& t) { return block_degree(t.first, b) == degree; });
  }

  /// Coefficient of h^k, returned without the h factor.
  Poly h_component(int k) const {
    Poly r(space_);
    for (const auto& [m, c] : terms_) {
      if (m.hpow != k) continue;
      Monomial d = m;
      d.hpow = 0;
      r.add_term(d, c);
    }
    return r;
  }
  std::map<int, Poly> h_components() const {
    std::map<int, Poly> out;
    for (const auto& [m, c] : terms_) {
      Monomial d = m;
      d.hpow = 0;
      out.try_emplace(m.hpow, space_).first->second.add_term(d, c);
    }
    return out;
  }
  std::optional<int> min_h_order() const {
    std::optional<int> r;
    for (const auto& [m, c] : terms_) r = r ? std::min(*r, m.hpow) : m.hpow;
    return r;
  }
  int max_h_order() const {
    int r = 0;
    for (const auto& [m, c] : terms_) r = std::max(r, m.hpow);
    return r;
  }
  bool h_free() const { return max_h_order() == 0; }

  /// Multiplies by h^k (k may be negative if every term allows it).
  Poly shift_h(int k) const {
    Poly r(space_);
    for (const auto& [m, c] : terms_) {
      Monomial d = m;
      d.hpow += k;
      if (d.hpow < 0) throw StructuralError("shift_h would create a negative h-power");
      r.add_term(d, c);
    }
    return r;
  }
  /// Sets h = 1, collapsing the grading.
  Poly freeze_h() const {
    Poly r(space_);
    for (const auto& [m, c] : terms_) {
      Monomial d = m;
      d.hpow = 0;
      r.add_term(d, c);
    }
    return r;
  }

  int degree() const {
    int d = 0;
    for (const auto& [m, c] : terms_) d = std::max(d, m.degree());
    return d;
  }
  bool depends_on(std::size_t i) const {
    return std::any_of(terms_.begin(), terms_.end(), [&](const auto& t) { return t.first.exps[i] > 0; });
  }

  /// Terms that do not involve any of the listed variables, i.e. the
  /// restriction to the subspace where those variables vanish.
  Poly restrict_zero(const std::vector<std::size_t>& vars) const {
    Poly r(space_);
    for (const auto& [m, c] : terms_) {
      bool keep = std::all_of(vars.begin(), vars.end(), [&](auto v) { return m.exps[v] == 0; });
      if (keep) r.add_term(m, c);
    }
    return r;
  }

  /// Replaces variable i by a polynomial over the same space.
  Poly substitute(std::size_t i, const Poly& repl) const {
    check_space(repl);
    std::map<int, Poly> powers;
    Poly r(space_);
    for (const auto& [m, c] : terms_) {
      Monomial rest = m;
      const int e = rest.exps[i];
      rest.exps[i] = 0;
      Poly t(space_);
      t.add_term(rest, c);
      if (e > 0) {
        auto it = powers.find(e);
        if (it == powers.end()) it = powers.emplace(e, repl.pow(static_cast<unsigned>(e))).first;
        t = t * it->second;
      }
      r += t;
    }
    return r;
  }

  /// Moves the polynomial into another space, matching variables by name.
  /// Every variable the polynomial depends on must exist in the target.
  Poly embed(const SpacePtr& target) const {
    std::vector<std::optional<std::size_t>> map(space_->size());
    for (std::size_t i = 0; i < space_->size(); ++i) map[i] = target->find(space_->name(i));
    Poly r(target);
    for (const auto& [m, c] : terms_) {
      Monomial d{std::vector<int>(target->size(), 0), m.hpow};
      for (std::size_t i = 0; i < m.exps.size(); ++i) {
        if (m.exps[i] == 0) continue;
        if (!map[i]) throw StructuralError("embed: variable '" + space_->name(i) + "' missing in target space");
        d.exps[*map[i]] += m.exps[i];
      }
      r.add_term(d, c);
    }
    return r;
  }

  double evaluate(const std::vector<double>& point, double h) const {
    if (point.size() != space_->size()) throw StructuralError("evaluate: point dimension mismatch");
    double s = 0.0;
    for (const auto& [m, c] : terms_) {
      double t = c.get_d();
      for (std::size_t i = 0; i < m.exps.size(); ++i)
        if (m.exps[i]) t *= std::pow(point[i], m.exps[i]);
      if (m.hpow) t *= std::pow(h, m.hpow);
      s += t;
    }
    return s;
  }
  double evaluate(const std::map<std::string, double>& point, double h) const {
    std::vector<double> x(space_->size(), 0.0);
    std::vector<bool> used(space_->size(), false);
    for (const auto& [m, c] : terms_)
      for (std::size_t i = 0; i < m.exps.size(); ++i)
        if (m.exps[i]) used[i] = true;
    for (std::size_t i = 0; i < space_->size(); ++i) {
      auto it = point.find(space_->name(i));
      if (it == point.end()) {
        if (used[i]) throw StructuralError("evaluate: no value for variable '" + space_->name(i) + "'");
        continue;
      }
      x[i] = it->second;
    }
    return evaluate(x, h);
  }
  /// Sum of |term| values; a scale for relative error checks.
  double evaluate_abs(const std::vector<double>& point, double h) const {
    double s = 0.0;
    for (const auto& [m, c] : terms_) {
      double t = std::abs(c.get_d());
      for (std::size_t i = 0; i < m.exps.size(); ++i)
        if (m.exps[i]) t *= std::pow(std::abs(point[i]), m.exps[i]);
      if (m.hpow) t *= std::pow(std::abs(h), m.hpow);
      s += t;
    }
    return s;
  }

  std::string to_string() const {
    if (terms_.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (const auto& [m, c] : terms_) {
      Rational a = abs(c);
      bool neg = c < 0;
      if (first) {
        if (neg) os << "-";
      } else {
        os << (neg ? " - " : " + ");
      }
      first = false;
      std::vector<std::string> factors;
      for (std::size_t i = 0; i < m.exps.size(); ++i) {
        if (!m.exps[i]) continue;
        factors.push_back(space_->name(i) + (m.exps[i] > 1 ? "^" + std::to_string(m.exps[i]) : ""));
      }
      if (m.hpow) factors.push_back("h" + (m.hpow > 1 ? "^" + std::to_string(m.hpow) : std::string()));
      if (factors.empty() || a != 1) {
        os << a.get_str();
        if (!factors.empty()) os << "*";
      }
      for (std::size_t k = 0; k < factors.size(); ++k) os << (k ? "*" : "") << factors[k];
    }
    return os.str();
  }

 private:
  void check_space(const Poly& o) const {
    if (!same_space(space_, o.space_)) throw StructuralError("polynomials live in different variable spaces");
  }

  SpacePtr space_;
  Terms terms_;
};

enum class ArithKind { add, sub, mul };

inline Poly arith(const Poly& a, const Poly& b, ArithKind kind) {
  switch (kind) {
    case ArithKind::add: return a + b;
    case ArithKind::sub: return a - b;
    case ArithKind::mul: return a * b;
  }
  throw StructuralError("unknown arithmetic kind");
}

/// Floating-point evaluator for repeated numeric evaluation at fixed h.
class CompiledPoly {
 public:
  CompiledPoly() = default;
  explicit CompiledPoly(const Poly& p, double h = 0.0) {
    for (const auto& [m, c] : p.terms()) {
      Term t;
      t.coeff = c.get_d() * (m.hpow ? std::pow(h, m.hpow) : 1.0);
      for (std::size_t i = 0; i < m.exps.size(); ++i)
        if (m.exps[i]) t.factors.emplace_back(i, m.exps[i]);
      if (t.coeff != 0.0) terms_.push_back(std::move(t));
    }
  }
  double operator()(const double* x) const {
    double s = 0.0;
    for (const auto& t : terms_) {
      double v = t.coeff;
      for (auto [i, e] : t.factors) {
        double xi = x[i];
        double pw = xi;
        for (int k = 1; k < e; ++k) pw *= xi;
        v *= pw;
      }
      s += v;
    }
    return s;
  }
  double operator()(const std::vector<double>& x) const { return (*this)(x.data()); }

 private:
  struct Term {
    double coeff = 0.0;
    std::vector<std::pair<std::size_t, int>> factors;
  };
  std::vector<Term> terms_;
};

}  // namespace susyfact
