#pragma once

// Polynomial mini-grammar.
//
//   expr   := term (('+' | '-') term)*
//   term   := unary (('*' | '/')? unary)*        juxtaposition multiplies: "2V", "3 x1 y1"
//   unary  := '-' unary | '+' unary | power
//   power  := atom ('^' integer)?
//   atom   := number | name | '(' expr ')'
//
// Numbers are integers or decimals ("0.25"); "1/4" is division. Names are variables of the
// space, 'h', or entries of a definition table. Division is allowed by constants only.
// Poly::to_string output parses back to the same polynomial.

#include "susyfact/poly.hpp"

#include <cctype>
#include <map>
#include <string>

namespace susyfact {

class ParseError : public StructuralError {
 public:
  ParseError(const std::string& msg, std::size_t column)
      : StructuralError("column " + std::to_string(column + 1) + ": " + msg), column_(column) {}
  std::size_t column() const { return column_; }

 private:
  std::size_t column_;
};

using PolyDefs = std::map<std::string, Poly>;

namespace detail {

class PolyParser {
 public:
  PolyParser(const std::string& text, SpacePtr space, const PolyDefs& defs)
      : s_(text), space_(std::move(space)), defs_(defs) {}

  Poly parse() {
    skip();
    if (pos_ == s_.size()) throw ParseError("empty polynomial", pos_);
    Poly p = expr();
    skip();
    if (pos_ != s_.size()) throw ParseError(std::string("unexpected '") + s_[pos_] + "'", pos_);
    return p;
  }

 private:
  const std::string& s_;
  SpacePtr space_;
  const PolyDefs& defs_;
  std::size_t pos_ = 0;

  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool peek(char c) {
    skip();
    return pos_ < s_.size() && s_[pos_] == c;
  }
  bool starts_atom() {
    skip();
    if (pos_ >= s_.size()) return false;
    char c = s_[pos_];
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '(' || c == '.';
  }

  Poly expr() {
    Poly acc = term();
    while (true) {
      if (peek('+')) {
        ++pos_;
        acc += term();
      } else if (peek('-')) {
        ++pos_;
        acc -= term();
      } else {
        return acc;
      }
    }
  }

  Poly term() {
    Poly acc = unary();
    while (true) {
      if (peek('*')) {
        ++pos_;
        acc *= unary();
      } else if (peek('/')) {
        std::size_t at = ++pos_;
        Poly d = unary();
        if (d.degree() > 0 || d.max_h_order() > 0 || d.is_zero())
          throw ParseError("division only by nonzero constants", at);
        acc *= Rational(1) / d.coeff(Monomial{std::vector<int>(space_->size(), 0), 0});
      } else if (starts_atom()) {
        acc *= unary();
      } else {
        return acc;
      }
    }
  }

  Poly unary() {
    if (peek('-')) {
      ++pos_;
      return -unary();
    }
    if (peek('+')) {
      ++pos_;
      return unary();
    }
    return power();
  }

  Poly power() {
    Poly base = atom();
    if (peek('^')) {
      ++pos_;
      skip();
      std::size_t start = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      if (start == pos_) throw ParseError("exponent must be a nonnegative integer", start);
      if (pos_ - start > 4) throw ParseError("exponent too large", start);
      return base.pow(static_cast<unsigned>(std::stoul(s_.substr(start, pos_ - start))));
    }
    return base;
  }

  Poly atom() {
    skip();
    if (pos_ >= s_.size()) throw ParseError("unexpected end of input", pos_);
    char c = s_[pos_];
    if (c == '(') {
      ++pos_;
      Poly p = expr();
      if (!peek(')')) throw ParseError("expected ')'", pos_);
      ++pos_;
      return p;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return Poly::constant(space_, number());
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t start = pos_;
      while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
      std::string name = s_.substr(start, pos_ - start);
      if (name == "h") return Poly::hbar(space_, 1);
      if (auto i = space_->find(name)) return Poly::variable(space_, *i);
      auto it = defs_.find(name);
      if (it != defs_.end()) {
        if (!same_space(it->second.space(), space_)) throw ParseError("definition '" + name + "' lives elsewhere", start);
        return it->second;
      }
      throw ParseError("unknown name '" + name + "'", start);
    }
    throw ParseError(std::string("unexpected '") + c + "'", pos_);
  }

  // Integer or decimal; p/q is ordinary division of constants.
  Rational number() {
    std::size_t start = pos_;
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    if (pos_ < s_.size() && s_[pos_] == '.') {
      ++pos_;
      std::size_t fs = pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) ++pos_;
      std::string ip = s_.substr(start, fs - 1 - start), fp = s_.substr(fs, pos_ - fs);
      if (ip.empty() && fp.empty()) throw ParseError("malformed number", start);
      return parse_rational((ip.empty() ? "0" : ip) + fp + "/1" + std::string(fp.size(), '0'));
    }
    return parse_rational(s_.substr(start, pos_ - start));
  }
};

}  // namespace detail

inline Poly parse_poly(const std::string& text, const SpacePtr& space, const PolyDefs& defs = {}) {
  return detail::PolyParser(text, space, defs).parse();
}

}  // namespace susyfact
