#pragma once

// Sparse exact Gaussian elimination for consistent underdetermined systems.

#include "susyfact/poly.hpp"

#include <map>
#include <optional>
#include <vector>

namespace susyfact {

class SparseRationalSystem {
 public:
  using Row = std::map<std::size_t, Rational>;

  explicit SparseRationalSystem(std::size_t unknowns) : unknowns_(unknowns) {}

  std::size_t unknowns() const { return unknowns_; }

  /// Adds sum_c row[c] x_c = rhs. Returns false once the system is inconsistent.
  bool add_equation(Row row, Rational rhs) {
    if (inconsistent_) return false;
    for (const auto& [col, step] : pivots_) {
      auto it = row.find(col);
      if (it == row.end()) continue;
      const Rational f = it->second / rows_[step].second.at(col);
      for (const auto& [c, v] : rows_[step].second) {
        auto [jt, inserted] = row.try_emplace(c, 0);
        jt->second -= f * v;
        if (jt->second == 0) row.erase(jt);
      }
      rhs -= f * rows_[step].first;
    }
    for (auto it = row.begin(); it != row.end();) {
      if (it->second == 0) it = row.erase(it);
      else ++it;
    }
    if (row.empty()) {
      if (rhs != 0) inconsistent_ = true;
      return !inconsistent_;
    }
    const std::size_t col = row.begin()->first;
    pivots_.emplace(col, rows_.size());
    rows_.emplace_back(rhs, std::move(row));
    order_.push_back(col);
    return true;
  }

  bool inconsistent() const { return inconsistent_; }

  /// One solution with all free unknowns set to zero.
  std::optional<std::vector<Rational>> solve() const {
    if (inconsistent_) return std::nullopt;
    std::vector<Rational> x(unknowns_, Rational(0));
    for (std::size_t k = rows_.size(); k-- > 0;) {
      const auto col = order_[k];
      const auto& [rhs, row] = rows_[k];
      Rational s = rhs;
      for (const auto& [c, v] : row)
        if (c != col) s -= v * x[c];
      x[col] = s / row.at(col);
    }
    return x;
  }

 private:
  std::size_t unknowns_;
  bool inconsistent_ = false;
  std::vector<std::pair<Rational, Row>> rows_;
  std::vector<std::size_t> order_;
  std::map<std::size_t, std::size_t> pivots_;
};

}  // namespace susyfact
