#pragma once

// Decision blocks, weighted entry references and linear equalities shared by
// the Gram compiler and the conic solver, plus the plain-text standard-form
// dump both of them write.
//
// Dump grammar (one record per line, numbers printed with %.17g):
//
//   sosil-standard-form 1
//   block <index> <name> <free|sym|psd|nsd> <rows> <cols>
//   eq <weight> <name>[<row>,<col>] ... = <rhs>
//   obj <target> : <weight> <name>[<row>,<col>] ...    (ConeProblem only)
//   lin <weight> <name>[<row>,<col>]                     (ConeProblem only)
//
// An `eq` line states Σ weight·entry = rhs with every right-hand side
// reference moved to the left (its weight negated) and the constant moved to
// the right. Terms appear in the order stored.

#include <algorithm>
#include <cstddef>
#include <map>
#include <ostream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "sosil/poly_io.hpp"

namespace sosil {

enum class BlockKind {
  Free,       // rows x cols, every entry is a variable
  Symmetric,  // dim x dim symmetric, upper triangle is the variable set
  PSD,        // symmetric, constrained ⪰ 0
  NSD,        // symmetric, constrained ⪯ 0
};

inline const char* kind_name(BlockKind k) {
  switch (k) {
    case BlockKind::Free: return "free";
    case BlockKind::Symmetric: return "sym";
    case BlockKind::PSD: return "psd";
    case BlockKind::NSD: return "nsd";
  }
  return "?";
}

inline bool is_symmetric_kind(BlockKind k) { return k != BlockKind::Free; }

struct Block {
  std::string name;
  BlockKind kind = BlockKind::Free;
  std::size_t rows = 0, cols = 0;

  std::size_t variable_count() const {
    return is_symmetric_kind(kind) ? rows * (rows + 1) / 2 : rows * cols;
  }
};

/// weight · block[row, col]. Symmetric blocks are referenced on the upper
/// triangle only (row <= col).
struct Term {
  std::size_t block = 0, row = 0, col = 0;
  double weight = 0.0;

  auto key() const { return std::tie(block, row, col); }
};

/// Σ lhs + constant = Σ rhs.
struct LinearEquality {
  std::vector<Term> lhs, rhs;
  double constant = 0.0;
};

/// One matrix per block (symmetric blocks stored in full).
using BlockValues = std::vector<Eigen::MatrixXd>;

inline BlockValues zero_values(const std::vector<Block>& blocks) {
  BlockValues v;
  for (const auto& b : blocks)
    v.push_back(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(b.rows), static_cast<Eigen::Index>(b.cols)));
  return v;
}

inline double term_value(const Term& t, const BlockValues& v) {
  return t.weight * v.at(t.block)(static_cast<Eigen::Index>(t.row), static_cast<Eigen::Index>(t.col));
}

/// Σ lhs + constant − Σ rhs.
inline double residual(const LinearEquality& eq, const BlockValues& v) {
  double r = eq.constant;
  for (const auto& t : eq.lhs) r += term_value(t, v);
  for (const auto& t : eq.rhs) r -= term_value(t, v);
  return r;
}

inline double max_abs_residual(const std::vector<LinearEquality>& eqs, const BlockValues& v) {
  double m = 0.0;
  for (const auto& e : eqs) m = std::max(m, std::abs(residual(e, v)));
  return m;
}

/// Merge repeated references and drop zero weights, keeping first-seen order.
inline std::vector<Term> merge_terms(const std::vector<Term>& terms) {
  std::vector<Term> out;
  std::map<std::tuple<std::size_t, std::size_t, std::size_t>, std::size_t> pos;
  for (const auto& t : terms) {
    auto [it, inserted] = pos.try_emplace(std::make_tuple(t.block, t.row, t.col), out.size());
    if (inserted)
      out.push_back(t);
    else
      out[it->second].weight += t.weight;
  }
  std::erase_if(out, [](const Term& t) { return t.weight == 0.0; });
  return out;
}

inline void write_term(std::ostream& os, const std::vector<Block>& blocks, const Term& t, double sign) {
  os << ' ' << format_double(sign * t.weight) << ' ' << blocks.at(t.block).name << '[' << t.row << ',' << t.col
     << ']';
}

inline void write_blocks(std::ostream& os, const std::vector<Block>& blocks) {
  os << "sosil-standard-form 1\n";
  for (std::size_t i = 0; i < blocks.size(); ++i)
    os << "block " << i << ' ' << blocks[i].name << ' ' << kind_name(blocks[i].kind) << ' ' << blocks[i].rows << ' '
       << blocks[i].cols << '\n';
}

inline void write_equality(std::ostream& os, const std::vector<Block>& blocks, const LinearEquality& eq) {
  os << "eq";
  for (const auto& t : eq.lhs) write_term(os, blocks, t, 1.0);
  for (const auto& t : eq.rhs) write_term(os, blocks, t, -1.0);
  os << " = " << format_double(-eq.constant + 0.0) << '\n';
}

}  // namespace sosil
