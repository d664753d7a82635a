#pragma once

// Text format for polynomials and polynomial matrices.
//
//   polynomial := "0" | term (("+" | "-") term)*
//   term       := [number] ("*" factor)*        number defaults to 1
//               | factor ("*" factor)*
//   factor     := "x" index ["^" power]          index is 1-based
//
// Printing emits every coefficient explicitly with 17 significant digits, so
// parse(print(f)) reproduces f bit for bit. A matrix is a header line
// "polymatrix <rows> <cols>" followed by rows*cols polynomial lines in
// row-major order.

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "sosil/polynomial.hpp"

namespace sosil {

class ParseError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string to_string(const Polynomial& f) {
  if (f.is_zero()) return "0";
  std::string out;
  bool first = true;
  for (const auto& [e, c] : f.terms()) {
    if (first) {
      out += format_double(c);
    } else {
      out += c < 0 ? " - " : " + ";
      out += format_double(std::abs(c));
    }
    first = false;
    for (std::size_t i = 0; i < e.size(); ++i) {
      if (e[i] == 0) continue;
      out += " * x" + std::to_string(i + 1);
      if (e[i] > 1) out += "^" + std::to_string(e[i]);
    }
  }
  return out;
}

namespace detail {

class PolyParser {
public:
  PolyParser(const std::string& text, std::size_t nvars) : s_(text), n_(nvars) {}

  Polynomial parse() {
    Polynomial out(n_);
    skip_ws();
    double sign = 1.0;
    if (peek() == '-' || peek() == '+') {
      sign = get() == '-' ? -1.0 : 1.0;
    }
    parse_term(out, sign);
    for (;;) {
      skip_ws();
      if (at_end()) break;
      const char c = get();
      if (c != '+' && c != '-') fail("expected '+' or '-'");
      parse_term(out, c == '-' ? -1.0 : 1.0);
    }
    return out;
  }

private:
  void parse_term(Polynomial& out, double sign) {
    skip_ws();
    double coeff = 1.0;
    Exponent e(n_);
    bool need_factor = true;
    if (peek() != 'x') {
      const char* begin = s_.c_str() + pos_;
      char* end = nullptr;
      coeff = std::strtod(begin, &end);
      if (end == begin) fail("expected number or variable");
      pos_ += static_cast<std::size_t>(end - begin);
      need_factor = false;
    }
    for (;;) {
      skip_ws();
      if (need_factor) {
        parse_factor(e);
        need_factor = false;
        continue;
      }
      if (peek() != '*') break;
      get();
      need_factor = true;
    }
    out.add_term(e, sign * coeff);
  }

  void parse_factor(Exponent& e) {
    skip_ws();
    if (get() != 'x') fail("expected variable");
    const std::size_t idx = parse_uint();
    if (idx < 1 || idx > n_) fail("variable index out of range");
    unsigned power = 1;
    skip_ws();
    if (peek() == '^') {
      get();
      skip_ws();
      power = static_cast<unsigned>(parse_uint());
    }
    e[idx - 1] += power;
  }

  std::size_t parse_uint() {
    if (!std::isdigit(static_cast<unsigned char>(peek()))) fail("expected integer");
    std::size_t v = 0;
    while (std::isdigit(static_cast<unsigned char>(peek()))) v = v * 10 + static_cast<std::size_t>(get() - '0');
    return v;
  }

  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool at_end() const { return pos_ >= s_.size(); }
  char peek() const { return at_end() ? '\0' : s_[pos_]; }
  char get() { return at_end() ? '\0' : s_[pos_++]; }
  [[noreturn]] void fail(const std::string& what) const {
    throw ParseError("polynomial parse error at column " + std::to_string(pos_ + 1) + ": " + what + " in \"" + s_ +
                     "\"");
  }

  const std::string& s_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline Polynomial parse_polynomial(const std::string& text, std::size_t nvars) {
  return detail::PolyParser(text, nvars).parse();
}

inline void write_polymatrix(std::ostream& os, const PolyMatrix& m) {
  os << "polymatrix " << m.rows() << ' ' << m.cols() << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) os << to_string(m.entry(r, c)) << '\n';
}

inline PolyMatrix read_polymatrix(std::istream& is, std::size_t nvars) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("read_polymatrix: missing header");
  std::istringstream hdr(line);
  std::string tag;
  std::size_t rows = 0, cols = 0;
  if (!(hdr >> tag >> rows >> cols) || tag != "polymatrix") throw ParseError("read_polymatrix: bad header: " + line);
  std::vector<std::vector<Polynomial>> grid(rows);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) {
      if (!std::getline(is, line)) throw ParseError("read_polymatrix: truncated matrix");
      grid[r].push_back(parse_polynomial(line, nvars));
    }
  if (rows == 0) return PolyMatrix(0, cols, nvars);
  return PolyMatrix::from_entries(grid, nvars);
}

}  // namespace sosil
