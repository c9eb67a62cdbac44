#pragma once

#include <Eigen/Core>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>

#include "nucomp/error.hpp"

namespace nucomp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

inline bool is_finite(const Matrix& a) { return a.allFinite(); }

inline void require_finite(const Matrix& a, const char* what) {
  if (!a.allFinite()) throw NumericalError(std::string(what) + ": non-finite entries");
}

inline void require_same_shape(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("matrix shape mismatch: " + std::to_string(a.rows()) + "x" +
                                std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                                "x" + std::to_string(b.cols()));
}

// <A,B> = tr(A^T B), the entrywise scalar product.
inline double trace_inner(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b);
  return a.cwiseProduct(b).sum();
}

// Shortest decimal string that round-trips a double (17 significant digits).
inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

// Matrix text format: line 1 is "m1 m2", then m1 lines of m2 space-separated
// entries, 17 significant digits, LF endings, no trailing whitespace.
inline void write_matrix(std::ostream& os, const Matrix& a) {
  os << a.rows() << ' ' << a.cols() << '\n';
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (j) os << ' ';
      os << format_double(a(i, j));
    }
    os << '\n';
  }
}

inline void write_matrix_file(const std::string& path, const Matrix& a) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  write_matrix(os, a);
}

// Reads one matrix block; `line_no` tracks the absolute line counter so that
// parse errors in composite files point at the right line.
inline Matrix read_matrix(std::istream& is, long& line_no) {
  std::string line;
  if (!std::getline(is, line)) throw ParseError("expected matrix header \"m1 m2\"", line_no + 1);
  ++line_no;
  std::istringstream hdr(line);
  long m1 = 0, m2 = 0;
  if (!(hdr >> m1 >> m2) || m1 < 1 || m2 < 1)
    throw ParseError("bad matrix header \"" + line + "\"", line_no);
  std::string trailing;
  if (hdr >> trailing) throw ParseError("trailing tokens in matrix header", line_no);
  Matrix a(m1, m2);
  for (long i = 0; i < m1; ++i) {
    if (!std::getline(is, line)) throw ParseError("unexpected end of matrix body", line_no + 1);
    ++line_no;
    std::istringstream row(line);
    for (long j = 0; j < m2; ++j) {
      double v;
      if (!(row >> v)) throw ParseError("expected " + std::to_string(m2) + " entries", line_no);
      a(i, j) = v;
    }
    if (row >> trailing) throw ParseError("trailing tokens in matrix row", line_no);
  }
  if (!a.allFinite()) throw ParseError("non-finite matrix entry", line_no);
  return a;
}

inline Matrix read_matrix_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open for reading: " + path);
  long line_no = 0;
  return read_matrix(is, line_no);
}

}  // namespace nucomp
