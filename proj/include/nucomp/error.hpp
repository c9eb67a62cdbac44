#pragma once

#include <stdexcept>
#include <string>

namespace nucomp {

// Backend SVD/solver did not converge or produced non-finite values.
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

// Malformed input file; line is 1-based and refers to the offending line.
struct ParseError : std::runtime_error {
  ParseError(const std::string& what, long line_no)
      : std::runtime_error(what + " (line " + std::to_string(line_no) + ")"),
        line(line_no) {}
  long line;
};

}  // namespace nucomp
