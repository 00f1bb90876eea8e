#ifndef ETPR_ERRORS_HPP
#define ETPR_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace etpr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Scale (covariance) matrix not positive definite even after jitter repair.
class SingularScale : public Error {
 public:
  explicit SingularScale(const std::string& what, int curve = -1)
      : Error(curve < 0 ? what : what + " (curve " + std::to_string(curve) + ")"),
        curve_(curve) {}
  int curve() const noexcept { return curve_; }

 private:
  int curve_;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class RankError : public Error {
 public:
  using Error::Error;
};

class NuOutOfDomain : public Error {
 public:
  using Error::Error;
};

class InvalidOptions : public Error {
 public:
  using Error::Error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file; carries a 1-based line and column when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line = 0, int column = 0)
      : Error(format(what, line, column)), line_(line), column_(column) {}
  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& what, int line, int column) {
    if (line <= 0) return what;
    std::string s = "line " + std::to_string(line);
    if (column > 0) s += ", column " + std::to_string(column);
    return s + ": " + what;
  }
  int line_;
  int column_;
};

}  // namespace etpr

#endif  // ETPR_ERRORS_HPP
