#pragma once

#include <stdexcept>
#include <string>

namespace nss3dqa {

/// Broad failure class, used by the CLI to pick an exit code.
enum class ErrorKind {
  input,      // malformed files, bad arguments, violated preconditions
  numerical,  // solver did not converge
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  explicit Error(const std::string& what) : Error(ErrorKind::input, what) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

enum class ParseErrc {
  malformed_header,
  unsupported_format,
  missing_property,
  truncated_body,
  non_triangle_face,
  index_out_of_range,
  mixed_colors,
  invalid_value,
};

inline const char* to_string(ParseErrc c) {
  switch (c) {
    case ParseErrc::malformed_header: return "malformed header";
    case ParseErrc::unsupported_format: return "unsupported format";
    case ParseErrc::missing_property: return "missing property";
    case ParseErrc::truncated_body: return "truncated body";
    case ParseErrc::non_triangle_face: return "non-triangle face";
    case ParseErrc::index_out_of_range: return "index out of range";
    case ParseErrc::mixed_colors: return "mixed colored/uncolored vertices";
    case ParseErrc::invalid_value: return "invalid value";
  }
  return "parse error";
}

class ParseError : public Error {
 public:
  ParseError(ParseErrc code, const std::string& detail)
      : Error(std::string(to_string(code)) + ": " + detail), code_(code), detail_(detail) {}
  ParseErrc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ParseErrc code_;
  std::string detail_;
};

/// Too few points for a neighborhood query.
class InsufficientPointsError : public Error {
 public:
  using Error::Error;
};

/// An edge shared by more than two faces.
class NonManifoldEdgeError : public Error {
 public:
  NonManifoldEdgeError(unsigned a, unsigned b, std::size_t faces)
      : Error("non-manifold edge (" + std::to_string(a) + ", " + std::to_string(b) + ") shared by " +
              std::to_string(faces) + " faces"),
        a_(a), b_(b) {}
  unsigned first() const noexcept { return a_; }
  unsigned second() const noexcept { return b_; }

 private:
  unsigned a_, b_;
};

/// A distribution fit has no usable spread (e.g. all samples equal).
class DegenerateDistributionError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  explicit ConvergenceError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

}  // namespace nss3dqa
