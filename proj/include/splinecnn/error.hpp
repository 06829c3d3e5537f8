#ifndef SPLINECNN_ERROR_HPP
#define SPLINECNN_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace splinecnn {

/// Input file does not conform to its format. Carries the 1-based line (or
/// record) number where parsing stopped; 0 when not applicable.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + (line ? ":" + std::to_string(line) : std::string()) + ": " +
                           what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Kernel configuration violates its constraints (degree, kernel size).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Positions do not admit a pseudo-coordinate normalization (missing, or all
/// offsets zero).
class GeometryError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace splinecnn

#endif  // SPLINECNN_ERROR_HPP
