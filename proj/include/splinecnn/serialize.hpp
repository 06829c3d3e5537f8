#ifndef SPLINECNN_SERIALIZE_HPP
#define SPLINECNN_SERIALIZE_HPP

#include <array>
#include <charconv>
#include <istream>
#include <limits>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>

namespace splinecnn {

/// Writes values one per line with enough digits to round-trip exactly.
template <class T>
void write_values(std::ostream& out, std::span<const T> values) {
  std::array<char, 40> buf{};
  std::string text;
  text.reserve(values.size() * 14);
  for (T v : values) {
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v, std::chars_format::general,
                                   std::numeric_limits<T>::max_digits10);
    text.append(buf.data(), ptr);
    text += '\n';
  }
  out << text;
}

template <class T>
void write_values(std::ostream& out, std::span<T> values) {
  write_values(out, std::span<const T>(values.data(), values.size()));
}

template <class T>
T read_value(std::istream& in) {
  std::string token;
  if (!(in >> token)) throw std::runtime_error("checkpoint: unexpected end of input");
  T value{};
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size())
    throw std::runtime_error("checkpoint: malformed number '" + token + "'");
  return value;
}

template <class T>
void read_values(std::istream& in, std::span<T> values) {
  for (T& v : values) v = read_value<T>(in);
}

inline void expect_token(std::istream& in, const std::string& expected) {
  std::string token;
  if (!(in >> token) || token != expected)
    throw std::runtime_error("checkpoint: expected '" + expected + "', got '" + token + "'");
}

}  // namespace splinecnn

#endif  // SPLINECNN_SERIALIZE_HPP
