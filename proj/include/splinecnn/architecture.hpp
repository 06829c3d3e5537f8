#ifndef SPLINECNN_ARCHITECTURE_HPP
#define SPLINECNN_ARCHITECTURE_HPP

#include <cctype>
#include <charconv>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace splinecnn {

// Layer chains use the usual SplineCNN notation, e.g.
//
//   SConv((5,5),1,32) -> ELU -> MaxP(4) -> SConv((5,5),32,64) -> ELU
//     -> MaxP(4) -> FC(512) -> ELU -> Dropout(0.5) -> FC(10)
//
// Grammar:
//   chain   := layer (arrow layer)*          arrow := "->" | "→"
//   layer   := "SConv" "(" kernel "," int "," int ")"
//            | "MaxP" "(" int ")" | "FC" "(" int ")" | "Lin" "(" int ")"
//            | "AvgP" | "ELU" | "Dropout" "(" real ")"
//   kernel  := int | "(" int ("," int)* ")"

struct SConvSpec {
  std::vector<std::size_t> kernel_size;
  std::size_t in = 0, out = 0;
  friend bool operator==(const SConvSpec&, const SConvSpec&) = default;
};
struct MaxPSpec {
  std::size_t cluster_size = 2;
  friend bool operator==(const MaxPSpec&, const MaxPSpec&) = default;
};
struct FCSpec {
  std::size_t out = 0;
  friend bool operator==(const FCSpec&, const FCSpec&) = default;
};
struct LinSpec {
  std::size_t out = 0;
  friend bool operator==(const LinSpec&, const LinSpec&) = default;
};
struct AvgPSpec {
  friend bool operator==(const AvgPSpec&, const AvgPSpec&) = default;
};
struct EluSpec {
  friend bool operator==(const EluSpec&, const EluSpec&) = default;
};
struct DropoutSpec {
  double p = 0.5;
  friend bool operator==(const DropoutSpec&, const DropoutSpec&) = default;
};

using LayerSpec = std::variant<SConvSpec, MaxPSpec, FCSpec, LinSpec, AvgPSpec, EluSpec, DropoutSpec>;
using Architecture = std::vector<LayerSpec>;

class ArchitectureError : public std::invalid_argument {
 public:
  ArchitectureError(std::size_t position, const std::string& what)
      : std::invalid_argument("architecture: at offset " + std::to_string(position) + ": " + what),
        position_(position) {}
  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

namespace detail {

class ArchitectureParser {
 public:
  explicit ArchitectureParser(std::string_view text) : text_(text) {}

  Architecture parse() {
    Architecture out;
    skip_ws();
    if (at_end()) throw ArchitectureError(pos_, "empty architecture");
    out.push_back(layer());
    skip_ws();
    while (!at_end()) {
      arrow();
      out.push_back(layer());
      skip_ws();
    }
    return out;
  }

 private:
  bool at_end() const { return pos_ >= text_.size(); }

  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool accept(std::string_view token) {
    skip_ws();
    if (text_.substr(pos_, token.size()) == token) {
      pos_ += token.size();
      return true;
    }
    return false;
  }

  void expect(std::string_view token) {
    if (!accept(token)) throw ArchitectureError(pos_, "expected '" + std::string(token) + "'");
  }

  void arrow() {
    if (accept("->") || accept("→")) return;
    throw ArchitectureError(pos_, "expected '->' between layers");
  }

  std::string identifier() {
    skip_ws();
    const std::size_t start = pos_;
    while (!at_end() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    if (start == pos_) throw ArchitectureError(pos_, "expected a layer name");
    return std::string(text_.substr(start, pos_ - start));
  }

  std::size_t integer() {
    skip_ws();
    std::size_t value = 0;
    auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), value);
    if (ec != std::errc()) throw ArchitectureError(pos_, "expected an integer");
    pos_ = static_cast<std::size_t>(ptr - text_.data());
    if (value == 0) throw ArchitectureError(pos_, "sizes must be positive");
    return value;
  }

  double real() {
    skip_ws();
    double value = 0;
    auto [ptr, ec] = std::from_chars(text_.data() + pos_, text_.data() + text_.size(), value);
    if (ec != std::errc()) throw ArchitectureError(pos_, "expected a number");
    pos_ = static_cast<std::size_t>(ptr - text_.data());
    return value;
  }

  std::vector<std::size_t> kernel() {
    std::vector<std::size_t> k;
    if (accept("(")) {
      k.push_back(integer());
      while (accept(",")) k.push_back(integer());
      expect(")");
    } else {
      k.push_back(integer());
    }
    return k;
  }

  LayerSpec layer() {
    skip_ws();
    const std::size_t start = pos_;
    const std::string name = identifier();
    if (name == "SConv") {
      expect("(");
      SConvSpec spec;
      spec.kernel_size = kernel();
      expect(",");
      spec.in = integer();
      expect(",");
      spec.out = integer();
      expect(")");
      return spec;
    }
    if (name == "MaxP") {
      expect("(");
      MaxPSpec spec{integer()};
      expect(")");
      return spec;
    }
    if (name == "FC" || name == "Lin") {
      expect("(");
      const std::size_t out = integer();
      expect(")");
      if (name == "FC") return FCSpec{out};
      return LinSpec{out};
    }
    if (name == "AvgP") return AvgPSpec{};
    if (name == "ELU") return EluSpec{};
    if (name == "Dropout") {
      expect("(");
      DropoutSpec spec{real()};
      expect(")");
      if (!(spec.p >= 0.0 && spec.p < 1.0)) throw ArchitectureError(start, "dropout probability must be in [0,1)");
      return spec;
    }
    throw ArchitectureError(start, "unknown layer '" + name + "'");
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

inline std::string format_real(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace detail

inline Architecture parse_architecture(std::string_view text) { return detail::ArchitectureParser(text).parse(); }

inline std::string to_string(const LayerSpec& layer) {
  struct Visitor {
    std::string operator()(const SConvSpec& s) const {
      std::string k;
      if (s.kernel_size.size() == 1) {
        k = "(" + std::to_string(s.kernel_size[0]) + ")";
      } else {
        k = "(";
        for (std::size_t i = 0; i < s.kernel_size.size(); ++i) k += (i ? "," : "") + std::to_string(s.kernel_size[i]);
        k += ")";
      }
      return "SConv(" + k + "," + std::to_string(s.in) + "," + std::to_string(s.out) + ")";
    }
    std::string operator()(const MaxPSpec& s) const { return "MaxP(" + std::to_string(s.cluster_size) + ")"; }
    std::string operator()(const FCSpec& s) const { return "FC(" + std::to_string(s.out) + ")"; }
    std::string operator()(const LinSpec& s) const { return "Lin(" + std::to_string(s.out) + ")"; }
    std::string operator()(const AvgPSpec&) const { return "AvgP"; }
    std::string operator()(const EluSpec&) const { return "ELU"; }
    std::string operator()(const DropoutSpec& s) const { return "Dropout(" + detail::format_real(s.p) + ")"; }
  };
  return std::visit(Visitor{}, layer);
}

inline std::string to_string(const Architecture& arch) {
  std::string out;
  for (std::size_t i = 0; i < arch.size(); ++i) out += (i ? " -> " : "") + to_string(arch[i]);
  return out;
}

}  // namespace splinecnn

#endif  // SPLINECNN_ARCHITECTURE_HPP
