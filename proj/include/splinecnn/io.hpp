#ifndef SPLINECNN_IO_HPP
#define SPLINECNN_IO_HPP

#include <algorithm>
#include <array>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <vector>

#include "splinecnn/error.hpp"
#include "splinecnn/graph.hpp"

namespace splinecnn {

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    if (j > i) out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

template <class N>
bool parse_number(std::string_view token, N& out) {
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if constexpr (std::is_floating_point_v<N>) {
    if (first != last && *first == '+') ++first;
  }
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

/// Shortest round-trippable formatting is not what the container format
/// asks for; it pins 17 significant digits.
inline void append_double(std::string& out, double value) {
  std::array<char, 40> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value,
                                 std::chars_format::general, 17);
  out.append(buf.data(), ptr);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string(), 0, "cannot open file");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Iterates lines, skipping blanks and `#` comments. Keeps 1-based numbers.
class LineReader {
 public:
  LineReader(std::string source, std::string text) : source_(std::move(source)), text_(std::move(text)) {}

  bool next(std::vector<std::string_view>& tokens) {
    while (pos_ < text_.size()) {
      std::size_t end = text_.find('\n', pos_);
      if (end == std::string::npos) end = text_.size();
      std::string_view line(text_.data() + pos_, end - pos_);
      pos_ = end + 1;
      ++line_;
      tokens = split_ws(line);
      if (tokens.empty() || tokens.front().front() == '#') continue;
      return true;
    }
    return false;
  }

  std::size_t line() const noexcept { return line_; }
  [[noreturn]] void fail(const std::string& what) const { throw ParseError(source_, line_, what); }

  template <class N>
  N number(std::string_view token, const char* what) const {
    N value{};
    if (!parse_number(token, value)) fail(std::string("expected ") + what + ", got '" + std::string(token) + "'");
    return value;
  }

 private:
  std::string source_;
  std::string text_;
  std::size_t pos_ = 0;
  std::size_t line_ = 0;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Graph container format
//
//   GRAPHS <count>
//   GRAPH <N> <E> <d> <M_in> <dim_pos> <has_labels:0|1>
//   NODE <M_in floats> [label] <dim_pos floats>        (N lines)
//   EDGE <origin> <target> [<d floats pseudo>]          (E lines)
//
// d = 0 means pseudo-coordinates are not stored. When d > 0 every EDGE line
// carries d values in [0,1]. Floats use 17 significant digits; lines starting
// with '#' are comments.
// ---------------------------------------------------------------------------

inline void save_graph_container(std::ostream& out, std::span<const Graph> graphs) {
  std::string buf;
  buf += "GRAPHS " + std::to_string(graphs.size()) + "\n";
  for (const Graph& g : graphs) {
    buf += "GRAPH " + std::to_string(g.num_nodes()) + " " + std::to_string(g.num_edges()) + " " +
           std::to_string(g.pseudo_dim()) + " " + std::to_string(g.feature_dim()) + " " +
           std::to_string(g.position_dim()) + " " + (g.has_labels() ? "1" : "0") + "\n";
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
      buf += "NODE";
      for (double v : g.features().row(i)) {
        buf += ' ';
        detail::append_double(buf, v);
      }
      if (g.has_labels()) buf += " " + std::to_string((*g.labels())[i]);
      if (g.has_positions()) {
        for (double v : g.positions().row(i)) {
          buf += ' ';
          detail::append_double(buf, v);
        }
      }
      buf += '\n';
    }
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
      buf += "EDGE " + std::to_string(g.edge(e).origin) + " " + std::to_string(g.edge(e).target);
      if (g.pseudo_dim()) {
        for (double v : g.pseudo().row(e)) {
          buf += ' ';
          detail::append_double(buf, v);
        }
      }
      buf += '\n';
    }
    out << buf;
    buf.clear();
  }
}

inline void save_graph_container(const std::filesystem::path& path, std::span<const Graph> graphs) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  save_graph_container(out, graphs);
}

inline std::vector<Graph> parse_graph_container(std::string text, const std::string& source = "<memory>") {
  detail::LineReader reader(source, std::move(text));
  std::vector<std::string_view> tok;
  std::vector<Graph> graphs;
  if (!reader.next(tok)) return graphs;
  if (tok.size() != 2 || tok[0] != "GRAPHS") reader.fail("expected 'GRAPHS <count>'");
  const auto count = reader.number<std::size_t>(tok[1], "graph count");
  graphs.reserve(count);

  for (std::size_t g = 0; g < count; ++g) {
    if (!reader.next(tok)) reader.fail("missing GRAPH header for graph " + std::to_string(g));
    if (tok.size() != 7 || tok[0] != "GRAPH") reader.fail("expected 'GRAPH <N> <E> <d> <M_in> <dim_pos> <has_labels>'");
    const auto n = reader.number<std::size_t>(tok[1], "node count");
    const auto e = reader.number<std::size_t>(tok[2], "edge count");
    const auto d = reader.number<std::size_t>(tok[3], "pseudo dimension");
    const auto m = reader.number<std::size_t>(tok[4], "feature dimension");
    const auto p = reader.number<std::size_t>(tok[5], "position dimension");
    const auto has_labels = reader.number<int>(tok[6], "label flag");
    if (has_labels != 0 && has_labels != 1) reader.fail("label flag must be 0 or 1");

    Matrix<double> features(n, m), positions(n, p), pseudo(d ? e : 0, d);
    std::vector<int> labels;
    const std::size_t node_tokens = 1 + m + static_cast<std::size_t>(has_labels) + p;
    for (std::size_t i = 0; i < n; ++i) {
      if (!reader.next(tok)) reader.fail("unexpected end of file in NODE block");
      if (tok[0] != "NODE" || tok.size() != node_tokens)
        reader.fail("expected NODE line with " + std::to_string(node_tokens - 1) + " values");
      std::size_t t = 1;
      for (std::size_t c = 0; c < m; ++c) features(i, c) = reader.number<double>(tok[t++], "feature");
      if (has_labels) labels.push_back(reader.number<int>(tok[t++], "label"));
      for (std::size_t c = 0; c < p; ++c) positions(i, c) = reader.number<double>(tok[t++], "position");
    }
    std::vector<Edge> edges;
    edges.reserve(e);
    std::set<Edge> seen;
    for (std::size_t k = 0; k < e; ++k) {
      if (!reader.next(tok)) reader.fail("unexpected end of file in EDGE block");
      if (tok[0] != "EDGE" || tok.size() != 3 + d)
        reader.fail("expected EDGE line with 2 indices and " + std::to_string(d) + " pseudo values");
      Edge edge{reader.number<std::size_t>(tok[1], "origin index"),
                reader.number<std::size_t>(tok[2], "target index")};
      if (edge.origin >= n || edge.target >= n)
        reader.fail("edge (" + std::to_string(edge.origin) + "," + std::to_string(edge.target) +
                    ") references a node outside [0," + std::to_string(n) + ")");
      if (!seen.insert(edge).second) reader.fail("duplicate edge");
      for (std::size_t c = 0; c < d; ++c) {
        const double u = reader.number<double>(tok[3 + c], "pseudo-coordinate");
        if (!(u >= 0.0 && u <= 1.0)) reader.fail("pseudo-coordinate outside [0,1]");
        pseudo(k, c) = u;
      }
      edges.push_back(edge);
    }
    Graph graph(n, std::move(edges), std::move(pseudo));
    graph.set_features(std::move(features));
    if (p) graph.set_positions(std::move(positions));
    if (has_labels) graph.set_labels(std::move(labels));
    graphs.push_back(std::move(graph));
  }
  if (reader.next(tok)) reader.fail("trailing content after " + std::to_string(count) + " graphs");
  return graphs;
}

inline std::vector<Graph> load_graph_container(const std::filesystem::path& path) {
  return parse_graph_container(detail::read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// OFF meshes
// ---------------------------------------------------------------------------

/// Triangle mesh as an embedded 3D graph: one node per vertex, both
/// directions of every face edge, positions = vertex coordinates.
inline Graph parse_off_mesh(std::string text, const std::string& source = "<memory>") {
  detail::LineReader reader(source, std::move(text));
  std::vector<std::string_view> tok;
  if (!reader.next(tok) || tok[0] != "OFF") reader.fail("missing 'OFF' header");
  tok.erase(tok.begin());
  if (tok.empty() && !reader.next(tok)) reader.fail("missing vertex/face counts");
  if (tok.size() < 2) reader.fail("expected '<vertices> <faces> [<edges>]'");
  const auto nv = reader.number<std::size_t>(tok[0], "vertex count");
  const auto nf = reader.number<std::size_t>(tok[1], "face count");

  Matrix<double> positions(nv, 3);
  for (std::size_t v = 0; v < nv; ++v) {
    if (!reader.next(tok)) reader.fail("unexpected end of file in vertex block");
    if (tok.size() < 3) reader.fail("vertex line needs 3 coordinates");
    for (std::size_t c = 0; c < 3; ++c) positions(v, c) = reader.number<double>(tok[c], "coordinate");
  }
  std::set<Edge> edges;
  for (std::size_t f = 0; f < nf; ++f) {
    if (!reader.next(tok)) reader.fail("unexpected end of file in face block");
    const auto arity = reader.number<std::size_t>(tok[0], "face arity");
    if (arity != 3) reader.fail("non-triangular face with " + std::to_string(arity) + " vertices");
    if (tok.size() < 4) reader.fail("face line needs 3 vertex indices");
    std::array<std::size_t, 3> idx{};
    for (std::size_t c = 0; c < 3; ++c) {
      idx[c] = reader.number<std::size_t>(tok[1 + c], "vertex index");
      if (idx[c] >= nv) reader.fail("face references vertex " + std::to_string(idx[c]));
    }
    for (std::size_t c = 0; c < 3; ++c) {
      const std::size_t a = idx[c], b = idx[(c + 1) % 3];
      if (a == b) reader.fail("degenerate face edge");
      edges.insert({a, b});
      edges.insert({b, a});
    }
  }
  Graph graph(nv, std::vector<Edge>(edges.begin(), edges.end()));
  graph.set_positions(std::move(positions));
  return graph;
}

inline Graph load_off_mesh(const std::filesystem::path& path) {
  return parse_off_mesh(detail::read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Cora citation graph
// ---------------------------------------------------------------------------

enum class SplitRole : std::uint8_t { unused, train, test };

struct CoraDataset {
  Graph graph;                          // features, labels, symmetric edges
  std::vector<std::string> class_names; // label index -> name, sorted
  std::vector<std::string> paper_ids;   // node index -> paper id
  std::size_t skipped_citations = 0;    // cites lines naming unknown ids
  std::size_t self_citations = 0;       // cites lines with citing == cited
};

/// Reads `<id> <binary features...> <label>` lines and `<cited> <citing>`
/// pairs. Every undirected citation becomes two directed edges.
inline CoraDataset parse_cora(const std::string& content, const std::string& cites,
                              const std::string& content_source = "cora.content",
                              const std::string& cites_source = "cora.cites") {
  CoraDataset data;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> raw_labels;
  std::unordered_map<std::string, std::size_t> id_to_node;
  {
    detail::LineReader reader(content_source, content);
    std::vector<std::string_view> tok;
    std::size_t width = 0;
    while (reader.next(tok)) {
      if (tok.size() < 3) reader.fail("content line needs id, features and label");
      if (width == 0) width = tok.size() - 2;
      if (tok.size() - 2 != width)
        reader.fail("expected " + std::to_string(width) + " features, got " + std::to_string(tok.size() - 2));
      std::vector<double> row(width);
      for (std::size_t c = 0; c < width; ++c) row[c] = reader.number<double>(tok[1 + c], "feature");
      std::string id(tok[0]);
      if (!id_to_node.emplace(id, rows.size()).second) reader.fail("duplicate paper id " + id);
      data.paper_ids.push_back(std::move(id));
      raw_labels.emplace_back(tok.back());
      rows.push_back(std::move(row));
    }
  }
  std::set<std::string> names(raw_labels.begin(), raw_labels.end());
  data.class_names.assign(names.begin(), names.end());
  std::vector<int> labels;
  for (const auto& l : raw_labels)
    labels.push_back(static_cast<int>(std::lower_bound(data.class_names.begin(), data.class_names.end(), l) -
                                      data.class_names.begin()));

  std::set<Edge> edges;
  {
    detail::LineReader reader(cites_source, cites);
    std::vector<std::string_view> tok;
    while (reader.next(tok)) {
      if (tok.size() != 2) reader.fail("cites line needs two paper ids");
      auto a = id_to_node.find(std::string(tok[0]));
      auto b = id_to_node.find(std::string(tok[1]));
      if (a == id_to_node.end() || b == id_to_node.end()) {
        ++data.skipped_citations;
        continue;
      }
      if (a->second == b->second) {
        ++data.self_citations;
        continue;
      }
      edges.insert({a->second, b->second});
      edges.insert({b->second, a->second});
    }
  }
  const std::size_t n = rows.size();
  const std::size_t width = n ? rows.front().size() : 0;
  Matrix<double> features(n, width);
  for (std::size_t i = 0; i < n; ++i) std::copy(rows[i].begin(), rows[i].end(), features.row(i).begin());
  data.graph = Graph(n, std::vector<Edge>(edges.begin(), edges.end()));
  data.graph.set_features(std::move(features));
  data.graph.set_labels(std::move(labels));
  return data;
}

inline CoraDataset load_cora(const std::filesystem::path& content_path,
                             const std::filesystem::path& cites_path) {
  return parse_cora(detail::read_file(content_path), detail::read_file(cites_path),
                    content_path.string(), cites_path.string());
}

/// Seeded uniform split: a random permutation of the nodes, the first
/// `train_count` train, the next `test_count` test, the rest unused.
inline std::vector<SplitRole> random_split(std::size_t num_nodes, std::size_t train_count,
                                           std::size_t test_count, std::uint64_t seed) {
  if (train_count + test_count > num_nodes)
    throw std::invalid_argument("random_split: train + test exceeds node count");
  std::vector<std::size_t> order(num_nodes);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Fisher-Yates with explicit draws; std::shuffle's output is unspecified.
  for (std::size_t i = num_nodes; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  std::vector<SplitRole> roles(num_nodes, SplitRole::unused);
  for (std::size_t k = 0; k < train_count; ++k) roles[order[k]] = SplitRole::train;
  for (std::size_t k = train_count; k < train_count + test_count; ++k) roles[order[k]] = SplitRole::test;
  return roles;
}

// ---------------------------------------------------------------------------
// IDX (MNIST) files
// ---------------------------------------------------------------------------

struct IdxImages {
  std::size_t count = 0, rows = 0, cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major per image

  std::span<const std::uint8_t> image(std::size_t k) const {
    return {pixels.data() + k * rows * cols, rows * cols};
  }
};

namespace detail {
inline std::uint32_t read_be32(const std::string& bytes, std::size_t at) {
  return (std::uint32_t(std::uint8_t(bytes[at])) << 24) | (std::uint32_t(std::uint8_t(bytes[at + 1])) << 16) |
         (std::uint32_t(std::uint8_t(bytes[at + 2])) << 8) | std::uint32_t(std::uint8_t(bytes[at + 3]));
}
}  // namespace detail

inline IdxImages load_idx_images(const std::filesystem::path& path, std::size_t limit = SIZE_MAX) {
  const std::string bytes = detail::read_file(path);
  if (bytes.size() < 16 || detail::read_be32(bytes, 0) != 0x00000803)
    throw ParseError(path.string(), 0, "not an IDX3 unsigned-byte image file");
  IdxImages out;
  out.count = detail::read_be32(bytes, 4);
  out.rows = detail::read_be32(bytes, 8);
  out.cols = detail::read_be32(bytes, 12);
  const std::size_t per = out.rows * out.cols;
  if (bytes.size() != 16 + out.count * per) throw ParseError(path.string(), 0, "IDX3 payload size mismatch");
  out.count = std::min(out.count, limit);
  out.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(out.count * per));
  return out;
}

inline std::vector<int> load_idx_labels(const std::filesystem::path& path, std::size_t limit = SIZE_MAX) {
  const std::string bytes = detail::read_file(path);
  if (bytes.size() < 8 || detail::read_be32(bytes, 0) != 0x00000801)
    throw ParseError(path.string(), 0, "not an IDX1 unsigned-byte label file");
  const std::size_t count = detail::read_be32(bytes, 4);
  if (bytes.size() != 8 + count) throw ParseError(path.string(), 0, "IDX1 payload size mismatch");
  std::vector<int> labels;
  for (std::size_t k = 0; k < std::min(count, limit); ++k) labels.push_back(std::uint8_t(bytes[8 + k]));
  return labels;
}

}  // namespace splinecnn

#endif  // SPLINECNN_IO_HPP
