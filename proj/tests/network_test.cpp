#include <gtest/gtest.h>

#include <sstream>

#include "splinecnn/architecture.hpp"
#include "splinecnn/harness/gradcheck.hpp"
#include "splinecnn/network.hpp"

using namespace splinecnn;

namespace {

Batch grid_batch(std::size_t examples, std::size_t side, std::size_t channels) {
  Graph g = build_grid_graph(side, side, Neighborhood::full8, false);
  fit_and_apply(g, PseudoKind::cartesian2);
  g.set_features(Matrix<double>(side * side, channels));
  return batch_graphs(std::vector<Graph>(examples, g));
}

Matrix<double> ramp(std::size_t rows, std::size_t cols) {
  Matrix<double> x(rows, cols);
  for (std::size_t i = 0; i < x.flat().size(); ++i) x.flat()[i] = std::sin(0.37 * static_cast<double>(i));
  return x;
}

}  // namespace

TEST(Architecture, ParsesChain) {
  const auto arch = parse_architecture("SConv((5,5),1,32) -> ELU -> MaxP(4) -> FC(512) -> Dropout(0.5) -> Lin(7) -> AvgP");
  ASSERT_EQ(arch.size(), 7u);
  const auto& s = std::get<SConvSpec>(arch[0]);
  EXPECT_EQ(s.kernel_size, (std::vector<std::size_t>{5, 5}));
  EXPECT_EQ(s.in, 1u);
  EXPECT_EQ(s.out, 32u);
  EXPECT_TRUE(std::holds_alternative<EluSpec>(arch[1]));
  EXPECT_EQ(std::get<MaxPSpec>(arch[2]).cluster_size, 4u);
  EXPECT_EQ(std::get<FCSpec>(arch[3]).out, 512u);
  EXPECT_DOUBLE_EQ(std::get<DropoutSpec>(arch[4]).p, 0.5);
  EXPECT_EQ(std::get<LinSpec>(arch[5]).out, 7u);
  EXPECT_TRUE(std::holds_alternative<AvgPSpec>(arch[6]));
}

TEST(Architecture, RoundTripsThroughText) {
  for (const char* text : {"SConv((5,5),1,32) -> ELU -> MaxP(4) -> SConv((5,5),32,64) -> FC(10)",
                           "Dropout(0.5) -> SConv((2),1433,16) -> ELU -> Dropout(0.5) -> SConv((2),16,7)",
                           "SConv((3,3,3),1,8) -> AvgP -> Lin(4)"}) {
    const auto arch = parse_architecture(text);
    EXPECT_EQ(to_string(arch), text);
    EXPECT_EQ(parse_architecture(to_string(arch)), arch);
  }
}

TEST(Architecture, ToleratesWhitespace) {
  EXPECT_EQ(parse_architecture("  SConv( (2, 2) , 3 , 4 )->ELU  ->FC( 2 ) "),
            parse_architecture("SConv((2,2),3,4) -> ELU -> FC(2)"));
}

TEST(Architecture, RejectsMalformedText) {
  for (const char* text : {"", "Conv((2),1,2)", "SConv((2),1)", "SConv((2),1,2) ELU", "MaxP(0)", "FC(0)",
                           "Dropout(1)", "Dropout(-0.1)", "SConv((0),1,2)", "SConv((2),1,2) ->", "ELU -> ELU)"}) {
    EXPECT_THROW(parse_architecture(text), ArchitectureError) << text;
  }
}

TEST(Architecture, ErrorReportsOffset) {
  try {
    parse_architecture("ELU -> Bogus(3)");
    FAIL() << "expected ArchitectureError";
  } catch (const ArchitectureError& e) {
    EXPECT_EQ(e.position(), 7u);
    EXPECT_NE(std::string(e.what()).find("offset 7"), std::string::npos);
  }
}

TEST(Network, ChannelMismatchNamesLayer) {
  const Batch b = grid_batch(2, 4, 1);
  try {
    Network<double>(parse_architecture("SConv((3,3),1,8) -> ELU -> SConv((3,3),4,2)"), {}, b);
    FAIL() << "expected invalid_argument";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("layer 2"), std::string::npos) << e.what();
  }
}

TEST(Network, KernelDimensionMismatchThrows) {
  const Batch b = grid_batch(1, 4, 1);
  EXPECT_THROW(Network<double>(parse_architecture("SConv((3),1,2)"), {}, b), std::invalid_argument);
  EXPECT_THROW(Network<double>(parse_architecture("FC(3) -> SConv((3,3),3,2)"), {}, b), std::invalid_argument);
  EXPECT_THROW(Network<double>(parse_architecture("AvgP -> MaxP(2)"), {}, b), std::invalid_argument);
}

TEST(Network, FlattenNeedsEqualNodeCounts) {
  Graph a = build_grid_graph(3, 3, Neighborhood::full8, false);
  Graph c = build_grid_graph(2, 3, Neighborhood::full8, false);
  fit_and_apply(a, PseudoKind::cartesian2);
  fit_and_apply(c, PseudoKind::cartesian2);
  a.set_features(Matrix<double>(9, 1));
  c.set_features(Matrix<double>(6, 1));
  const Batch b = batch_graphs(std::vector<Graph>{a, c});
  EXPECT_THROW(Network<double>(parse_architecture("SConv((3,3),1,2) -> FC(3)"), {}, b), std::invalid_argument);
  Network<double> ok(parse_architecture("SConv((3,3),1,2) -> AvgP -> FC(3)"), {}, b);
  EXPECT_EQ(ok.output_dim(), 3u);
  EXPECT_FALSE(ok.output_is_node_level());
}

TEST(Network, OutputShapes) {
  const Batch b = grid_batch(3, 6, 2);
  auto level = std::make_shared<const GraphLevel<double>>(b);
  Network<double> node(parse_architecture("SConv((3,3),2,4) -> ELU -> Lin(5)"), {}, b);
  EXPECT_TRUE(node.output_is_node_level());
  const auto y = node.forward(level, ramp(b.graph.num_nodes(), 2), false);
  EXPECT_EQ(y.rows(), b.graph.num_nodes());
  EXPECT_EQ(y.cols(), 5u);

  Network<double> graph(parse_architecture("SConv((3,3),2,4) -> MaxP(2) -> SConv((3,3),4,4) -> FC(3)"), {}, b);
  const auto z = graph.forward(level, ramp(b.graph.num_nodes(), 2), false);
  EXPECT_EQ(z.rows(), 3u);
  EXPECT_EQ(z.cols(), 3u);
}

TEST(Network, ParameterNamesAndCount) {
  const Batch b = grid_batch(1, 4, 1);
  Network<double> net(parse_architecture("SConv((3,3),1,4) -> ELU -> Lin(2)"), {}, b);
  const auto params = net.parameters();
  ASSERT_EQ(params.size(), 4u);
  EXPECT_EQ(params[0].name, "layer0.weight");
  EXPECT_EQ(params[1].name, "layer0.root");
  EXPECT_EQ(params[2].name, "layer2.weight");
  EXPECT_EQ(params[3].name, "layer2.bias");
  EXPECT_EQ(net.parameter_count(), 9u * 1 * 4 + 1 * 4 + 4 * 2 + 2);

  NetworkOptions no_root;
  no_root.use_root = false;
  Network<double> bare(parse_architecture("SConv((3,3),1,4)"), no_root, b);
  EXPECT_EQ(bare.parameter_count(), 36u);
}

TEST(Network, ForwardIsDeterministicPerSeed) {
  const Batch b = grid_batch(2, 5, 1);
  auto level = std::make_shared<const GraphLevel<double>>(b);
  const auto arch = parse_architecture("SConv((3,3),1,4) -> ELU -> MaxP(2) -> SConv((3,3),4,3) -> AvgP");
  NetworkOptions o;
  o.seed = 11;
  Network<double> n1(arch, o, b), n2(arch, o, b);
  const auto x = ramp(b.graph.num_nodes(), 1);
  const auto y1 = n1.forward(level, x, false);
  const auto y2 = n2.forward(level, x, false);
  ASSERT_EQ(y1.flat().size(), y2.flat().size());
  for (std::size_t i = 0; i < y1.flat().size(); ++i) EXPECT_EQ(y1.flat()[i], y2.flat()[i]);

  o.seed = 12;
  Network<double> n3(arch, o, b);
  const auto y3 = n3.forward(level, x, false);
  bool differs = false;
  for (std::size_t i = 0; i < y1.flat().size(); ++i) differs |= y1.flat()[i] != y3.flat()[i];
  EXPECT_TRUE(differs);
}

TEST(Network, CheckpointRoundTrip) {
  const Batch b = grid_batch(2, 5, 1);
  auto level = std::make_shared<const GraphLevel<float>>(b);
  const auto arch = parse_architecture("SConv((3,3),1,4) -> ELU -> MaxP(2) -> SConv((3,3),4,3) -> FC(2)");
  NetworkOptions o;
  o.seed = 3;
  Network<float> src(arch, o, b);
  std::stringstream ckpt;
  src.save(ckpt);

  o.seed = 99;
  Network<float> dst(arch, o, b);
  dst.load_parameters(ckpt);
  Matrix<float> x(b.graph.num_nodes(), 1);
  for (std::size_t i = 0; i < x.flat().size(); ++i) x.flat()[i] = static_cast<float>(i % 7) / 7.0f;
  const auto ya = src.forward(level, x, false);
  const auto yb = dst.forward(level, x, false);
  for (std::size_t i = 0; i < ya.flat().size(); ++i) EXPECT_EQ(ya.flat()[i], yb.flat()[i]);

  std::stringstream again;
  dst.save(again);
  std::stringstream first;
  src.save(first);
  EXPECT_EQ(first.str(), again.str());
}

TEST(Network, CheckpointArchitectureMismatchThrows) {
  const Batch b = grid_batch(1, 4, 1);
  Network<float> src(parse_architecture("SConv((3,3),1,4) -> Lin(2)"), {}, b);
  std::stringstream ckpt;
  src.save(ckpt);
  Network<float> other(parse_architecture("SConv((3,3),1,5) -> Lin(2)"), {}, b);
  EXPECT_THROW(other.load_parameters(ckpt), std::runtime_error);

  std::stringstream garbage("NOT-A-CHECKPOINT 1\n");
  EXPECT_THROW(src.load_parameters(garbage), std::runtime_error);
}

TEST(Network, ReadCheckpointLayers) {
  const Batch b = grid_batch(1, 4, 1);
  Network<float> src(parse_architecture("SConv((3,3),1,4) -> ELU -> SConv((2,2),4,3) -> Lin(2)"), {}, b);
  std::stringstream ckpt;
  src.save(ckpt);
  const auto layers = read_checkpoint_layers<float>(ckpt);
  ASSERT_EQ(layers.convs.size(), 2u);
  ASSERT_EQ(layers.denses.size(), 1u);
  EXPECT_TRUE(layers.convs.count(0));
  EXPECT_TRUE(layers.convs.count(2));
  EXPECT_TRUE(layers.denses.count(3));
  const auto& c = layers.convs.at(2);
  EXPECT_EQ(c.in_features(), 4u);
  EXPECT_EQ(c.out_features(), 3u);
  for (std::size_t i = 0; i < c.weight().flat().size(); ++i)
    EXPECT_EQ(c.weight().flat()[i], src.conv_layer(2)->weight().flat()[i]);
}

TEST(Network, GradientsMatchFiniteDifferences) {
  const auto results = harness::grad_check_networks(5);
  ASSERT_FALSE(results.empty());
  for (const auto& r : results) EXPECT_TRUE(r.pass) << r.name << " rel err " << r.max_relative_error;
}

TEST(Network, BackwardRequiresTrainingForward) {
  const Batch b = grid_batch(1, 4, 1);
  auto level = std::make_shared<const GraphLevel<double>>(b);
  Network<double> net(parse_architecture("SConv((3,3),1,2)"), {}, b);
  const auto y = net.forward(level, ramp(16, 1), false);
  EXPECT_THROW(net.backward(y), std::logic_error);
}
