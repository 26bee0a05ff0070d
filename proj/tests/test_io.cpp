#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "idealflow/io.hpp"
#include "idealflow/markov.hpp"

using namespace idealflow;

namespace {

std::string read(const std::string& name) {
  std::ifstream in(std::string(IDEALFLOW_TEST_DATA) + "/" + name);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

Error error_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "no error thrown";
  return Error(ErrorCode::InvalidArgument, "");
}

const char* kSmallNet =
    "<NUMBER OF ZONES> 1\n"
    "<NUMBER OF NODES> 3\n"
    "<FIRST THRU NODE> 1\n"
    "<NUMBER OF LINKS> 3\n"
    "<END OF METADATA>\n"
    "\n"
    "~ init term cap len fft b power speed toll type ;\n"
    "\t1\t2\t100\t1\t1\t0.15\t4\t0\t0\t1\t;\n"
    "\t2\t3\t50.5\t2\t2\t0.15\t4\t0\t0\t1\t;  ~ trailing comment\n"
    "\t3\t1\t75\t3\t3\t0.15\t4\t0\t0\t1\t;\n";

}  // namespace

TEST(TntpNet, SmallFile) {
  const auto parsed = parse_tntp_net(kSmallNet);
  EXPECT_EQ(parsed.network.node_count(), 3u);
  EXPECT_EQ(parsed.network.arc_count(), 3u);
  EXPECT_EQ(parsed.file.numZones, 1);
  ASSERT_EQ(parsed.file.links.size(), 3u);
  EXPECT_DOUBLE_EQ(parsed.file.links[1].capacity, 50.5);
  EXPECT_EQ(parsed.file.links[1].linkType, 1);
  EXPECT_DOUBLE_EQ(parsed.network.arcs()[1].capacity, 50.5);
  EXPECT_EQ(parsed.file.metadata.size(), 4u);
}

TEST(TntpNet, RoundTrip) {
  const auto parsed = parse_tntp_net(kSmallNet);
  const auto again = parse_tntp_net(format_tntp_net(parsed.file));
  EXPECT_EQ(again.network, parsed.network);
  EXPECT_EQ(again.file.links, parsed.file.links);
  EXPECT_EQ(format_tntp_net(again.file), format_tntp_net(parsed.file));
}

TEST(TntpNet, Errors) {
  std::string text = kSmallNet;
  EXPECT_EQ(error_of([&] { parse_tntp_net(text.substr(0, text.find("<END"))); }).code(), ErrorCode::ParseError);

  std::string bad = text;
  bad.replace(bad.find("50.5"), 4, "abc");
  const auto e = error_of([&] { parse_tntp_net(bad); });
  EXPECT_EQ(e.code(), ErrorCode::ParseError);
  EXPECT_EQ(e.detail(), "9");

  std::string range = text;
  range.replace(range.find("\t3\t1\t"), 5, "\t9\t1\t");
  EXPECT_EQ(error_of([&] { parse_tntp_net(range); }).code(), ErrorCode::ParseError);

  std::string count = text;
  count.replace(count.find("LINKS> 3"), 8, "LINKS> 4");
  EXPECT_EQ(error_of([&] { parse_tntp_net(count); }).code(), ErrorCode::MetadataMismatch);

  std::string dup = text + "\t1\t2\t100\t1\t1\t0.15\t4\t0\t0\t1\t;\n";
  EXPECT_EQ(error_of([&] { parse_tntp_net(dup); }).code(), ErrorCode::ParseError);

  std::string zero = text;
  zero.replace(zero.find("\t75\t"), 4, "\t0\t");
  EXPECT_EQ(error_of([&] { parse_tntp_net(zero); }).code(), ErrorCode::ParseError);
}

TEST(TntpNet, SiouxFalls) {
  const auto parsed = parse_tntp_net(read("SiouxFalls_net.tntp"));
  EXPECT_EQ(parsed.network.node_count(), 24u);
  EXPECT_EQ(parsed.network.arc_count(), 76u);
  EXPECT_EQ(parsed.file.numZones, 24);
  EXPECT_TRUE(is_strongly_connected(parsed.network));
}

TEST(TntpFlow, SiouxFalls) {
  const auto net = parse_tntp_net(read("SiouxFalls_net.tntp")).network;
  const auto flows = parse_tntp_flow(read("SiouxFalls_flow.tntp"));
  ASSERT_EQ(flows.records.size(), 76u);
  EXPECT_EQ(flows.records[0].fromNode, 1);
  EXPECT_EQ(flows.records[0].toNode, 2);
  const auto observed = observed_flows(flows, net, true);
  EXPECT_EQ(observed.droppedRecords, 0u);
  EXPECT_EQ(observed.volumes.nonZeros(), 76);
  EXPECT_NEAR(observed.volumes.coeff(0, 1), flows.records[0].volume, 0.0);
}

TEST(TntpFlow, Errors) {
  const std::string header = "From To Volume Cost\n";
  EXPECT_EQ(error_of([&] { parse_tntp_flow(header + "1 2 -3 1\n"); }).code(), ErrorCode::ParseError);
  EXPECT_EQ(error_of([&] { parse_tntp_flow(header + "1 2 3 1\n1 2 4 1\n"); }).code(), ErrorCode::ParseError);
  EXPECT_EQ(error_of([&] { parse_tntp_flow(header + "1 2\n"); }).code(), ErrorCode::ParseError);
  const auto net = parse_tntp_net(kSmallNet).network;
  const auto stray = parse_tntp_flow(header + "1 2 3\n2 1 4\n");
  EXPECT_EQ(observed_flows(stray, net).droppedRecords, 1u);
  EXPECT_EQ(error_of([&] { observed_flows(stray, net, true); }).code(), ErrorCode::UnknownArc);
}

TEST(Document, RoundTrip) {
  const std::string text = R"({
    "schemaVersion": 1,
    "nodes": [{"id": 10, "label": "a", "x": 1.5, "y": -2}, {"id": 20}, {"id": 30}],
    "arcs": [{"tail": 10, "head": 20}, {"tail": 20, "head": 30, "capacity": 2.5}, {"tail": 30, "head": 10}],
    "observedFlows": [{"tail": 10, "head": 20, "volume": 7}]
  })";
  const auto doc = load_document(text);
  ASSERT_EQ(doc.nodes.size(), 3u);
  EXPECT_EQ(doc.nodes[0].label, "a");
  EXPECT_EQ(*doc.nodes[0].x, 1.5);
  EXPECT_FALSE(doc.nodes[1].x);
  EXPECT_EQ(*doc.index_of(30), 2u);
  EXPECT_FALSE(doc.index_of(40));
  const auto net = to_network(doc);
  EXPECT_EQ(net.label(0), "a");
  EXPECT_EQ(net.label(1), "20");
  EXPECT_DOUBLE_EQ(net.arcs()[1].capacity, 2.5);
  EXPECT_EQ(document_observed_flows(doc).coeff(0, 1), 7.0);

  const std::string saved = save_document(doc);
  EXPECT_EQ(save_document(load_document(saved)), saved);
}

TEST(Document, SchemaErrorsNamePath) {
  auto path_of = [](const std::string& text) { return error_of([&] { load_document(text); }).detail(); };
  EXPECT_EQ(error_of([] { load_document("{not json"); }).code(), ErrorCode::SchemaError);
  EXPECT_EQ(path_of(R"({"nodes": [], "arcs": []})"), "schemaVersion");
  EXPECT_EQ(path_of(R"({"schemaVersion": 2, "nodes": [], "arcs": []})"), "schemaVersion");
  EXPECT_EQ(path_of(R"({"schemaVersion": 1, "nodes": [{"id": 1}], "arcs": [{"tail": 1, "head": 2}]})"),
            "arcs[0].head");
  EXPECT_EQ(path_of(R"({"schemaVersion": 1, "nodes": [{"id": 1}, {"id": 1}], "arcs": []})"), "nodes[1].id");
  EXPECT_EQ(path_of(R"({"schemaVersion": 1, "nodes": [{"id": 1}, {"id": 2}],
                        "arcs": [{"tail": 1, "head": 2, "capacity": 0}]})"),
            "arcs[0].capacity");
}

TEST(Document, FromNetwork) {
  DirectedNetwork net(2, {{0, 1, 3.0}, {1, 0}});
  const auto doc = document_from_network(net);
  EXPECT_EQ(doc.nodes[1].id, 2);
  EXPECT_EQ(to_network(doc).arcs()[0].capacity, 3.0);
}

TEST(Csv, ExportImport) {
  Eigen::MatrixXd m(2, 2);
  m << 0, 1.0 / 3.0, 123456789.123, 0;
  const auto csv = export_matrix_csv(m, {"a", "b,c"});
  EXPECT_EQ(csv, "a,\"b,c\"\n0,0.333333333333\n123456789.123,0\n");
  const auto back = import_matrix_csv(csv);
  EXPECT_EQ(back.labels, (std::vector<std::string>{"a", "b,c"}));
  EXPECT_NEAR(back.values(0, 1), 1.0 / 3.0, 1e-12);
  EXPECT_EQ(back.values(1, 0), 123456789.123);
  EXPECT_EQ(export_matrix_csv(Eigen::MatrixXd::Zero(2, 2)), "1,2\n0,0\n0,0\n");
  EXPECT_EQ(error_of([] { import_matrix_csv("a,b\n1\n"); }).code(), ErrorCode::ParseError);
}
