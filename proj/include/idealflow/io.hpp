#pragma once

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "idealflow/error.hpp"
#include "idealflow/format.hpp"
#include "idealflow/graph.hpp"
#include "idealflow/markov.hpp"

namespace idealflow {

// ---------------------------------------------------------------------------
// Text helpers

namespace detail {

/// Splits into lines, accepting LF, CRLF and CR.
inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\n' || text[i] == '\r') {
      lines.push_back(text.substr(start, i - start));
      if (text[i] == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      start = i + 1;
    }
  }
  if (start < text.size()) lines.push_back(text.substr(start));
  return lines;
}

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  return s.substr(b, s.find_last_not_of(ws) - b + 1);
}

inline std::vector<std::string_view> tokens(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

inline Error parse_error(std::size_t line, const std::string& reason) {
  return Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + reason, std::to_string(line));
}

template <class T>
T parse_number(std::string_view tok, std::size_t line, std::string_view what) {
  T value{};
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw parse_error(line, std::string(what) + " '" + std::string(tok) + "' is not a valid number");
  }
  return value;
}

/// Tokens of a TNTP data row with the `;` terminator removed.
inline std::vector<std::string_view> row_tokens(std::string_view line) {
  auto toks = tokens(line);
  std::vector<std::string_view> out;
  for (auto t : toks) {
    while (!t.empty() && t.back() == ';') t.remove_suffix(1);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// TNTP network files

struct TntpLink {
  long long initNode = 0;  ///< 1-based, as in the file
  long long termNode = 0;
  double capacity = 0.0;
  double length = 0.0;
  double freeFlowTime = 0.0;
  double b = 0.0;
  double power = 0.0;
  double speed = 0.0;
  double toll = 0.0;
  long long linkType = 0;

  friend bool operator==(const TntpLink&, const TntpLink&) = default;
};

struct TntpNetworkFile {
  long long numZones = 0;
  long long numNodes = 0;
  long long firstThruNode = 1;
  long long numLinks = 0;
  std::vector<std::pair<std::string, std::string>> metadata;  ///< every tag, in file order
  std::vector<TntpLink> links;
};

struct TntpNetwork {
  DirectedNetwork network;
  TntpNetworkFile file;
};

/// Parses the public TNTP `_net` convention: `<TAG> value` metadata up to
/// `<END OF METADATA>`, `~` comments, whitespace-separated link rows ending in
/// `;` (init term capacity length fft b power speed toll type).
inline TntpNetwork parse_tntp_net(std::string_view text) {
  TntpNetworkFile file;
  const auto lines = detail::split_lines(text);
  std::size_t ln = 0;
  bool ended = false;
  std::optional<long long> nodes, links;
  for (; ln < lines.size() && !ended; ++ln) {
    auto line = detail::trim(lines[ln]);
    if (line.empty() || line.front() == '~') continue;
    if (line.front() != '<') throw detail::parse_error(ln + 1, "expected a <TAG> metadata line");
    const auto close = line.find('>');
    if (close == std::string_view::npos) throw detail::parse_error(ln + 1, "unterminated metadata tag");
    std::string tag(detail::trim(line.substr(1, close - 1)));
    std::string value(detail::trim(line.substr(close + 1)));
    if (tag == "END OF METADATA") {
      ended = true;
      continue;
    }
    file.metadata.emplace_back(tag, value);
    auto as_int = [&] { return detail::parse_number<long long>(value, ln + 1, tag); };
    if (tag == "NUMBER OF NODES") nodes = as_int();
    else if (tag == "NUMBER OF LINKS") links = as_int();
    else if (tag == "NUMBER OF ZONES") file.numZones = as_int();
    else if (tag == "FIRST THRU NODE") file.firstThruNode = as_int();
  }
  if (!ended) throw detail::parse_error(lines.size(), "missing <END OF METADATA>");
  if (!nodes) throw detail::parse_error(lines.size(), "missing <NUMBER OF NODES>");
  if (!links) throw detail::parse_error(lines.size(), "missing <NUMBER OF LINKS>");
  if (*nodes < 0 || *links < 0) throw detail::parse_error(lines.size(), "negative node or link count");
  file.numNodes = *nodes;
  file.numLinks = *links;

  std::vector<Arc> arcs;
  std::set<std::pair<long long, long long>> seen;
  for (; ln < lines.size(); ++ln) {
    auto line = lines[ln];
    if (auto c = line.find('~'); c != std::string_view::npos) line = line.substr(0, c);
    const auto toks = detail::row_tokens(line);
    if (toks.empty()) continue;
    const std::size_t row = ln + 1;
    if (toks.size() < 3) throw detail::parse_error(row, "link row needs at least init, term and capacity");
    if (toks.size() > 10) throw detail::parse_error(row, "link row has more than 10 columns");
    TntpLink link;
    link.initNode = detail::parse_number<long long>(toks[0], row, "init_node");
    link.termNode = detail::parse_number<long long>(toks[1], row, "term_node");
    double* fields[] = {&link.capacity, &link.length, &link.freeFlowTime, &link.b,
                        &link.power,    &link.speed,  &link.toll};
    static constexpr std::string_view names[] = {"capacity", "length", "free_flow_time", "b",
                                                 "power",    "speed",  "toll"};
    for (std::size_t k = 2; k < std::min<std::size_t>(toks.size(), 9); ++k) {
      *fields[k - 2] = detail::parse_number<double>(toks[k], row, names[k - 2]);
    }
    if (toks.size() == 10) link.linkType = detail::parse_number<long long>(toks[9], row, "link_type");
    if (link.initNode < 1 || link.initNode > file.numNodes || link.termNode < 1 || link.termNode > file.numNodes) {
      throw detail::parse_error(row, "node index outside 1.." + std::to_string(file.numNodes));
    }
    if (!(link.capacity > 0.0)) throw detail::parse_error(row, "capacity must be positive");
    if (!seen.emplace(link.initNode, link.termNode).second) throw detail::parse_error(row, "duplicate link");
    arcs.push_back({static_cast<NodeId>(link.initNode - 1), static_cast<NodeId>(link.termNode - 1), link.capacity});
    file.links.push_back(link);
  }
  if (static_cast<long long>(file.links.size()) != file.numLinks) {
    throw Error(ErrorCode::MetadataMismatch, "metadata declares " + std::to_string(file.numLinks) +
                                                 " links but the file has " + std::to_string(file.links.size()));
  }
  return TntpNetwork{DirectedNetwork(static_cast<std::size_t>(file.numNodes), std::move(arcs)), std::move(file)};
}

inline std::string format_tntp_net(const TntpNetworkFile& file) {
  std::ostringstream out;
  for (const auto& [tag, value] : file.metadata) out << '<' << tag << "> " << value << '\n';
  out << "<END OF METADATA>\n\n";
  out << "~\tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower\tspeed\ttoll\tlink_type\t;\n";
  for (const TntpLink& l : file.links) {
    out << '\t' << l.initNode << '\t' << l.termNode << '\t' << format_number(l.capacity) << '\t'
        << format_number(l.length) << '\t' << format_number(l.freeFlowTime) << '\t' << format_number(l.b) << '\t'
        << format_number(l.power) << '\t' << format_number(l.speed) << '\t' << format_number(l.toll) << '\t'
        << l.linkType << "\t;\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// TNTP flow files

struct TntpFlowRecord {
  long long fromNode = 0;  ///< 1-based
  long long toNode = 0;
  double volume = 0.0;
  double cost = 0.0;
};

struct TntpFlowFile {
  std::vector<TntpFlowRecord> records;
};

/// One header line (From To Volume Cost), then one record per line.
inline TntpFlowFile parse_tntp_flow(std::string_view text) {
  TntpFlowFile file;
  const auto lines = detail::split_lines(text);
  bool header = false;
  std::set<std::pair<long long, long long>> seen;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    auto line = lines[ln];
    if (auto c = line.find('~'); c != std::string_view::npos) line = line.substr(0, c);
    const auto toks = detail::row_tokens(line);
    if (toks.empty()) continue;
    if (!header) {
      header = true;
      continue;
    }
    const std::size_t row = ln + 1;
    if (toks.size() < 3 || toks.size() > 4) throw detail::parse_error(row, "expected From To Volume [Cost]");
    TntpFlowRecord r;
    r.fromNode = detail::parse_number<long long>(toks[0], row, "From");
    r.toNode = detail::parse_number<long long>(toks[1], row, "To");
    r.volume = detail::parse_number<double>(toks[2], row, "Volume");
    if (toks.size() == 4) r.cost = detail::parse_number<double>(toks[3], row, "Cost");
    if (r.volume < 0.0) throw detail::parse_error(row, "negative volume");
    if (!seen.emplace(r.fromNode, r.toNode).second) throw detail::parse_error(row, "duplicate (From, To) pair");
    file.records.push_back(r);
  }
  return file;
}

/// Observed volumes on the arcs of a network.
struct ObservedFlows {
  SparseRowMatrix volumes;
  std::size_t droppedRecords = 0;  ///< records not matching an arc (non-strict mode)
};

/// Places flow records on `net`. Strict mode rejects records that match no
/// arc; otherwise they are dropped and counted.
inline ObservedFlows observed_flows(const TntpFlowFile& file, const DirectedNetwork& net, bool strict = false) {
  ObservedFlows out;
  std::vector<Eigen::Triplet<double>> entries;
  const auto n = static_cast<long long>(net.node_count());
  for (const auto& r : file.records) {
    const bool inRange = r.fromNode >= 1 && r.fromNode <= n && r.toNode >= 1 && r.toNode <= n;
    if (!inRange || !net.find_arc(static_cast<NodeId>(r.fromNode - 1), static_cast<NodeId>(r.toNode - 1))) {
      if (strict) {
        throw Error(ErrorCode::UnknownArc,
                    "flow record " + std::to_string(r.fromNode) + "->" + std::to_string(r.toNode) + " is not an arc");
      }
      ++out.droppedRecords;
      continue;
    }
    entries.emplace_back(static_cast<Eigen::Index>(r.fromNode - 1), static_cast<Eigen::Index>(r.toNode - 1), r.volume);
  }
  out.volumes = detail::from_triplets(net.node_count(), entries);
  return out;
}

// ---------------------------------------------------------------------------
// JSON network documents (schemaVersion 1)

struct DocNode {
  long long id = 0;
  std::string label;
  std::optional<double> x, y;
  friend bool operator==(const DocNode&, const DocNode&) = default;
};

struct DocArc {
  long long tail = 0;
  long long head = 0;
  double capacity = 1.0;
  friend bool operator==(const DocArc&, const DocArc&) = default;
};

struct DocFlow {
  long long tail = 0;
  long long head = 0;
  double volume = 0.0;
  friend bool operator==(const DocFlow&, const DocFlow&) = default;
};

struct NetworkDocument {
  int schemaVersion = 1;
  std::vector<DocNode> nodes;
  std::vector<DocArc> arcs;
  std::vector<DocFlow> observedFlows;

  friend bool operator==(const NetworkDocument&, const NetworkDocument&) = default;

  /// Node index (position in `nodes`) for a document id.
  std::optional<NodeId> index_of(long long id) const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (nodes[i].id == id) return i;
    }
    return std::nullopt;
  }
};

namespace detail {

inline Error schema_error(const std::string& path, const std::string& reason) {
  return Error(ErrorCode::SchemaError, path + ": " + reason, path);
}

inline long long json_id(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number_integer()) throw schema_error(path, "expected an integer id");
  return j.get<long long>();
}

inline double json_number(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number()) throw schema_error(path, "expected a number");
  return j.get<double>();
}

}  // namespace detail

inline NetworkDocument document_from_json(const nlohmann::json& j) {
  using detail::schema_error;
  if (!j.is_object()) throw schema_error("$", "expected an object");
  NetworkDocument doc;
  if (!j.contains("schemaVersion")) throw schema_error("schemaVersion", "missing");
  if (!j["schemaVersion"].is_number_integer() || j["schemaVersion"].get<int>() != 1) {
    throw schema_error("schemaVersion", "only version 1 is supported");
  }
  if (!j.contains("nodes") || !j["nodes"].is_array()) throw schema_error("nodes", "expected an array");
  if (!j.contains("arcs") || !j["arcs"].is_array()) throw schema_error("arcs", "expected an array");

  std::map<long long, std::size_t> ids;
  for (std::size_t i = 0; i < j["nodes"].size(); ++i) {
    const auto& jn = j["nodes"][i];
    const std::string path = "nodes[" + std::to_string(i) + "]";
    if (!jn.is_object() || !jn.contains("id")) throw schema_error(path, "expected an object with an id");
    DocNode node;
    node.id = detail::json_id(jn["id"], path + ".id");
    if (!ids.emplace(node.id, i).second) throw schema_error(path + ".id", "duplicate node id");
    if (jn.contains("label")) {
      if (!jn["label"].is_string()) throw schema_error(path + ".label", "expected a string");
      node.label = jn["label"].get<std::string>();
    }
    if (jn.contains("x")) node.x = detail::json_number(jn["x"], path + ".x");
    if (jn.contains("y")) node.y = detail::json_number(jn["y"], path + ".y");
    doc.nodes.push_back(std::move(node));
  }

  std::set<std::pair<long long, long long>> seen;
  for (std::size_t i = 0; i < j["arcs"].size(); ++i) {
    const auto& ja = j["arcs"][i];
    const std::string path = "arcs[" + std::to_string(i) + "]";
    if (!ja.is_object() || !ja.contains("tail") || !ja.contains("head")) {
      throw schema_error(path, "expected an object with tail and head");
    }
    DocArc arc;
    arc.tail = detail::json_id(ja["tail"], path + ".tail");
    arc.head = detail::json_id(ja["head"], path + ".head");
    if (!ids.count(arc.tail)) throw schema_error(path + ".tail", "unknown node id " + std::to_string(arc.tail));
    if (!ids.count(arc.head)) throw schema_error(path + ".head", "unknown node id " + std::to_string(arc.head));
    if (ja.contains("capacity")) {
      arc.capacity = detail::json_number(ja["capacity"], path + ".capacity");
      if (!(arc.capacity > 0.0)) throw schema_error(path + ".capacity", "must be positive");
    }
    if (!seen.emplace(arc.tail, arc.head).second) throw schema_error(path, "duplicate arc");
    doc.arcs.push_back(arc);
  }

  if (j.contains("observedFlows")) {
    if (!j["observedFlows"].is_array()) throw schema_error("observedFlows", "expected an array");
    for (std::size_t i = 0; i < j["observedFlows"].size(); ++i) {
      const auto& jf = j["observedFlows"][i];
      const std::string path = "observedFlows[" + std::to_string(i) + "]";
      if (!jf.is_object() || !jf.contains("tail") || !jf.contains("head") || !jf.contains("volume")) {
        throw schema_error(path, "expected an object with tail, head and volume");
      }
      DocFlow f;
      f.tail = detail::json_id(jf["tail"], path + ".tail");
      f.head = detail::json_id(jf["head"], path + ".head");
      f.volume = detail::json_number(jf["volume"], path + ".volume");
      if (!seen.count({f.tail, f.head})) throw schema_error(path, "flow on an arc that is not in the network");
      if (f.volume < 0.0) throw schema_error(path + ".volume", "must be nonnegative");
      doc.observedFlows.push_back(f);
    }
  }
  return doc;
}

inline NetworkDocument load_document(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw detail::schema_error("$", std::string("invalid JSON: ") + e.what());
  }
  return document_from_json(j);
}

inline nlohmann::ordered_json document_to_json(const NetworkDocument& doc) {
  nlohmann::ordered_json j;
  j["schemaVersion"] = doc.schemaVersion;
  j["nodes"] = nlohmann::ordered_json::array();
  for (const auto& n : doc.nodes) {
    nlohmann::ordered_json jn;
    jn["id"] = n.id;
    if (!n.label.empty()) jn["label"] = n.label;
    if (n.x) jn["x"] = *n.x;
    if (n.y) jn["y"] = *n.y;
    j["nodes"].push_back(std::move(jn));
  }
  j["arcs"] = nlohmann::ordered_json::array();
  for (const auto& a : doc.arcs) j["arcs"].push_back({{"tail", a.tail}, {"head", a.head}, {"capacity", a.capacity}});
  if (!doc.observedFlows.empty()) {
    j["observedFlows"] = nlohmann::ordered_json::array();
    for (const auto& f : doc.observedFlows) {
      j["observedFlows"].push_back({{"tail", f.tail}, {"head", f.head}, {"volume", f.volume}});
    }
  }
  return j;
}

inline std::string save_document(const NetworkDocument& doc) { return document_to_json(doc).dump(2) + "\n"; }

/// Network over the document's nodes, indexed by position in `nodes`.
inline DirectedNetwork to_network(const NetworkDocument& doc) {
  std::vector<std::string> labels;
  std::map<long long, NodeId> index;
  for (std::size_t i = 0; i < doc.nodes.size(); ++i) {
    index[doc.nodes[i].id] = i;
    labels.push_back(doc.nodes[i].label.empty() ? std::to_string(doc.nodes[i].id) : doc.nodes[i].label);
  }
  std::vector<Arc> arcs;
  for (const auto& a : doc.arcs) arcs.push_back({index.at(a.tail), index.at(a.head), a.capacity});
  return DirectedNetwork(doc.nodes.size(), std::move(arcs), std::move(labels));
}

/// Document with ids 1..n; labels are written only when the network has them.
inline NetworkDocument document_from_network(const DirectedNetwork& net) {
  NetworkDocument doc;
  for (NodeId i = 0; i < net.node_count(); ++i) {
    doc.nodes.push_back({static_cast<long long>(i + 1), net.labels().empty() ? std::string() : net.labels()[i]});
  }
  for (const Arc& a : net.arcs()) {
    doc.arcs.push_back({static_cast<long long>(a.tail + 1), static_cast<long long>(a.head + 1), a.capacity});
  }
  return doc;
}

inline SparseRowMatrix document_observed_flows(const NetworkDocument& doc) {
  std::vector<Eigen::Triplet<double>> entries;
  for (const auto& f : doc.observedFlows) {
    entries.emplace_back(static_cast<Eigen::Index>(*doc.index_of(f.tail)),
                         static_cast<Eigen::Index>(*doc.index_of(f.head)), f.volume);
  }
  return detail::from_triplets(doc.nodes.size(), entries);
}

// ---------------------------------------------------------------------------
// Matrix CSV

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::vector<std::string> csv_split(std::string_view line) {
  std::vector<std::string> out(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        out.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        out.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.emplace_back();
    } else {
      out.back() += c;
    }
  }
  return out;
}

}  // namespace detail

/// Header row of node labels, then one row of values per node (12
/// significant digits). Labels default to 1..n.
inline std::string export_matrix_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& labels = {}) {
  std::ostringstream out;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    if (j) out << ',';
    out << detail::csv_field(labels.empty() ? std::to_string(j + 1) : labels[static_cast<std::size_t>(j)]);
  }
  out << '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_number(m(i, j));
    }
    out << '\n';
  }
  return out.str();
}

inline std::string export_matrix_csv(const IdealFlowMatrix& f, const std::vector<std::string>& labels = {}) {
  return export_matrix_csv(f.dense(), labels);
}

struct LabeledMatrix {
  std::vector<std::string> labels;
  Eigen::MatrixXd values;
};

inline LabeledMatrix import_matrix_csv(std::string_view text) {
  LabeledMatrix out;
  std::vector<std::vector<double>> rows;
  const auto lines = detail::split_lines(text);
  bool header = false;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (detail::trim(lines[ln]).empty()) continue;
    auto fields = detail::csv_split(lines[ln]);
    if (!header) {
      out.labels = std::move(fields);
      header = true;
      continue;
    }
    if (fields.size() != out.labels.size()) throw detail::parse_error(ln + 1, "row width differs from header");
    std::vector<double> row;
    for (const auto& f : fields) row.push_back(detail::parse_number<double>(detail::trim(f), ln + 1, "value"));
    rows.push_back(std::move(row));
  }
  out.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(out.labels.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return out;
}

}  // namespace idealflow
