#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "idealflow/calibrate.hpp"
#include "idealflow/error.hpp"
#include "idealflow/format.hpp"
#include "idealflow/graph.hpp"
#include "idealflow/io.hpp"
#include "idealflow/markov.hpp"
#include "idealflow/nullspace.hpp"
#include "idealflow/service.hpp"
#include "idealflow/version.hpp"
#include "idealflow/walk.hpp"
#include "idealflow/whatif.hpp"

namespace idealflow {

// Exit codes: 0 ok, 2 bad input, 3 numerical failure, 4 environment.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitNumeric = 3;
inline constexpr int kExitEnvironment = 4;

namespace cli {

struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << text;
}

inline std::string sniff_format(const std::string& path, const std::string& format) {
  if (format != "auto") return format;
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".json") return "json";
  if (ext == ".tntp") return "tntp";
  throw InputError("cannot tell the format of " + path + "; use --format json|tntp");
}

inline NetworkDocument load_network_document(const std::string& path, const std::string& format) {
  const std::string text = read_file(path);
  if (sniff_format(path, format) == "json") return load_document(text);
  return document_from_network(parse_tntp_net(text).network);
}

inline DirectedNetwork load_network(const std::string& path, const std::string& format) {
  const std::string text = read_file(path);
  if (sniff_format(path, format) == "json") return to_network(load_document(text));
  return parse_tntp_net(text).network;
}

inline AugmentedNetwork prepare(const DirectedNetwork& net, bool augment, double dummyCapacity) {
  if (augment) return augment_with_cloud(net, dummyCapacity);
  if (!is_strongly_connected(net)) {
    throw Error(ErrorCode::NotStronglyConnected, "network is not strongly connected (try --augment)");
  }
  return AugmentedNetwork{net, net.node_count(), std::nullopt, {}};
}

inline nlohmann::ordered_json flow_json(const IdealFlowMatrix& f, const DirectedNetwork& net) {
  nlohmann::ordered_json j;
  j["labels"] = nlohmann::ordered_json::array();
  for (NodeId i = 0; i < net.node_count(); ++i) j["labels"].push_back(net.label(i));
  j["arcs"] = nlohmann::ordered_json::array();
  const auto& m = f.matrix();
  for (Eigen::Index i = 0; i < m.outerSize(); ++i) {
    for (SparseRowMatrix::InnerIterator it(m, i); it; ++it) {
      j["arcs"].push_back({{"tail", net.label(static_cast<NodeId>(it.row()))},
                           {"head", net.label(static_cast<NodeId>(it.col()))},
                           {"flow", round_significant(it.value())}});
    }
  }
  return j;
}

// Entropy of the chain implied by the flow itself, so every method reports it
// the same way.
inline nlohmann::ordered_json summary_json(const IdealFlowMatrix& f, const AugmentedNetwork& aug,
                                           const std::string& method) {
  const DirectedNetwork& net = aug.network;
  const StochasticMatrix t = transition_from_flows(f.matrix());
  const Eigen::VectorXd load = f.row_sums();
  const EntropyReport entropy = network_entropy(t, PerronVector{load, load.sum()});
  const auto top = f.max_arc();

  nlohmann::ordered_json j;
  j["method"] = method;
  j["nodeCount"] = net.node_count();
  j["arcCount"] = net.arc_count();
  j["cloudNode"] = aug.cloudNode ? nlohmann::ordered_json(net.label(*aug.cloudNode)) : nlohmann::ordered_json(nullptr);
  j["total"] = round_significant(f.total());
  j["premagicResidual"] = round_significant(is_premagic(f, 1e-9).residual);
  j["maxFlowArc"] = {{"tail", net.label(top.tail)}, {"head", net.label(top.head)}, {"flow", round_significant(top.value)}};
  j["entropyPerNode"] = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < entropy.perNode.size(); ++i) {
    j["entropyPerNode"].push_back(round_significant(entropy.perNode[i]));
  }
  j["networkEntropy"] = round_significant(entropy.networkEntropy);
  return j;
}

inline NodeId node_by_label(const DirectedNetwork& net, const std::string& label) {
  for (NodeId i = 0; i < net.node_count(); ++i) {
    if (net.label(i) == label) return i;
  }
  throw InputError("no node labelled " + label);
}

struct ComputeArgs {
  std::string network, format = "auto", method = "markov", origin, normalize = "min", out;
  bool capacityWeighted = false, augment = false, snap = false;
  double kappa = 1.0, dummyCapacity = 1.0;
};

inline void cmd_compute(const ComputeArgs& a, std::ostream& out, std::ostream& err) {
  if (a.method != "markov" && a.capacityWeighted) {
    throw InputError("--capacity-weighted is only supported by --method markov");
  }
  if (!(a.kappa > 0.0)) throw InputError("--kappa must be positive");
  const AugmentedNetwork aug = prepare(load_network(a.network, a.format), a.augment, a.dummyCapacity);
  const DirectedNetwork& net = aug.network;

  IdealFlowMatrix f;
  if (a.method == "markov") {
    f = markov_ideal_flow(net, a.capacityWeighted);
  } else if (a.method == "nullspace") {
    f = nullspace_ideal_flow(net);
  } else {
    const NodeId origin = a.origin.empty() ? 0 : node_by_label(net, a.origin);
    f = propagate_flow(net, origin);
  }
  f = a.normalize == "min" ? normalize_min(f) : normalize_total(f, a.kappa);
  if (a.snap) {
    if (auto snapped = snap_to_integers(f)) {
      f = *snapped;
    } else {
      err << "warning: flow is not integral within 1e-6; --snap ignored\n";
    }
  }

  auto summary = summary_json(f, aug, a.method);
  if (a.out.empty()) {
    summary["flow"] = flow_json(f, net);
  } else if (std::filesystem::path(a.out).extension() == ".json") {
    write_file(a.out, flow_json(f, net).dump(2) + "\n");
  } else {
    write_file(a.out, export_matrix_csv(f, net.labels()));
  }
  out << summary.dump(2) << '\n';
}

struct SimulateArgs {
  std::string network, format = "auto", out = "simulation";
  std::size_t agents = 100, steps = 200, checkpoints = 16, burnIn = 0;
  std::uint64_t seed = 0;
  unsigned workers = 1;
  bool capacityWeighted = false, augment = false;
  double dummyCapacity = 1.0;
};

inline void cmd_simulate(const SimulateArgs& a, std::ostream& out) {
  const AugmentedNetwork aug = prepare(load_network(a.network, a.format), a.augment, a.dummyCapacity);
  const DirectedNetwork& net = aug.network;
  SimConfig cfg;
  cfg.agents = a.agents;
  cfg.steps = a.steps;
  cfg.seed = a.seed;
  cfg.burnIn = a.burnIn;
  cfg.workers = a.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : a.workers;
  cfg.validate(net.node_count());
  if (a.checkpoints == 0) throw InputError("--checkpoints must be at least 1");

  const StochasticMatrix t = a.capacityWeighted ? capacity_transition(net) : uniform_transition(net);
  const IdealFlowMatrix exact = normalize_min(ideal_flow(stationary(t, 1.0), t));
  const auto steps = detail::checkpoint_steps(cfg.agents, cfg.steps, a.checkpoints);
  const auto counts = simulate_checkpoints(net, t, cfg, steps);
  ConvergenceSeries series;
  for (std::size_t c = 0; c < steps.size(); ++c) {
    series.checkpoints.push_back(
        {static_cast<std::uint64_t>(cfg.agents) * steps[c], max_relative_error(relative_flow(counts[c]), exact)});
  }
  const FlowCount& r = counts.back();
  const IdealFlowMatrix rel = relative_flow(r);

  const SparseRowMatrix rd = r.counts.cast<double>();
  write_file(a.out + "_counts.csv", export_matrix_csv(Eigen::MatrixXd(rd), net.labels()));
  write_file(a.out + "_relative.csv", export_matrix_csv(rel, net.labels()));
  write_file(a.out + "_convergence.csv", series.to_csv());

  nlohmann::ordered_json j;
  j["agents"] = cfg.agents;
  j["steps"] = cfg.steps;
  j["seed"] = cfg.seed;
  j["totalTransitions"] = r.total();
  j["maxRelativeError"] = round_significant(series.checkpoints.back().maxRelativeError);
  j["outputs"] = {a.out + "_counts.csv", a.out + "_relative.csv", a.out + "_convergence.csv"};
  out << j.dump(2) << '\n';
}

struct CalibrateArgs {
  std::string net, flows, mode = "closed-form", out = "calibration";
  bool includeDummyArcs = false, strict = false;
  double dummyCapacity = 1.0;
};

inline void cmd_calibrate(const CalibrateArgs& a, std::ostream& out, std::ostream& err) {
  const TntpNetwork parsed = parse_tntp_net(read_file(a.net));
  const ObservedFlows observed = observed_flows(parse_tntp_flow(read_file(a.flows)), parsed.network, a.strict);
  if (observed.droppedRecords) err << "warning: " << observed.droppedRecords << " flow records match no link\n";

  const AugmentedNetwork aug = augment_with_cloud(parsed.network, a.dummyCapacity);
  const SparseRowMatrix obs = fill_dummy_observations(aug, observed.volumes);
  FitOptions opts;
  opts.mode = a.mode == "search" ? FitMode::GoldenSection : FitMode::ClosedForm;
  opts.cloudNode = aug.cloudNode;
  opts.includeDummyArcs = a.includeDummyArcs;
  const CalibrationResult result = fit_scale(unit_ideal_flow(obs), obs, opts);

  const auto& labels = aug.network.labels();
  auto j = calibration_to_json(result, labels);
  j["nodeCount"] = parsed.network.node_count();
  j["linkCount"] = parsed.network.arc_count();
  j["cloudNode"] = aug.cloudNode.has_value();
  write_file(a.out + ".json", j.dump(2) + "\n");
  write_file(a.out + "_residuals.csv", residuals_csv(result, labels));
  write_file(a.out + "_trace.csv", search_trace_csv(result));

  nlohmann::ordered_json s;
  s["nodeCount"] = parsed.network.node_count();
  s["linkCount"] = parsed.network.arc_count();
  s["kappa"] = j["kappa"];
  s["mse"] = j["mse"];
  s["arcCount"] = result.arcCount;
  out << s.dump(2) << '\n';
}

struct WhatIfArgs {
  std::string network, script, format = "auto", reference, out;
  bool augment = false, capacityWeighted = false;
  double dummyCapacity = 1.0;
};

inline IdPair parse_reference(const std::string& text) {
  const auto sep = text.find_first_of(",-:");
  if (sep == std::string::npos) throw InputError("--reference expects TAIL,HEAD");
  try {
    return IdPair{std::stoll(text.substr(0, sep)), std::stoll(text.substr(sep + (text.compare(sep, 2, "->") ? 1 : 2)))};
  } catch (const std::exception&) {
    throw InputError("--reference expects TAIL,HEAD");
  }
}

inline void cmd_whatif(const WhatIfArgs& a, std::ostream& out) {
  const NetworkDocument doc = load_network_document(a.network, a.format);
  const WhatIfScript script = parse_whatif_script(read_file(a.script));
  SessionOptions opts;
  opts.augment = a.augment;
  opts.capacityWeighted = a.capacityWeighted;
  opts.dummyCapacity = a.dummyCapacity;
  opts.referenceArc = a.reference.empty() ? script.referenceArc : std::optional(parse_reference(a.reference));
  const std::string report = replay_report(replay(doc, opts, script.edits)).dump(2) + "\n";
  if (a.out.empty()) {
    out << report;
  } else {
    write_file(a.out, report);
  }
}

struct ServeArgs {
  std::string host = "127.0.0.1", corsOrigin, journalDir, staticDir;
  int port = 8080;
  bool quiet = false;
};

}  // namespace cli

/// Entry point of the `idealflow` executable. Options may also come from an
/// INI/TOML-style config file (default ./idealflow.toml, sections named after
/// subcommands); command-line flags win.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Ideal flow analysis of directed networks", "idealflow"};
  app.set_version_flag("--version", std::string(kVersion));
  app.set_config("--config", "idealflow.toml", "Config file (key = value; flags take precedence)");
  app.require_subcommand(1);

  cli::ComputeArgs compute;
  auto* c = app.add_subcommand("compute", "Ideal flow matrix of a network");
  c->add_option("network", compute.network, "Network file (.json or .tntp)")->required();
  c->add_option("--format", compute.format, "Input format")->check(CLI::IsMember({"auto", "json", "tntp"}));
  c->add_option("--method", compute.method, "Solver")->check(CLI::IsMember({"markov", "nullspace", "propagate"}));
  c->add_option("--origin", compute.origin, "Injection node label for --method propagate (default: first node)");
  c->add_flag("--capacity-weighted", compute.capacityWeighted, "Capacity-proportional transitions (markov only)");
  c->add_option("--kappa", compute.kappa, "Total flow for --normalize total");
  c->add_option("--normalize", compute.normalize, "Normalization")->check(CLI::IsMember({"min", "total"}));
  c->add_flag("--augment", compute.augment, "Add a cloud node when the network is not strongly connected");
  c->add_option("--dummy-capacity", compute.dummyCapacity, "Capacity of cloud arcs");
  c->add_flag("--snap", compute.snap, "Round entries within 1e-6 of an integer");
  c->add_option("--out", compute.out, "Matrix output (.csv or .json); summary goes to stdout");

  cli::SimulateArgs simulate;
  auto* s = app.add_subcommand("simulate", "Random-walk simulation of agents");
  s->add_option("network", simulate.network, "Network file (.json or .tntp)")->required();
  s->add_option("--format", simulate.format, "Input format")->check(CLI::IsMember({"auto", "json", "tntp"}));
  s->add_option("--agents", simulate.agents, "Number of agents");
  s->add_option("--steps", simulate.steps, "Steps per agent");
  s->add_option("--seed", simulate.seed, "Random seed");
  s->add_option("--checkpoints", simulate.checkpoints, "Maximum number of convergence checkpoints");
  s->add_option("--burn-in", simulate.burnIn, "Unrecorded steps before counting");
  s->add_option("--workers", simulate.workers, "Worker threads (0: all cores); output is unaffected");
  s->add_flag("--capacity-weighted", simulate.capacityWeighted, "Capacity-proportional transitions");
  s->add_flag("--augment", simulate.augment, "Add a cloud node when needed");
  s->add_option("--dummy-capacity", simulate.dummyCapacity, "Capacity of cloud arcs");
  s->add_option("--out", simulate.out, "Output prefix for _counts.csv, _relative.csv, _convergence.csv");

  cli::CalibrateArgs calibrate;
  auto* k = app.add_subcommand("calibrate", "Fit the scale of ideal flow to observed link flows");
  k->add_option("net", calibrate.net, "TNTP network file")->required();
  k->add_option("flows", calibrate.flows, "TNTP flow file")->required();
  k->add_option("--mode", calibrate.mode, "Fit mode")->check(CLI::IsMember({"closed-form", "search"}));
  k->add_flag("--include-dummy-arcs", calibrate.includeDummyArcs, "Count cloud arcs in the error");
  k->add_flag("--strict", calibrate.strict, "Reject flow records that match no link");
  k->add_option("--dummy-capacity", calibrate.dummyCapacity, "Capacity of cloud arcs");
  k->add_option("--out", calibrate.out, "Output prefix for .json, _residuals.csv, _trace.csv");

  cli::WhatIfArgs whatif;
  auto* w = app.add_subcommand("whatif", "Replay a script of arc edits");
  w->add_option("network", whatif.network, "Network file (.json or .tntp)")->required();
  w->add_option("script", whatif.script, "Edit script (JSON)")->required();
  w->add_option("--format", whatif.format, "Input format")->check(CLI::IsMember({"auto", "json", "tntp"}));
  w->add_flag("--augment", whatif.augment, "Add a cloud node when needed");
  w->add_flag("--capacity-weighted", whatif.capacityWeighted, "Capacity-proportional transitions");
  w->add_option("--dummy-capacity", whatif.dummyCapacity, "Capacity of cloud arcs");
  w->add_option("--reference", whatif.reference, "Reference arc TAIL,HEAD (document ids)");
  w->add_option("--out", whatif.out, "Report file (default: stdout)");

  cli::ServeArgs serveArgs;
  auto* v = app.add_subcommand("serve", "Run the what-if HTTP service");
  v->add_option("--host", serveArgs.host, "Bind address");
  v->add_option("--port", serveArgs.port, "Port")->check(CLI::Range(0, 65535));
  v->add_option("--cors-origin", serveArgs.corsOrigin, "Value of Access-Control-Allow-Origin");
  v->add_option("--journal-dir", serveArgs.journalDir, "Directory for per-session edit journals");
  v->add_option("--static-dir", serveArgs.staticDir, "Static files served at /");
  v->add_flag("--quiet", serveArgs.quiet, "No request log");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (c->parsed()) cli::cmd_compute(compute, out, err);
    if (s->parsed()) cli::cmd_simulate(simulate, out);
    if (k->parsed()) cli::cmd_calibrate(calibrate, out, err);
    if (w->parsed()) cli::cmd_whatif(whatif, out);
    if (v->parsed()) {
      ServiceOptions opts;
      opts.corsOrigin = serveArgs.corsOrigin;
      opts.journalDir = serveArgs.journalDir;
      opts.staticDir = serveArgs.staticDir;
      if (!serveArgs.quiet) opts.log = &err;
      return serve(serveArgs.host, serveArgs.port, std::move(opts), err);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_numeric_failure(e.code()) ? kExitNumeric : kExitInput;
  } catch (const cli::InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitEnvironment;
  }
  return kExitOk;
}

}  // namespace idealflow
