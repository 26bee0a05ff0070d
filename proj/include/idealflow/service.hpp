#pragma once

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <shared_mutex>
#include <sstream>
#include <string>

#include <json.hpp>

#include "idealflow/error.hpp"
#include "idealflow/io.hpp"
#include "idealflow/version.hpp"
#include "idealflow/whatif.hpp"

// After Eigen: httplib pulls in <resolv.h>, whose _res macro breaks Eigen headers.
#include <httplib.h>

namespace idealflow {

// HTTP what-if service, JSON over HTTP under /api/v1.
//
//   POST /api/v1/sessions                 create from a document or TNTP text
//   GET  /api/v1/sessions/{id}            current stage, edit history, snapshot
//   POST /api/v1/sessions/{id}/edits      {op, tail, head, capacity?}
//   POST /api/v1/sessions/{id}/undo
//   GET  /api/v1/sessions/{id}/flow       ?normalize=min|total&method=markov|nullspace
//   GET  /api/v1/health  (also /health)
//
// Error bodies are {code, message, detail}.

struct ServiceOptions {
  std::string corsOrigin;
  std::filesystem::path journalDir;  ///< empty: no journal
  std::filesystem::path staticDir;   ///< empty: no static assets
  std::ostream* log = nullptr;       ///< one JSON line per request
};

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::NotStronglyConnected:
    case ErrorCode::AugmentationFailed:
    case ErrorCode::DanglingNode:
    case ErrorCode::NotIrreducible:
      return 422;
    case ErrorCode::DuplicateArc:
    case ErrorCode::MissingArc:
    case ErrorCode::EmptyHistory:
      return 409;
    default:
      return is_numeric_failure(code) ? 500 : 400;
  }
}

class WhatIfService {
 public:
  explicit WhatIfService(ServiceOptions opts = {}) : opts_(std::move(opts)) {
    if (!opts_.journalDir.empty()) {
      std::filesystem::create_directories(opts_.journalDir);
      recover();
    }
  }

  void mount(httplib::Server& server) {
    server.Get("/health", [](const httplib::Request&, httplib::Response& res) { health(res); });
    server.Get("/api/v1/health", [](const httplib::Request&, httplib::Response& res) { health(res); });

    server.Post("/api/v1/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { create(req, res); });
    });
    server.Get(R"(/api/v1/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto entry = find(req.matches[1]);
        std::shared_lock lock(entry->mutex);
        nlohmann::ordered_json body;
        body["sessionId"] = std::string(req.matches[1]);
        body["stage"] = entry->session.stage();
        body["edits"] = nlohmann::ordered_json::array();
        for (const auto& e : entry->session.edits()) body["edits"].push_back(edit_to_json(e));
        body["snapshot"] = snapshot_to_json(entry->session.snapshot());
        reply(res, 200, body);
      });
    });
    server.Post(R"(/api/v1/sessions/([^/]+)/edits)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto entry = find(req.matches[1]);
        const Edit edit = edit_from_json(parse_body(req));
        std::unique_lock lock(entry->mutex);
        const auto& snap = entry->session.apply(edit);
        journal(req.matches[1], {{"type", "edit"}, {"edit", edit_to_json(edit)}});
        reply(res, 200, snapshot_to_json(snap));
      });
    });
    server.Post(R"(/api/v1/sessions/([^/]+)/undo)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto entry = find(req.matches[1]);
        std::unique_lock lock(entry->mutex);
        const auto& snap = entry->session.undo();
        journal(req.matches[1], {{"type", "undo"}});
        reply(res, 200, snapshot_to_json(snap));
      });
    });
    server.Get(R"(/api/v1/sessions/([^/]+)/flow)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto entry = find(req.matches[1]);
        const std::string normalize = req.has_param("normalize") ? req.get_param_value("normalize") : "min";
        const std::string method = req.has_param("method") ? req.get_param_value("method") : "markov";
        if (normalize != "min" && normalize != "total") {
          throw Error(ErrorCode::InvalidArgument, "normalize must be min or total");
        }
        if (method != "markov" && method != "nullspace") {
          throw Error(ErrorCode::InvalidArgument, "method must be markov or nullspace");
        }
        std::shared_lock lock(entry->mutex);
        const auto f = entry->session.flow(normalize == "min" ? FlowNormalization::Min : FlowNormalization::Total,
                                           method == "markov" ? FlowMethod::Markov : FlowMethod::Nullspace);
        nlohmann::ordered_json body;
        body["normalize"] = normalize;
        body["method"] = method;
        body["flows"] = nlohmann::ordered_json::array();
        for (const auto& a : entry->session.arc_flows(f)) {
          body["flows"].push_back({{"tail", a.tail}, {"head", a.head}, {"flow", round_significant(a.flow)}});
        }
        body["snapshot"] = snapshot_to_json(entry->session.snapshot());
        reply(res, 200, body);
      });
    });

    if (!opts_.corsOrigin.empty()) {
      server.set_default_headers({{"Access-Control-Allow-Origin", opts_.corsOrigin}});
      server.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
        res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
        res.set_header("Access-Control-Allow-Headers", "Content-Type");
        res.status = 204;
      });
    }
    if (!opts_.staticDir.empty()) server.set_mount_point("/", opts_.staticDir.string());
    if (opts_.log) {
      server.set_logger([this](const httplib::Request& req, const httplib::Response& res) {
        nlohmann::ordered_json line{{"method", req.method}, {"path", req.path}, {"status", res.status}};
        std::lock_guard lock(logMutex_);
        *opts_.log << line.dump() << '\n' << std::flush;
      });
    }
  }

  std::size_t session_count() const {
    std::lock_guard lock(registryMutex_);
    return sessions_.size();
  }

 private:
  struct Entry {
    explicit Entry(Session s) : session(std::move(s)) {}
    std::shared_mutex mutex;
    Session session;
  };

  static void reply(httplib::Response& res, int status, const nlohmann::ordered_json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void health(httplib::Response& res) {
    reply(res, 200, {{"status", "ok"}, {"version", kVersion}});
  }

  template <class F>
  static void guarded(httplib::Response& res, F&& body) {
    try {
      body();
    } catch (const NotFound& e) {
      reply(res, 404, {{"code", "NotFound"}, {"message", e.what()}, {"detail", ""}});
    } catch (const Error& e) {
      reply(res, http_status(e.code()), {{"code", to_string(e.code())}, {"message", e.what()}, {"detail", e.detail()}});
    } catch (const std::exception& e) {
      reply(res, 500, {{"code", "Internal"}, {"message", e.what()}, {"detail", ""}});
    }
  }

  struct NotFound : std::runtime_error {
    using std::runtime_error::runtime_error;
  };

  static nlohmann::json parse_body(const httplib::Request& req) {
    try {
      return nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(ErrorCode::SchemaError, std::string("invalid JSON: ") + e.what(), "$");
    }
  }

  std::shared_ptr<Entry> find(const std::string& id) const {
    std::lock_guard lock(registryMutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFound("unknown session " + id);
    return it->second;
  }

  static bool truthy(const std::string& v) { return v == "true" || v == "1" || v == "yes"; }

  // Body: a NetworkDocument, or {"document": ..., "options": ...}, or
  // {"tntp": "<net file text>", "options": ...}.
  static std::pair<NetworkDocument, SessionOptions> read_create_request(const nlohmann::json& body,
                                                                         const httplib::Request& req) {
    if (!body.is_object()) throw detail::schema_error("$", "expected an object");
    NetworkDocument doc;
    SessionOptions opts;
    if (body.contains("schemaVersion")) {
      doc = document_from_json(body);
    } else if (body.contains("document")) {
      doc = document_from_json(body["document"]);
    } else if (body.contains("tntp")) {
      if (!body["tntp"].is_string()) throw detail::schema_error("tntp", "expected a string");
      doc = document_from_network(parse_tntp_net(body["tntp"].get<std::string>()).network);
    } else {
      throw detail::schema_error("$", "expected a network document, \"document\" or \"tntp\"");
    }
    if (body.contains("options")) opts = options_from_json(body["options"]);
    if (req.has_param("augment")) opts.augment = truthy(req.get_param_value("augment"));
    if (req.has_param("capacityWeighted")) opts.capacityWeighted = truthy(req.get_param_value("capacityWeighted"));
    return {std::move(doc), opts};
  }

  static SessionOptions options_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw detail::schema_error("options", "expected an object");
    SessionOptions opts;
    if (j.contains("augment")) opts.augment = j["augment"].get<bool>();
    if (j.contains("capacityWeighted")) opts.capacityWeighted = j["capacityWeighted"].get<bool>();
    if (j.contains("dummyCapacity")) opts.dummyCapacity = detail::json_number(j["dummyCapacity"], "options.dummyCapacity");
    if (j.contains("referenceArc") && !j["referenceArc"].is_null()) {
      const auto& r = j["referenceArc"];
      if (!r.is_object() || !r.contains("tail") || !r.contains("head")) {
        throw detail::schema_error("options.referenceArc", "expected {tail, head}");
      }
      opts.referenceArc = IdPair{detail::json_id(r["tail"], "options.referenceArc.tail"),
                                 detail::json_id(r["head"], "options.referenceArc.head")};
    }
    return opts;
  }

  static nlohmann::ordered_json options_to_json(const SessionOptions& o) {
    nlohmann::ordered_json j{{"augment", o.augment}, {"capacityWeighted", o.capacityWeighted},
                             {"dummyCapacity", o.dummyCapacity}};
    j["referenceArc"] = o.referenceArc ? nlohmann::ordered_json{{"tail", o.referenceArc->tail}, {"head", o.referenceArc->head}}
                                       : nlohmann::ordered_json(nullptr);
    return j;
  }

  void create(const httplib::Request& req, httplib::Response& res) {
    auto [doc, opts] = read_create_request(parse_body(req), req);
    auto entry = std::make_shared<Entry>(Session(doc, opts));
    std::string id;
    {
      std::lock_guard lock(registryMutex_);
      id = make_id(nextId_++);
      sessions_[id] = entry;
    }
    journal(id, {{"type", "create"}, {"document", document_to_json(doc)}, {"options", options_to_json(opts)}});
    nlohmann::ordered_json body;
    body["sessionId"] = id;
    body["snapshot"] = snapshot_to_json(entry->session.snapshot());
    reply(res, 201, body);
  }

  static std::string make_id(std::uint64_t k) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "s%06llu", static_cast<unsigned long long>(k));
    return buf;
  }

  // Append-only journal, one JSON line per accepted mutation. Snapshots are
  // not stored; replay recomputes them.
  void journal(const std::string& id, const nlohmann::ordered_json& line) {
    if (opts_.journalDir.empty()) return;
    std::lock_guard lock(journalMutex_);
    std::ofstream out(opts_.journalDir / (id + ".jsonl"), std::ios::app);
    out << line.dump() << '\n';
  }

  void recover() {
    for (const auto& file : std::filesystem::directory_iterator(opts_.journalDir)) {
      if (file.path().extension() != ".jsonl") continue;
      const std::string id = file.path().stem().string();
      std::ifstream in(file.path());
      std::string line;
      std::shared_ptr<Entry> entry;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        const auto type = j.at("type").get<std::string>();
        if (type == "create") {
          entry = std::make_shared<Entry>(Session(document_from_json(j["document"]), options_from_json(j["options"])));
        } else if (entry && type == "edit") {
          entry->session.apply(edit_from_json(j["edit"]));
        } else if (entry && type == "undo") {
          entry->session.undo();
        }
      }
      if (!entry) continue;
      sessions_[id] = entry;
      if (id.size() > 1 && id[0] == 's') {
        nextId_ = std::max<std::uint64_t>(nextId_, std::stoull(id.substr(1)) + 1);
      }
    }
  }

  ServiceOptions opts_;
  mutable std::mutex registryMutex_;
  std::mutex journalMutex_;
  std::mutex logMutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t nextId_ = 1;
};

namespace detail {
inline std::atomic<httplib::Server*> activeServer{nullptr};
inline void stop_active_server(int) {
  if (auto* s = activeServer.load()) s->stop();
}
}  // namespace detail

/// Runs the service until SIGINT/SIGTERM. Returns 4 when the port cannot be bound.
inline int serve(const std::string& host, int port, ServiceOptions opts, std::ostream& err) {
  httplib::Server server;
  WhatIfService service(std::move(opts));
  service.mount(server);
  // No SO_REUSEPORT: a second instance on the same port must fail to bind.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const char*>(&yes), sizeof yes);
  });
  if (!server.bind_to_port(host, port)) {
    err << "error: cannot bind " << host << ':' << port << '\n';
    return 4;
  }
  detail::activeServer = &server;
  std::signal(SIGINT, detail::stop_active_server);
  std::signal(SIGTERM, detail::stop_active_server);
  err << "listening on " << host << ':' << port << '\n';
  server.listen_after_bind();
  detail::activeServer = nullptr;
  return 0;
}

}  // namespace idealflow
