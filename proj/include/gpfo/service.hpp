#pragma once

// HTTP+JSON API over a garden store. Growth steps run on a worker thread per
// session; status transitions stream as server-sent events.
//
//   GET  /api/sessions
//   POST /api/sessions                    {seed, mode?, max_steps?, id?}
//   GET  /api/sessions/{id}
//   GET  /api/sessions/{id}/graph
//   POST /api/sessions/{id}/step          {prompt?}
//   GET  /api/sessions/{id}/steps/{k}
//   GET  /api/sessions/{id}/export?format=graphml|json
//   GET  /api/sessions/{id}/events

#include <atomic>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "gpfo/garden.hpp"
#include "gpfo/graph_io.hpp"
#include "gpfo/metrics.hpp"

namespace gpfo::service {

/// Graph JSON with per-node degree, PageRank, bridging and prestige overlays.
inline nlohmann::json graph_view(const KnowledgeGraph& g) {
  auto j = to_json(g);
  if (g.empty()) return j;
  std::vector<MetricReport> reports{degree(g), pagerank(g), bridging_coefficient(g), domain_prestige(g)};
  for (auto& n : j["nodes"]) {
    NodeId id{n["id"].get<std::string>()};
    nlohmann::json m = nlohmann::json::object();
    for (const auto& r : reports) m[r.metric] = r.values.at(id);
    n["metrics"] = std::move(m);
  }
  return j;
}

inline nlohmann::json top_degree_json(const KnowledgeGraph& g, std::size_t k = 10) {
  auto out = nlohmann::json::array();
  if (g.empty()) return out;
  for (const auto& [id, v] : degree(g, k).top_k)
    out.push_back({{"node", id.key}, {"display", g.nodes().at(id).display}, {"value", v}});
  return out;
}

class Service {
 public:
  Service(garden::GardenStore store, std::shared_ptr<llm::Gateway> gateway, garden::GardenConfig cfg)
      : store_(std::move(store)), gateway_(std::move(gateway)), cfg_(std::move(cfg)) {
    routes();
  }

  ~Service() {
    stop();
    std::vector<std::thread> workers;
    {
      std::lock_guard lock(mu_);
      for (auto& [id, rt] : runtimes_)
        if (rt->worker.joinable()) workers.push_back(std::move(rt->worker));
    }
    for (auto& w : workers) w.join();
  }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  httplib::Server& server() { return server_; }

  int bind_to_any_port(const std::string& host = "127.0.0.1") { return server_.bind_to_any_port(host); }
  bool bind(const std::string& host, int port) { return server_.bind_to_port(host, port); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  bool listen(const std::string& host, int port) { return server_.listen(host, port); }

  void stop() {
    stopping_ = true;
    cv_.notify_all();
    server_.stop();
  }

  /// Blocks until the session has no step in flight.
  void wait_idle(const std::string& id) {
    std::unique_lock lock(mu_);
    auto rt = runtime_locked(id);
    cv_.wait(lock, [&] { return rt->status != "generating"; });
  }

 private:
  struct Runtime {
    std::string status = "idle";
    std::string error;
    std::uint64_t next_handle = 1;
    std::vector<nlohmann::json> events;
    std::thread worker;
  };

  std::shared_ptr<Runtime> runtime_locked(const std::string& id) {
    auto& rt = runtimes_[id];
    if (!rt) rt = std::make_shared<Runtime>();
    return rt;
  }

  void push_event_locked(Runtime& rt, nlohmann::json ev) {
    ev["seq"] = rt.events.size();
    rt.events.push_back(std::move(ev));
    cv_.notify_all();
  }

  static void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void send_error(httplib::Response& res, int status, const std::string& message) {
    send_json(res, status, {{"error", message}});
  }

  nlohmann::json view(const garden::GardenSession& s) {
    nlohmann::json v{{"id", s.id},
                     {"mode", garden::to_string(s.mode)},
                     {"seed_prompt", s.seed_prompt},
                     {"step_count", s.steps.size()},
                     {"max_steps", s.max_steps},
                     {"node_count", s.integrated.node_count()},
                     {"edge_count", s.integrated.edge_count()},
                     {"top_degree", top_degree_json(s.integrated)}};
    std::lock_guard lock(mu_);
    auto rt = runtime_locked(s.id);
    v["status"] = rt->status;
    if (!rt->error.empty()) v["error"] = rt->error;
    return v;
  }

  /// Loads a session or answers 404.
  std::optional<garden::GardenSession> load_or_404(const std::string& id, httplib::Response& res) {
    if (!store_.exists(id)) {
      send_error(res, 404, "unknown session " + id);
      return std::nullopt;
    }
    return store_.load(id);
  }

  static std::optional<nlohmann::json> parse_body(const httplib::Request& req, httplib::Response& res) {
    if (text::trim_view(req.body).empty()) return nlohmann::json::object();
    try {
      auto j = nlohmann::json::parse(req.body);
      if (!j.is_object()) {
        send_error(res, 422, "request body must be a JSON object");
        return std::nullopt;
      }
      return j;
    } catch (const nlohmann::json::exception& e) {
      send_error(res, 422, std::string("malformed JSON: ") + e.what());
      return std::nullopt;
    }
  }

  void routes() {
    server_.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
    server_.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        send_error(res, 500, e.what());
      }
    });

    server_.Get("/api/sessions", [this](const httplib::Request&, httplib::Response& res) {
      auto out = nlohmann::json::array();
      for (const auto& id : store_.list()) out.push_back(view(store_.load(id)));
      send_json(res, 200, out);
    });

    server_.Post("/api/sessions", [this](const httplib::Request& req, httplib::Response& res) { create(req, res); });

    server_.Get(R"(/api/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      if (auto s = load_or_404(req.matches[1], res)) send_json(res, 200, view(*s));
    });

    server_.Get(R"(/api/sessions/([^/]+)/graph)", [this](const httplib::Request& req, httplib::Response& res) {
      if (auto s = load_or_404(req.matches[1], res)) send_json(res, 200, graph_view(s->integrated));
    });

    server_.Get(R"(/api/sessions/([^/]+)/steps/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      auto s = load_or_404(req.matches[1], res);
      if (!s) return;
      auto k = std::stoul(req.matches[2]);
      if (k >= s->steps.size()) return send_error(res, 404, "no step " + std::to_string(k));
      send_json(res, 200, garden::to_json(s->steps[k]));
    });

    server_.Get(R"(/api/sessions/([^/]+)/export)", [this](const httplib::Request& req, httplib::Response& res) {
      auto s = load_or_404(req.matches[1], res);
      if (!s) return;
      auto format = req.has_param("format") ? req.get_param_value("format") : "graphml";
      if (format == "graphml") {
        res.set_content(to_graphml(s->integrated), "application/graphml+xml");
      } else if (format == "json") {
        send_json(res, 200, to_json(s->integrated));
      } else {
        send_error(res, 422, "unknown export format " + format);
      }
    });

    server_.Post(R"(/api/sessions/([^/]+)/step)",
                 [this](const httplib::Request& req, httplib::Response& res) { step(req, res); });

    server_.Get(R"(/api/sessions/([^/]+)/events)",
                [this](const httplib::Request& req, httplib::Response& res) { events(req, res); });
  }

  void create(const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req, res);
    if (!body) return;
    const auto& b = *body;
    if (!b.contains("seed") || !b["seed"].is_string() || text::trim_view(b["seed"].get<std::string>()).empty())
      return send_error(res, 422, "field 'seed' must be a non-empty string");
    garden::Mode mode = garden::Mode::Steered;
    std::size_t max_steps = 13;
    std::string id;
    try {
      if (b.contains("mode")) mode = garden::mode_from_string(b.at("mode").get<std::string>());
      if (b.contains("max_steps")) max_steps = b.at("max_steps").get<std::size_t>();
      id = b.contains("id") ? b.at("id").get<std::string>() : store_.next_id();
    } catch (const std::exception& e) {
      return send_error(res, 422, e.what());
    }
    if (!garden::valid_session_id(id)) return send_error(res, 422, "invalid session id " + id);
    if (max_steps < 1) return send_error(res, 422, "max_steps must be >= 1");
    std::unique_lock create_lock(create_mu_);
    if (store_.exists(id)) return send_error(res, 409, "session " + id + " already exists");
    try {
      auto s = garden::new_session(id, b["seed"].get<std::string>(), mode, max_steps, cfg_, *gateway_, &store_);
      create_lock.unlock();
      send_json(res, 201, view(s));
    } catch (const llm::GatewayError& e) {
      send_error(res, 502, e.what());
    }
  }

  void step(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    auto s = load_or_404(id, res);
    if (!s) return;
    auto body = parse_body(req, res);
    if (!body) return;
    std::optional<std::string> prompt;
    if (body->contains("prompt") && !(*body)["prompt"].is_null()) {
      if (!(*body)["prompt"].is_string() || text::trim_view((*body)["prompt"].get<std::string>()).empty())
        return send_error(res, 422, "field 'prompt' must be a non-empty string");
      prompt = (*body)["prompt"].get<std::string>();
    }
    std::unique_lock lock(mu_);
    auto rt = runtime_locked(id);
    if (rt->status == "generating") return send_error(res, 409, "a step is already running for session " + id);
    if (s->steps.size() >= s->max_steps) return send_error(res, 422, "session has reached its step limit");
    if (s->mode == garden::Mode::Steered && !prompt) return send_error(res, 422, "steered session needs a prompt");
    if (s->mode == garden::Mode::Autonomous && prompt)
      return send_error(res, 422, "autonomous session takes no prompt");
    auto handle = rt->next_handle++;
    auto step_index = s->steps.size();
    rt->status = "generating";
    rt->error.clear();
    push_event_locked(*rt, {{"handle", handle}, {"status", "generating"}, {"step_index", step_index}});
    if (rt->worker.joinable()) rt->worker.join();  // previous worker has already finished
    rt->worker = std::thread([this, id, prompt, handle, rt] {
      std::string error;
      std::size_t count = 0;
      try {
        auto session = store_.load(id);
        garden::grow_step(session, prompt, cfg_, *gateway_, &store_);
        count = session.steps.size();
      } catch (const std::exception& e) {
        error = e.what();
      }
      std::lock_guard lock(mu_);
      rt->status = error.empty() ? "idle" : "error";
      rt->error = error;
      nlohmann::json ev{{"handle", handle}, {"status", rt->status}};
      if (error.empty()) ev["step_count"] = count;
      else ev["error"] = error;
      push_event_locked(*rt, std::move(ev));
    });
    lock.unlock();
    send_json(res, 202, {{"handle", handle}, {"session", id}, {"step_index", step_index}, {"status", "generating"}});
  }

  void events(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    if (!store_.exists(id)) return send_error(res, 404, "unknown session " + id);
    std::shared_ptr<Runtime> rt;
    {
      std::lock_guard lock(mu_);
      rt = runtime_locked(id);
    }
    auto next = std::make_shared<std::size_t>(0);
    res.set_chunked_content_provider("text/event-stream", [this, rt, next](std::size_t, httplib::DataSink& sink) {
      std::unique_lock lock(mu_);
      cv_.wait_for(lock, std::chrono::milliseconds(500), [&] { return stopping_ || *next < rt->events.size(); });
      if (stopping_) {
        sink.done();
        return true;
      }
      std::string chunk;
      if (*next == rt->events.size()) chunk = ": keep-alive\n\n";
      for (; *next < rt->events.size(); ++*next)
        chunk += "event: status\ndata: " + rt->events[*next].dump() + "\n\n";
      lock.unlock();
      return sink.write(chunk.data(), chunk.size());
    });
  }

  garden::GardenStore store_;
  std::shared_ptr<llm::Gateway> gateway_;
  garden::GardenConfig cfg_;
  httplib::Server server_;
  std::mutex mu_;
  std::mutex create_mu_;
  std::condition_variable cv_;
  std::atomic<bool> stopping_{false};
  std::map<std::string, std::shared_ptr<Runtime>> runtimes_;
};

}  // namespace gpfo::service
