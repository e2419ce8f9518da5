#include <httplib.h>

#include <atomic>
#include <csignal>

#include "guesslab/error.hpp"
#include "guesslab/service.hpp"
#include "guesslab/utf8.hpp"

namespace guesslab {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

std::atomic<bool> g_shutdown{false};

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_input: return 400;
    case ErrorCode::unknown_participant:
    case ErrorCode::unknown_session: return 404;
    case ErrorCode::session_not_active:
    case ErrorCode::pool_exhausted:
    case ErrorCode::repeat_guess: return 409;
    case ErrorCode::invalid_symbol: return 422;
    case ErrorCode::rate_limited: return 429;
    case ErrorCode::storage_unavailable: return 503;
    default: return 500;
  }
}

void send_json(httplib::Response& res, int status, const ordered_json& body) {
  res.status = status;
  res.set_content(body.dump(-1, ' ', false, json::error_handler_t::replace), "application/json; charset=utf-8");
}

void send_error(httplib::Response& res, ErrorCode code, const std::string& message) {
  ordered_json body;
  body["code"] = to_string(code);
  body["message"] = message;
  send_json(res, http_status(code), body);
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw Error(ErrorCode::invalid_input, "request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::invalid_input, std::string("request body is not JSON: ") + e.what());
  }
}

std::string required_string(const json& body, const char* key) {
  auto it = body.find(key);
  if (it == body.end() || !it->is_string()) {
    throw Error(ErrorCode::invalid_input, std::string("field '") + key + "' (string) is required");
  }
  return it->get<std::string>();
}

template <typename Fn>
httplib::Server::Handler guarded(Fn fn) {
  return [fn](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const RateLimitedError& e) {
      const auto ms = e.retry_after().count();
      res.set_header("Retry-After", std::to_string((ms + 999) / 1000));
      ordered_json body;
      body["code"] = to_string(e.code());
      body["message"] = e.what();
      body["retry_after_ms"] = ms;
      send_json(res, 429, body);
    } catch (const Error& e) {
      send_error(res, e.code(), e.what());
    } catch (const std::exception& e) {
      ordered_json body;
      body["code"] = "Internal";
      body["message"] = e.what();
      send_json(res, 500, body);
    }
  };
}

ordered_json outcome_json(const GuessOutcome& o, const SessionView& v) {
  ordered_json j;
  j["correct"] = o.correct;
  if (o.revealed_symbol) j["revealed_symbol"] = utf8::encode(*o.revealed_symbol);
  j["position"] = o.position;
  j["attempts_so_far"] = o.attempts_so_far;
  j["budget_remaining"] = o.budget_remaining;
  j["status"] = to_string(o.status);
  j["session"] = to_json(v);
  return j;
}

}  // namespace

void install_routes(httplib::Server& server, ExperimentService& service) {
  server.Post("/api/participants", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    std::optional<std::string> name;
    if (auto it = body.find("display_name"); it != body.end() && !it->is_null()) {
      if (!it->is_string()) throw Error(ErrorCode::invalid_input, "display_name must be a string");
      name = it->get<std::string>();
    }
    const auto p = service.register_participant(std::move(name));
    ordered_json out;
    out["participant_id"] = p.id;
    out["display_name"] = p.display_name ? json(*p.display_name) : json(nullptr);
    send_json(res, 201, out);
  }));

  server.Post("/api/sessions", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    const auto body = parse_body(req);
    const auto v = service.start_session(required_string(body, "participant_id"));
    auto out = to_json(v);
    out["prefix"] = v.revealed_text;
    out["min_attempt_interval_ms"] = service.session_config().min_attempt_interval.count();
    out["alphabet"] = utf8::encode(service.session_config().alphabet->symbols());
    send_json(res, 201, out);
  }));

  server.Post(R"(/api/sessions/([^/]+)/guesses)",
              guarded([&service](const httplib::Request& req, httplib::Response& res) {
                const std::string id = req.matches[1];
                const auto body = parse_body(req);
                const auto symbol = utf8::decode(required_string(body, "symbol"));
                if (symbol.size() != 1) {
                  // still 404 for unknown sessions before judging the symbol
                  service.view(id);
                  throw Error(ErrorCode::invalid_symbol, "symbol must be exactly one character");
                }
                const auto outcome = service.guess(id, symbol.front());
                send_json(res, 200, outcome_json(outcome, service.view(id)));
              }));

  server.Post(R"(/api/sessions/([^/]+)/abandon)",
              guarded([&service](const httplib::Request& req, httplib::Response& res) {
                send_json(res, 200, to_json(service.abandon(req.matches[1])));
              }));

  server.Get(R"(/api/sessions/([^/]+))", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    send_json(res, 200, to_json(service.view(req.matches[1])));
  }));

  server.Get("/api/stats", guarded([&service](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, to_json(service.stats()));
  }));

  server.Get("/api/export", guarded([&service](const httplib::Request& req, httplib::Response& res) {
    const auto format = req.has_param("format") ? req.get_param_value("format") : std::string("jsonl");
    if (format != "jsonl") throw Error(ErrorCode::invalid_input, "unsupported export format '" + format + "'");
    res.status = 200;
    res.set_content(service.export_jsonl(), "application/x-ndjson; charset=utf-8");
  }));

  server.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return;
    ordered_json body;
    body["code"] = res.status == 404 ? "NotFound" : "HttpError";
    body["message"] = httplib::status_message(res.status);
    res.set_content(body.dump(), "application/json; charset=utf-8");
  });
}

void request_shutdown() noexcept { g_shutdown.store(true); }

HttpService::HttpService(ExperimentService& service, const std::string& host, int port,
                         std::chrono::milliseconds sweep_interval)
    : server_(std::make_unique<httplib::Server>()), host_(host) {
  install_routes(*server_, service);
  port_ = port == 0 ? server_->bind_to_any_port(host_) : (server_->bind_to_port(host_, port) ? port : -1);
  if (port_ < 0) {
    throw Error(ErrorCode::invalid_input, "cannot listen on " + host_ + ":" + std::to_string(port));
  }
  listener_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  sweeper_ = std::thread([this, &service, sweep_interval] {
    std::unique_lock lock(stop_mutex_);
    while (!stopping_) {
      stop_cv_.wait_for(lock, sweep_interval, [this] { return stopping_; });
      if (stopping_) break;
      lock.unlock();
      try {
        service.sweep_idle();
      } catch (const Error&) {
        // storage outage: retried on the next tick
      }
      lock.lock();
    }
  });
}

HttpService::~HttpService() {
  stop();
  if (listener_.joinable()) listener_.join();
  if (sweeper_.joinable()) sweeper_.join();
}

std::string HttpService::base_url() const { return "http://" + host_ + ":" + std::to_string(port_); }

void HttpService::wait() {
  std::unique_lock lock(stop_mutex_);
  while (!stopping_ && !g_shutdown.load()) {
    stop_cv_.wait_for(lock, std::chrono::milliseconds(200));
  }
}

void HttpService::stop() {
  {
    std::lock_guard lock(stop_mutex_);
    stopping_ = true;
  }
  stop_cv_.notify_all();
  server_->stop();
}

}  // namespace guesslab
