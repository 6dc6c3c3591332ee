#include "headline_forge/service.hpp"

#include <httplib.h>

#include "headline_forge/error.hpp"

namespace hf {

using nlohmann::json;

namespace {

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  res.status = status;
  res.set_content(json{{"error", {{"code", code}, {"message", message}}}}.dump(), "application/json");
}

std::string_view status_code_name(int status) {
  switch (status) {
    case 400: return "bad_request";
    case 404: return "not_found";
    case 405: return "method_not_allowed";
    case 413: return "payload_too_large";
    default: return status >= 500 ? "internal" : "http_error";
  }
}

}  // namespace

ScoringService::ScoringService(std::shared_ptr<const TrainedModel> model, ServiceConfig config)
    : model_(std::move(model)), config_(std::move(config)), server_(std::make_unique<httplib::Server>()) {
  require(model_ != nullptr, ErrorCode::model_mismatch, "service needs a model");
  model_->validate();
  require(config_.threads >= 1, ErrorCode::config, "service needs at least one worker thread");

  const std::size_t threads = config_.threads;
  server_->new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  server_->set_payload_max_length(config_.max_body_bytes);
  server_->set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    std::string message = httplib::status_message(res.status);
    send_error(res, res.status, status_code_name(res.status), message);
    return httplib::Server::HandlerResponse::Handled;
  });

  const auto trained = model_;
  server_->Get("/v1/health", [trained](const httplib::Request&, httplib::Response& res) {
    res.set_content(json{{"status", "ok"}, {"model", to_string(trained->model->architecture())}}.dump(),
                    "application/json");
  });

  server_->Get("/v1/model", [trained](const httplib::Request&, httplib::Response& res) {
    const Hyperparameters& hp = trained->model->hyperparameters();
    const FeaturePipeline& f = *trained->features;
    json body = {{"architecture", to_string(trained->model->architecture())},
                 {"version", kCheckpointVersion},
                 {"dims",
                  {{"vocab_size", hp.vocab_size},
                   {"headline_len", hp.headline_len},
                   {"body_len", hp.body_len},
                   {"doc_dim", hp.doc_dim},
                   {"topics", hp.topics},
                   {"head_input", hp.head_input(trained->model->architecture())}}},
                 {"hyperparameters", hp},
                 {"doc_vector_provider", f.provider().descriptor()},
                 {"max_candidates", kMaxCandidates}};
    res.set_content(body.dump(), "application/json");
  });

  const std::size_t limit = config_.max_body_bytes;
  server_->Post("/v1/score", [trained, limit](const httplib::Request& req, httplib::Response& res) {
    if (req.body.size() > limit) {
      send_error(res, 413, "payload_too_large", "request body exceeds " + std::to_string(limit) + " bytes");
      return;
    }
    json in = json::parse(req.body, nullptr, false);
    if (in.is_discarded() || !in.is_object()) {
      send_error(res, 400, "bad_request", "request body must be a JSON object");
      return;
    }
    if (!in.contains("body") || !in["body"].is_string()) {
      send_error(res, 400, "bad_request", "'body' must be a string");
      return;
    }
    if (!in.contains("candidates") || !in["candidates"].is_array()) {
      send_error(res, 400, "bad_request", "'candidates' must be an array of strings");
      return;
    }
    std::vector<std::string> candidates;
    for (const auto& c : in["candidates"]) {
      if (!c.is_string()) {
        send_error(res, 400, "bad_request", "'candidates' must be an array of strings");
        return;
      }
      candidates.push_back(c.get<std::string>());
    }
    try {
      ScoreResponse out = score(*trained, in["body"].get<std::string>(), candidates);
      res.set_content(to_json(out).dump(), "application/json");
    } catch (const Error& e) {
      if (e.code() == ErrorCode::request) send_error(res, 400, "bad_request", e.what());
      else send_error(res, 500, to_string(e.code()), e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  });
}

ScoringService::~ScoringService() { stop(); }

int ScoringService::bind() {
  if (port_ >= 0) return port_;
  if (config_.port == 0) {
    port_ = server_->bind_to_any_port(config_.host);
  } else {
    port_ = server_->bind_to_port(config_.host, config_.port) ? config_.port : -1;
  }
  require(port_ > 0, ErrorCode::io,
          "cannot bind " + config_.host + ":" + std::to_string(config_.port));
  return port_;
}

void ScoringService::run() {
  bind();
  server_->listen_after_bind();
}

void ScoringService::start() {
  bind();
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

void ScoringService::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace hf
