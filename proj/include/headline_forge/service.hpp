#pragma once

// HTTP front end over one immutable TrainedModel:
//   GET  /v1/health  GET /v1/model  POST /v1/score
// Errors are {"error": {"code": ..., "message": ...}}.

#include <memory>
#include <string>
#include <thread>

#include "headline_forge/scoring.hpp"

namespace httplib {
class Server;
}

namespace hf {

struct ServiceConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::size_t max_body_bytes = 1 << 20;
  std::size_t threads = 8;
};

class ScoringService {
 public:
  ScoringService(std::shared_ptr<const TrainedModel> model, ServiceConfig config);
  ~ScoringService();
  ScoringService(const ScoringService&) = delete;
  ScoringService& operator=(const ScoringService&) = delete;

  // Binds the socket and returns the bound port.
  int bind();
  // Serves until stop(); binds first if needed.
  void run();
  // Serves on a background thread.
  void start();
  void stop();
  int port() const { return port_; }

 private:
  std::shared_ptr<const TrainedModel> model_;
  ServiceConfig config_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace hf
