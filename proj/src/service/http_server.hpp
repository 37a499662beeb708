#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "service/session.hpp"

namespace dvr::service {

// HTTP+JSON front end of a SessionManager.
//   POST /sessions                {caption, target_id}
//   POST /sessions/{id}/answers   {text}
//   GET  /sessions/{id}
//   POST /sessions/{id}/found     {video_id}
//   GET  /videos/{id}/card
//   GET  /health
// Errors are {"error": message} with 400/404/409/500.
class HttpService {
 public:
  HttpService(std::shared_ptr<const Engine> engine, SessionOptions options,
              const std::filesystem::path& static_dir = {});
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  // Binds to `port` (0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port);
  // Serves until stop(); call after bind().
  void run();
  void stop();

  SessionManager& sessions() { return sessions_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  SessionManager sessions_;
};

}  // namespace dvr::service
