#include "service/http_server.hpp"

#include <httplib.h>

#include "common/error.hpp"

namespace dvr::service {

using nlohmann::json;

struct HttpService::Impl {
  httplib::Server server;
};

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  try {
    auto j = json::parse(req.body);
    if (!j.is_object()) throw InvalidArgument("request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw InvalidArgument(std::string("malformed JSON body: ") + e.what());
  }
}

std::string field(const json& body, const char* name) {
  auto it = body.find(name);
  if (it == body.end() || !it->is_string()) throw InvalidArgument(std::string("missing string field '") + name + "'");
  return it->get<std::string>();
}

template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      reply(res, 200, f(req));
    } catch (const NotFound& e) {
      reply(res, 404, {{"error", e.what()}});
    } catch (const Conflict& e) {
      reply(res, 409, {{"error", e.what()}});
    } catch (const InvalidArgument& e) {
      reply(res, 400, {{"error", e.what()}});
    } catch (const std::exception& e) {
      reply(res, 500, {{"error", e.what()}});
    }
  };
}

}  // namespace

HttpService::HttpService(std::shared_ptr<const Engine> engine, SessionOptions options,
                         const std::filesystem::path& static_dir)
    : impl_(std::make_unique<Impl>()), sessions_(std::move(engine), options) {
  auto& s = impl_->server;
  s.Post("/sessions", guarded([this](const httplib::Request& req) {
           const auto body = parse_body(req);
           return sessions_.start(field(body, "caption"), field(body, "target_id"));
         }));
  s.Post(R"(/sessions/([^/]+)/answers)", guarded([this](const httplib::Request& req) {
           return sessions_.answer(req.matches[1], field(parse_body(req), "text"));
         }));
  s.Post(R"(/sessions/([^/]+)/found)", guarded([this](const httplib::Request& req) {
           return sessions_.found(req.matches[1], field(parse_body(req), "video_id"));
         }));
  s.Get(R"(/sessions/([^/]+))", guarded([this](const httplib::Request& req) { return sessions_.get(req.matches[1]); }));
  s.Get(R"(/videos/([^/]+)/card)",
        guarded([this](const httplib::Request& req) { return sessions_.card(req.matches[1]); }));
  s.Get("/health", guarded([this](const httplib::Request&) { return sessions_.health(); }));
  if (!static_dir.empty() && !s.set_mount_point("/", static_dir.string())) {
    throw IoError("cannot serve static files from '" + static_dir.string() + "'");
  }
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
  auto& s = impl_->server;
  if (port == 0) {
    const int p = s.bind_to_any_port(host);
    if (p < 0) throw IoError("cannot bind " + host);
    return p;
  }
  if (!s.bind_to_port(host, port)) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpService::run() { impl_->server.listen_after_bind(); }

void HttpService::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace dvr::service
