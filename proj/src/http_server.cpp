#include <httplib.h>

#include <atomic>
#include <csignal>
#include <iostream>
#include <thread>

#include "fedplane/gateway.hpp"

namespace fedplane {

namespace {

std::atomic<bool> g_signalled{false};

void on_signal(int) { g_signalled = true; }

std::string lower(std::string s) {
  for (auto& ch : s) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return s;
}

}  // namespace

void serve(Gateway& gateway, const std::function<bool()>& stop) {
  httplib::Server server;
  auto handler = [&gateway](const httplib::Request& req, httplib::Response& res) {
    ApiRequest api;
    api.method = req.method;
    api.path = req.path;
    for (const auto& [k, v] : req.params) api.query[k] = v;
    for (const auto& [k, v] : req.headers) api.headers[lower(k)] = v;
    api.body = req.body;
    auto out = gateway.handle(api);
    res.status = out.status;
    res.set_content(out.body.dump(), "application/json");
  };
  server.Get(".*", handler);
  server.Post(".*", handler);
  server.Delete(".*", handler);
  server.Put(".*", handler);

  auto [host, port] = gateway.config().listen_address();
  if (!server.bind_to_port(host, port)) {
    throw Error(ErrorCode::Precondition, "cannot listen on " + gateway.config().listen);
  }
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  std::thread listener([&server] { server.listen_after_bind(); });
  server.wait_until_ready();
  std::clog << "fedplane gateway listening on " << gateway.config().listen << " (clock "
            << to_string(gateway.config().clock) << ")\n";
  while (!g_signalled && !(stop && stop())) {
    try {
      gateway.tick();
    } catch (const std::exception& e) {
      std::clog << "sweep failed: " << e.what() << "\n";
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(200));
  }
  server.stop();
  listener.join();
}

}  // namespace fedplane
