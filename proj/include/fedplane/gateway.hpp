#pragma once

// HTTP/JSON surface over the control plane. Gateway::handle is transport
// free: the HTTP server, the offline CLI and the tests all call it directly.
//
// Every mutation is applied to a copy of the plane, appended to the event log,
// and only then made visible. Mutating responses carry "version", the log seq
// of the record that holds them.

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "fedplane/event_log.hpp"
#include "fedplane/gateway_config.hpp"

namespace fedplane {

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::map<std::string, std::string> headers;  // lower-case names
  std::string body;

  /// In-process callers (offline CLI, tests) may name the caller directly
  /// instead of presenting a bearer token.
  std::optional<UserId> principal;
};

struct ApiResponse {
  int status = 200;
  json body = json::object();
};

/// Where a project-scoped route finds the project it acts on.
enum class ProjectSource { None, PathId, BodyField, QueryField, BookingPath };

struct Route {
  std::string method;
  std::string pattern;  // segments in braces are captured, e.g. /projects/{id}
  bool mutating = false;
  bool admin_only = false;
  ProjectSource project = ProjectSource::None;
  std::string action;  // authorization action name for project-scoped routes
};

/// The full endpoint table.
const std::vector<Route>& gateway_routes();

/// Error code to HTTP status.
int http_status(ErrorCode code) noexcept;

class Gateway {
 public:
  using WallClock = std::function<Timestamp()>;

  /// Opens the data dir and recovers. If the configured plane settings differ
  /// from the recovered ones, a configure record is appended.
  explicit Gateway(GatewayConfig config, WallClock wall = {});

  ApiResponse handle(const ApiRequest& request);

  /// Current time: wall time (never behind the plane) in live mode, the
  /// plane's time in simulated mode.
  Timestamp now() const;

  /// Live mode housekeeping: logs a sweep when some booking has ended.
  /// Returns true if it did.
  bool tick();

  const GatewayConfig& config() const noexcept { return config_; }
  const RecoveryReport& recovery() const noexcept { return log_->recovery(); }

  /// Consistent copy of the current plane and log position.
  std::pair<ControlPlane, std::uint64_t> snapshot() const;
  std::string digest() const;

 private:
  struct Cached {
    std::string request_hash;
    ApiResponse response;
  };
  struct Matched {
    const Route* route = nullptr;
    std::map<std::string, std::string> params;
  };

  std::optional<UserId> authenticate(const ApiRequest& request) const;
  ApiResponse dispatch(const Matched& m, const ApiRequest& request, const UserId& user,
                       const json& body);
  ApiResponse mutate(const Matched& m, const ApiRequest& request, const UserId& user,
                     const Command& command, int success_status);
  ApiResponse read(const Matched& m, const ApiRequest& request, const UserId& user);
  void authorize_route(const ControlPlane& plane, const Matched& m, const ApiRequest& request,
                       const UserId& user, const json& body) const;
  std::string cache_key(const UserId& user, const std::string& key) const;

  GatewayConfig config_;
  WallClock wall_;
  std::unique_ptr<EventLog> log_;
  mutable std::shared_mutex state_mutex_;  // guards log_ contents and the plane
  std::mutex writer_mutex_;                // serializes mutations
  std::map<std::string, Cached> idempotency_;
};

/// Runs the HTTP server until `stop` returns true (polled once per second) or
/// the process is signalled. Blocks.
void serve(Gateway& gateway, const std::function<bool()>& stop = {});

}  // namespace fedplane
