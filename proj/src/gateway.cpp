#include "fedplane/gateway.hpp"

#include <chrono>
#include <sstream>

#include "fedplane/digest.hpp"

namespace fedplane {

namespace {

Timestamp system_seconds() {
  using namespace std::chrono;
  return duration_cast<seconds>(system_clock::now().time_since_epoch()).count();
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string item;
  std::istringstream in(path);
  while (std::getline(in, item, '/')) {
    if (!item.empty()) parts.push_back(item);
  }
  return parts;
}

ApiResponse error_response(int status, std::string_view code, const std::string& message) {
  return {status, json{{"error", {{"code", code}, {"message", message}}}}};
}

ApiResponse error_response(const Error& e) {
  auto r = error_response(http_status(e.code()), to_string(e.code()), e.what());
  if (const auto* c = dynamic_cast<const BookingConflict*>(&e)) {
    r.body["error"]["conflict"] = json{{"start", c->conflict_start()},
                                       {"end", c->conflict_end()},
                                       {"peak", c->peak()},
                                       {"capacity", c->capacity()}};
  }
  return r;
}

const json& body_or_empty(const json& body) {
  static const json kEmpty = json::object();
  return body.is_object() ? body : kEmpty;
}

}  // namespace

const std::vector<Route>& gateway_routes() {
  using PS = ProjectSource;
  static const std::vector<Route> kRoutes = {
      {"GET", "/health", false, false, PS::None, ""},
      {"GET", "/projects", false, false, PS::None, ""},
      {"POST", "/projects", true, false, PS::None, ""},
      {"GET", "/projects/{id}", false, false, PS::PathId, "read-project"},
      {"DELETE", "/projects/{id}", true, true, PS::None, ""},
      {"POST", "/projects/{id}/quota", true, false, PS::PathId, "change-quota"},
      {"GET", "/clusters", false, false, PS::None, ""},
      {"POST", "/clusters", true, true, PS::None, ""},
      {"POST", "/clusters/{id}/heartbeat", true, true, PS::None, ""},
      {"POST", "/clusters/{id}/poll", true, true, PS::None, ""},
      {"GET", "/clusters/{id}/drift", false, false, PS::None, ""},
      {"GET", "/federation/status", false, false, PS::None, ""},
      {"POST", "/bookings", true, false, PS::BodyField, "book"},
      {"GET", "/bookings", false, false, PS::QueryField, "list-bookings"},
      {"DELETE", "/bookings/{id}", true, false, PS::BookingPath, "cancel-booking"},
      {"POST", "/workspaces", true, false, PS::BodyField, "spawn-workspace"},
      {"GET", "/workspaces", false, false, PS::QueryField, "list-workspaces"},
      {"POST", "/releases", true, true, PS::None, ""},
      {"GET", "/releases", false, false, PS::None, ""},
      {"POST", "/admin/sweep", true, true, PS::None, ""},
      {"POST", "/admin/clock", true, true, PS::None, ""},
  };
  return kRoutes;
}

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Validation:
    case ErrorCode::Precondition: return 400;
    case ErrorCode::Unauthorized: return 403;
    case ErrorCode::NotFound: return 404;
    case ErrorCode::Conflict:
    case ErrorCode::StaleConflict:
    case ErrorCode::InvalidTransition: return 409;
    case ErrorCode::Corruption: return 500;
  }
  return 500;
}

Gateway::Gateway(GatewayConfig config, WallClock wall)
    : config_(std::move(config)), wall_(wall ? std::move(wall) : WallClock(system_seconds)) {
  log_ = std::make_unique<EventLog>(config_.data_dir, config_.snapshot_every);
  if (!(log_->plane().config() == config_.plane)) {
    Command c{cmd::kConfigure, now(), kSystemActor, json(config_.plane)};
    ControlPlane next = log_->plane();
    next.apply(c);
    EventRecord r;
    r.at = c.at;
    r.actor = c.actor;
    r.kind = c.kind;
    r.payload = c.payload;
    r.result_digest = next.digest();
    log_->append(std::move(r), std::move(next));
  }
  // Responses to keyed requests survive restarts through the log.
  for (const auto& r : log_->records()) {
    if (r.idempotency_key) {
      idempotency_[cache_key(r.actor, *r.idempotency_key)] = {r.request_hash,
                                                             {r.status, r.response}};
    }
  }
}

Timestamp Gateway::now() const {
  Timestamp plane_now;
  {
    std::shared_lock lock(state_mutex_);
    plane_now = log_->plane().now();
  }
  if (config_.clock == ClockMode::Simulated) return plane_now;
  return std::max(wall_(), plane_now);
}

std::pair<ControlPlane, std::uint64_t> Gateway::snapshot() const {
  std::shared_lock lock(state_mutex_);
  return {log_->plane(), log_->last_seq()};
}

std::string Gateway::digest() const {
  std::shared_lock lock(state_mutex_);
  return log_->plane().digest();
}

std::string Gateway::cache_key(const UserId& user, const std::string& key) const {
  return user.str() + '\n' + key;
}

std::optional<UserId> Gateway::authenticate(const ApiRequest& request) const {
  if (request.principal) return request.principal;
  auto it = request.headers.find("authorization");
  if (it == request.headers.end()) return std::nullopt;
  const std::string prefix = "Bearer ";
  if (!it->second.starts_with(prefix)) return std::nullopt;
  auto token = config_.tokens.find(it->second.substr(prefix.size()));
  if (token == config_.tokens.end()) return std::nullopt;
  return token->second;
}

bool Gateway::tick() {
  if (config_.clock != ClockMode::Live) return false;
  auto t = now();
  {
    std::shared_lock lock(state_mutex_);
    bool due = false;
    for (const auto& [_, cal] : log_->plane().bookings().calendars()) {
      for (const auto& [_, b] : cal.entries()) due |= b.interval.end <= t;
    }
    if (!due) return false;
  }
  ApiRequest req{"POST", "/admin/sweep", {}, {}, "", kSystemActor};
  return handle(req).status == 200;
}

ApiResponse Gateway::handle(const ApiRequest& request) {
  // Route match first so unknown paths are 404 regardless of credentials.
  Matched m;
  bool path_known = false;
  auto parts = split_path(request.path);
  for (const auto& route : gateway_routes()) {
    auto pattern = split_path(route.pattern);
    if (pattern.size() != parts.size()) continue;
    std::map<std::string, std::string> params;
    bool ok = true;
    for (std::size_t i = 0; i < parts.size() && ok; ++i) {
      if (pattern[i].front() == '{') {
        params[pattern[i].substr(1, pattern[i].size() - 2)] = parts[i];
      } else {
        ok = pattern[i] == parts[i];
      }
    }
    if (!ok) continue;
    path_known = true;
    if (route.method == request.method) {
      m = {&route, std::move(params)};
      break;
    }
  }
  if (m.route == nullptr) {
    return path_known ? error_response(405, "method-not-allowed", "method not allowed")
                      : error_response(404, "not-found", "no such endpoint");
  }

  auto user = authenticate(request);
  if (!user) return error_response(401, "unauthenticated", "missing or unknown bearer token");

  json body = json::object();
  if (m.route->mutating && !request.body.empty()) {
    try {
      body = json::parse(request.body);
    } catch (const json::exception& e) {
      return error_response(400, "validation", std::string("malformed JSON body: ") + e.what());
    }
    if (!body.is_object()) return error_response(400, "validation", "body must be a JSON object");
  }

  try {
    return dispatch(m, request, *user, body);
  } catch (const Error& e) {
    return error_response(e);
  }
}

void Gateway::authorize_route(const ControlPlane& plane, const Matched& m,
                              const ApiRequest& request, const UserId& user,
                              const json& body) const {
  const auto& route = *m.route;
  if (route.admin_only && !plane.is_admin(user)) {
    throw Error(ErrorCode::Unauthorized, "admin only");
  }
  if (route.project == ProjectSource::None || plane.is_admin(user)) return;

  std::optional<ProjectId> project;
  switch (route.project) {
    case ProjectSource::PathId:
      project = make_id<ProjectId>(m.params.at("id"));
      break;
    case ProjectSource::BodyField:
      project = required<ProjectId>(body, "project");
      break;
    case ProjectSource::QueryField:
      if (auto it = request.query.find("project"); it != request.query.end()) {
        project = make_id<ProjectId>(it->second);
      }
      break;
    case ProjectSource::BookingPath:
      project = plane.bookings().booking(make_id<BookingId>(m.params.at("id"))).project;
      break;
    case ProjectSource::None:
      break;
  }
  if (!project) return;
  auto verdict = authorize(user, *project, route.action, plane.federation().projects());
  if (!verdict.allowed()) {
    throw Error(ErrorCode::Unauthorized, route.action + " on " + project->str() + ": " +
                                             verdict.reason);
  }
}

ApiResponse Gateway::dispatch(const Matched& m, const ApiRequest& request, const UserId& user,
                              const json& body) {
  {
    auto [plane, _] = snapshot();
    authorize_route(plane, m, request, user, body);
  }
  if (!m.route->mutating) return read(m, request, user);

  const auto& pattern = m.route->pattern;
  const auto at = now();
  auto id = [&] { return json(m.params.at("id")); };
  Command c{"", at, user, body_or_empty(body)};
  int success = 200;

  if (pattern == "/projects") {
    c.kind = cmd::kRegisterProject;
    success = 201;
  } else if (pattern == "/projects/{id}") {
    c.kind = cmd::kDeleteProject;
    c.payload = json{{"project", id()}};
  } else if (pattern == "/projects/{id}/quota") {
    c.kind = cmd::kChangeQuota;
    c.payload = json{{"project", id()}, {"request", body.value("request", json::object())}};
  } else if (pattern == "/clusters") {
    c.kind = cmd::kAddCluster;
    success = 201;
  } else if (pattern == "/clusters/{id}/heartbeat") {
    c.kind = cmd::kHeartbeat;
    c.payload["cluster"] = id();
    if (!c.payload.contains("sent_at")) c.payload["sent_at"] = at;
  } else if (pattern == "/clusters/{id}/poll") {
    c.kind = cmd::kPoll;
    c.payload = json{{"cluster", id()}};
  } else if (pattern == "/bookings") {
    c.kind = cmd::kCreateBooking;
    success = 201;
  } else if (pattern == "/bookings/{id}") {
    c.kind = cmd::kCancelBooking;
    c.payload = json{{"booking", id()}};
  } else if (pattern == "/workspaces") {
    c.kind = cmd::kSpawnWorkspace;
    success = 201;
  } else if (pattern == "/releases") {
    c.kind = cmd::kPublishRelease;
    success = 201;
  } else if (pattern == "/admin/sweep") {
    c.kind = cmd::kSweep;
    c.payload = json::object();
  } else if (pattern == "/admin/clock") {
    if (config_.clock != ClockMode::Simulated) {
      throw Error(ErrorCode::Precondition, "the clock only moves by hand in simulated mode");
    }
    c.kind = cmd::kSweep;
    c.at = required<Timestamp>(body, "to");
    c.payload = json::object();
  } else {
    throw Error(ErrorCode::NotFound, "no handler for " + pattern);
  }
  return mutate(m, request, user, c, success);
}

ApiResponse Gateway::mutate(const Matched& m, const ApiRequest& request, const UserId& user,
                            const Command& command, int success_status) {
  std::lock_guard writer(writer_mutex_);

  std::optional<std::string> key;
  std::string request_hash;
  if (auto it = request.headers.find("idempotency-key"); it != request.headers.end()) {
    key = it->second;
    request_hash = sha256_hex(request.method + ' ' + request.path + '\n' + request.body);
    if (auto hit = idempotency_.find(cache_key(user, *key)); hit != idempotency_.end()) {
      if (hit->second.request_hash != request_hash) {
        return error_response(409, "conflict",
                              "idempotency key was already used for a different request");
      }
      return hit->second.response;
    }
  }

  ControlPlane next = [&] {
    std::shared_lock lock(state_mutex_);
    return log_->plane();
  }();
  ApiResponse response;
  json result;
  try {
    // Checked again against the exact state this mutation builds on.
    authorize_route(next, m, request, user, command.payload);
    if (command.at < next.now()) {
      throw Error(ErrorCode::Validation, "time cannot move backwards to " +
                                             std::to_string(command.at));
    }
    result = next.apply(command);
  } catch (const Error& e) {
    response = error_response(e);
    // Rejections change nothing, so they are remembered in memory only.
    if (key) idempotency_[cache_key(user, *key)] = {request_hash, response};
    return response;
  }

  std::unique_lock lock(state_mutex_);
  result["version"] = log_->last_seq() + 1;
  response = {success_status, result};
  EventRecord r;
  r.at = command.at;
  r.actor = command.actor;
  r.kind = command.kind;
  r.payload = command.payload;
  r.result_digest = next.digest();
  if (key) {
    r.idempotency_key = key;
    r.request_hash = request_hash;
    r.status = response.status;
    r.response = response.body;
  }
  log_->append(std::move(r), std::move(next));
  lock.unlock();
  if (key) idempotency_[cache_key(user, *key)] = {request_hash, response};
  return response;
}

ApiResponse Gateway::read(const Matched& m, const ApiRequest& request, const UserId& user) {
  auto [plane, version] = snapshot();
  const auto t = config_.clock == ClockMode::Simulated ? plane.now()
                                                       : std::max(wall_(), plane.now());
  const auto& pattern = m.route->pattern;
  const bool admin = plane.is_admin(user);
  auto query = [&](const char* k) -> std::optional<std::string> {
    auto it = request.query.find(k);
    if (it == request.query.end() || it->second.empty()) return std::nullopt;
    return it->second;
  };
  json out;

  if (pattern == "/health") {
    out = json{{"now", t},         {"digest", plane.digest()}, {"clock", to_string(config_.clock)},
               {"user", user},     {"admin", admin},           {"log_seq", version}};
  } else if (pattern == "/projects") {
    json list = json::array();
    for (const auto& [_, p] : plane.federation().projects()) {
      if (admin || p.has_member(user)) list.push_back(p);
    }
    out = json{{"projects", list}};
  } else if (pattern == "/projects/{id}") {
    auto id = make_id<ProjectId>(m.params.at("id"));
    out = json{{"project", plane.federation().project(id)}};
    const auto& spaces = plane.federation().namespaces();
    auto ns = spaces.find(id);
    out["namespace"] = ns == spaces.end() ? json(nullptr) : json(ns->second);
  } else if (pattern == "/clusters") {
    json list = json::array();
    for (const auto& [id, c] : plane.federation().clusters()) {
      json entry = c;
      entry["availability"] = to_string(plane.availability(id, t));
      entry["committed"] = plane.federation().committed(id);
      list.push_back(entry);
    }
    out = json{{"clusters", list}};
  } else if (pattern == "/clusters/{id}/drift") {
    const auto& cluster = plane.federation().cluster(make_id<ClusterId>(m.params.at("id")));
    json drift = json::object();
    for (const auto& [app, d] : cluster_drift(plane.registry(), cluster)) drift[app] = d;
    out = json{{"cluster", cluster.id}, {"drift", drift}};
  } else if (pattern == "/federation/status") {
    out = json(plane.status(t));
  } else if (pattern == "/bookings") {
    auto project = query("project");
    auto who = query("user");
    if (!project && !admin) {
      if (who && *who != user.str()) {
        throw Error(ErrorCode::Unauthorized, "only admins list other users' bookings");
      }
      who = user.str();
    }
    json list = json::array();
    for (const auto& b : plane.bookings().all_bookings()) {
      if (project && b.project.str() != *project) continue;
      if (who && b.user.str() != *who) continue;
      list.push_back(b);
    }
    out = json{{"bookings", list}};
  } else if (pattern == "/workspaces") {
    auto project = query("project");
    if (!project) throw Error(ErrorCode::Validation, "query parameter 'project' is required");
    json list = json::array();
    for (const auto& [_, pod] : plane.bookings().pods()) {
      if (pod.project.str() == *project) list.push_back(pod);
    }
    out = json{{"workspaces", list}};
  } else if (pattern == "/releases") {
    json apps = json::object();
    for (const auto& [app, list] : plane.registry().apps()) apps[app] = list;
    out = json{{"releases", apps}};
  } else {
    throw Error(ErrorCode::NotFound, "no handler for " + pattern);
  }
  return {200, out};
}

}  // namespace fedplane
