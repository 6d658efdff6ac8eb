#include "fedplane/control_plane.hpp"

#include <charconv>
#include <cstdio>
#include <sstream>

#include "fedplane/digest.hpp"

namespace fedplane {

namespace {

std::string generated_project_id(std::uint64_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "prj-%06llu", static_cast<unsigned long long>(n));
  return buf;
}

const char* to_string(SyncMode m) { return m == SyncMode::Auto ? "auto" : "scheduled"; }

SyncMode sync_mode_from_string(const std::string& s) {
  if (s == "auto") return SyncMode::Auto;
  if (s == "scheduled") return SyncMode::Scheduled;
  throw Error(ErrorCode::Validation, "unknown sync mode '" + s + "'");
}

std::int64_t positive_count(const json& payload, const char* key) {
  auto v = required<std::int64_t>(payload, key);
  if (v < 1) throw Error(ErrorCode::Validation, std::string(key) + " must be at least 1");
  return v;
}

}  // namespace

void PlaneConfig::validate() const {
  monitor.validate();
  sync.validate();
  if (limits.max_duration <= 0) throw Error(ErrorCode::Validation, "max booking duration must be positive");
  if (limits.max_future_per_user < 1) {
    throw Error(ErrorCode::Validation, "max future bookings per user must be at least 1");
  }
  if (utilization_window <= 0) throw Error(ErrorCode::Validation, "utilization window must be positive");
}

bool operator==(const PlaneConfig& a, const PlaneConfig& b) {
  json ja = a;
  json jb = b;
  return ja == jb;
}

void to_json(json& j, const PlaneConfig& v) {
  j = json{{"heartbeat_interval", v.monitor.interval},
           {"miss_threshold", v.monitor.miss_threshold},
           {"sync_mode", to_string(v.sync.mode)},
           {"sync_period", v.sync.period},
           {"poll_interval", v.sync.poll_interval},
           {"max_booking_duration", v.limits.max_duration},
           {"max_future_bookings", v.limits.max_future_per_user},
           {"admins", v.admins},
           {"utilization_window", v.utilization_window}};
}

void from_json(const json& j, PlaneConfig& v) {
  PlaneConfig d;
  v.monitor.interval = optional_field<Timestamp>(j, "heartbeat_interval", d.monitor.interval);
  v.monitor.miss_threshold =
      optional_field<std::int64_t>(j, "miss_threshold", d.monitor.miss_threshold);
  v.sync.mode = sync_mode_from_string(optional_field<std::string>(j, "sync_mode", "auto"));
  v.sync.period = optional_field<Timestamp>(j, "sync_period", d.sync.period);
  v.sync.poll_interval = optional_field<Timestamp>(j, "poll_interval", d.sync.poll_interval);
  v.limits.max_duration =
      optional_field<Timestamp>(j, "max_booking_duration", d.limits.max_duration);
  v.limits.max_future_per_user =
      optional_field<std::size_t>(j, "max_future_bookings", d.limits.max_future_per_user);
  v.admins = optional_field<std::set<UserId>>(j, "admins", {});
  v.utilization_window =
      optional_field<Timestamp>(j, "utilization_window", d.utilization_window);
}

PlaneConfig plane_config_from_strings(const std::map<std::string, std::string>& settings,
                                      const PlaneConfig& base) {
  json j = base;
  for (const auto& [key, value] : settings) {
    if (!j.contains(key)) throw Error(ErrorCode::Validation, "unknown setting '" + key + "'");
    if (key == "admins") {
      json admins = json::array();
      std::string item;
      std::istringstream in(value);
      while (std::getline(in, item, ',')) {
        if (!item.empty()) admins.push_back(item);
      }
      j[key] = admins;
    } else if (key == "sync_mode") {
      j[key] = value;
    } else {
      std::int64_t n = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), n);
      if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw Error(ErrorCode::Validation, "setting '" + key + "' expects an integer");
      }
      j[key] = n;
    }
  }
  auto config = j.get<PlaneConfig>();
  config.validate();
  return config;
}

void to_json(json& j, const Command& v) {
  j = json{{"kind", v.kind}, {"at", v.at}, {"actor", v.actor}, {"payload", v.payload}};
}

void from_json(const json& j, Command& v) {
  v.kind = required<std::string>(j, "kind");
  v.at = required<Timestamp>(j, "at");
  v.actor = required<UserId>(j, "actor");
  v.payload = j.contains("payload") ? j.at("payload") : json::object();
}

// ---------------------------------------------------------------------------

ControlPlane::ControlPlane(PlaneConfig config) : config_(std::move(config)) {
  config_.validate();
  bookings_.set_limits(config_.limits);
}

bool ControlPlane::is_admin(const UserId& user) const {
  return user == kSystemActor || config_.admins.contains(user);
}

void ControlPlane::require_admin(const UserId& actor) const {
  if (!is_admin(actor)) {
    throw Error(ErrorCode::Unauthorized, "federation admin required");
  }
}

void ControlPlane::require_member(const UserId& user, const ProjectId& project,
                                  std::string_view action) const {
  auto d = authorize(user, project, action, federation_.projects());
  if (!d.allowed()) throw Error(ErrorCode::Unauthorized, d.reason);
}

Availability ControlPlane::availability(const ClusterId& cluster, Timestamp now) const {
  return fedplane::availability(cluster, now, config_.monitor, monitor_);
}

FederationStore::AvailabilityFn ControlPlane::availability_at(Timestamp now) const {
  return [this, now](const ClusterId& id) {
    return availability(id, now) == Availability::Available;
  };
}

FederationStatus ControlPlane::status(Timestamp now) const {
  return federation_snapshot(now, federation_, bookings_, monitor_, config_.monitor,
                             config_.utilization_window);
}

HeartbeatMetrics ControlPlane::observed_metrics(const ClusterId& cluster) const {
  HeartbeatMetrics m;
  m.gpus_in_use = bookings_.granted_gpus(cluster);
  for (const auto& [_, pod] : bookings_.pods()) {
    if (pod.live() && pod.cluster == cluster) ++m.pods_running;
  }
  m.committed = federation_.committed(cluster);
  return m;
}

json ControlPlane::apply(const Command& c) {
  if (c.at < now_) {
    throw Error(ErrorCode::Precondition, "command at " + std::to_string(c.at) +
                                             " precedes plane time " + std::to_string(now_));
  }
  if (c.actor.empty()) throw Error(ErrorCode::Validation, "command has no actor");
  now_ = c.at;
  json swept = sweep_at(now_);

  json result;
  const auto& k = c.kind;
  if (k == cmd::kSweep) {
    require_admin(c.actor);
    result = json::object();
  } else if (k == cmd::kConfigure) {
    result = configure(c);
  } else if (k == cmd::kAddCluster) {
    result = add_cluster(c);
  } else if (k == cmd::kHeartbeat) {
    result = heartbeat(c);
  } else if (k == cmd::kRegisterProject) {
    result = register_project(c);
  } else if (k == cmd::kChangeQuota) {
    result = change_quota(c);
  } else if (k == cmd::kDeleteProject) {
    result = delete_project(c);
  } else if (k == cmd::kCreateBooking) {
    result = create_booking(c);
  } else if (k == cmd::kCancelBooking) {
    result = cancel_booking(c);
  } else if (k == cmd::kSpawnWorkspace) {
    result = spawn_workspace(c);
  } else if (k == cmd::kPublishRelease) {
    result = publish_release(c);
  } else if (k == cmd::kPoll) {
    result = poll_cluster(c);
  } else {
    throw Error(ErrorCode::Validation, "unknown command '" + k + "'");
  }
  if (!swept.is_null()) result["swept"] = std::move(swept);
  ++applied_;
  return result;
}

json ControlPlane::sweep_at(Timestamp now) {
  std::vector<BookingId> due;
  for (const auto& [_, cal] : bookings_.calendars()) {
    for (const auto& [id, b] : cal.entries()) {
      if (b.interval.end <= now) due.push_back(id);
    }
  }
  if (due.empty()) return nullptr;
  auto actions = bookings_.sweep(now);
  return json{{"expired", due}, {"respawns", actions}};
}

json ControlPlane::configure(const Command& c) {
  require_admin(c.actor);
  auto next = c.payload.get<PlaneConfig>();
  next.validate();
  config_ = next;
  bookings_.set_limits(config_.limits);
  return json{{"config", config_}};
}

json ControlPlane::add_cluster(const Command& c) {
  require_admin(c.actor);
  auto cluster = c.payload.get<Cluster>();
  cluster.last_heartbeat.reset();
  auto id = cluster.id;
  auto bookable = cluster.bookable_gpus;
  federation_.add_cluster(cluster);
  bookings_.add_calendar(id, bookable);
  monitor_.register_cluster(id);
  return json{{"cluster", federation_.cluster(id)}};
}

json ControlPlane::heartbeat(const Command& c) {
  require_admin(c.actor);
  auto id = required<ClusterId>(c.payload, "cluster");
  Heartbeat hb;
  hb.cluster = id;
  hb.at = optional_field<Timestamp>(c.payload, "sent_at", c.at);
  hb.metrics = optional_field<HeartbeatMetrics>(c.payload, "metrics", {});
  if (hb.at > c.at) throw Error(ErrorCode::Validation, "heartbeat sent in the future");
  federation_.cluster(id);  // NotFound before touching the monitor

  auto outcome = monitor_.record_heartbeat(hb);
  json result{{"cluster", id}, {"sent_at", hb.at}, {"accepted", outcome.accepted}};
  if (!outcome.accepted) {
    result["reason"] = outcome.reason;
    return result;
  }
  federation_.cluster(id).last_heartbeat = hb.at;
  if (availability(id, now_) == Availability::Available) {
    auto rec = reconcile_namespaces(id);
    if (!rec.is_null()) result["reconciled"] = std::move(rec);
  }
  return result;
}

json ControlPlane::reconcile_namespaces(const ClusterId& cluster) {
  auto& intents = federation_.intents();
  json projects = json::array();
  json installs = json::array();
  auto& target = federation_.cluster(cluster);
  for (auto it = intents.begin(); it != intents.end();) {
    if (it->cluster != cluster) {
      ++it;
      continue;
    }
    auto& ns = federation_.namespaces().at(it->project);
    for (auto& [slot, app] : ns.apps) {
      if (auto inst = target.installed.find(app.name); inst != target.installed.end()) {
        app.version = inst->second;
      } else if (auto latest = registry_.latest(app.name)) {
        target.installed[app.name] = *latest;
        installs.push_back(UpgradeAction{cluster, app.name, std::nullopt, *latest, now_});
        app.version = *latest;
      } else {
        app.version = SemVer{};
      }
      app.state = AppState::Ready;
    }
    projects.push_back(it->project);
    it = intents.erase(it);
  }
  if (projects.empty()) return nullptr;
  json out{{"projects", projects}};
  if (!installs.empty()) out["installs"] = installs;
  return out;
}

void ControlPlane::sync_namespace_versions(const ClusterId& cluster) {
  const auto& installed = federation_.cluster(cluster).installed;
  for (auto& [_, ns] : federation_.namespaces()) {
    if (ns.cluster != cluster) continue;
    for (auto& [__, app] : ns.apps) {
      if (app.state != AppState::Ready) continue;
      if (auto it = installed.find(app.name); it != installed.end()) app.version = it->second;
    }
  }
}

json ControlPlane::register_project(const Command& c) {
  Project p;
  if (c.payload.contains("id")) {
    p.id = required<ProjectId>(c.payload, "id");
  } else {
    do {
      p.id = ProjectId(generated_project_id(next_project_++));
    } while (federation_.projects().contains(p.id) ||
             federation_.retired_projects().contains(p.id));
  }
  p.name = required<std::string>(c.payload, "name");
  p.members = required<std::set<UserId>>(c.payload, "members");
  p.request = optional_field<ResourceVector>(c.payload, "request", {});
  if (!is_admin(c.actor) && !p.has_member(c.actor)) {
    throw Error(ErrorCode::Unauthorized, "requester must be a member of the project");
  }
  std::optional<ClusterId> pin;
  if (c.payload.contains("cluster") && !c.payload.at("cluster").is_null()) {
    pin = required<ClusterId>(c.payload, "cluster");
    federation_.cluster(*pin);
  }

  auto id = p.id;
  federation_.add_project(std::move(p));
  auto decision = federation_.score(id, availability_at(now_), pin);
  if (decision.placed()) {
    federation_.commit_placement(decision);
  } else {
    federation_.reject(decision);
  }
  return json{{"project", federation_.project(id)}, {"decision", decision}};
}

json ControlPlane::change_quota(const Command& c) {
  auto id = required<ProjectId>(c.payload, "project");
  require_member(c.actor, id, "change-quota");
  auto request = required<ResourceVector>(c.payload, "request");
  const auto& p = federation_.project(id);
  if (p.state != ProjectState::Placed || !p.placement) {
    throw Error(ErrorCode::Precondition, "project " + id.str() + " is not Placed");
  }
  const auto current = *p.placement;
  const auto& cluster = federation_.cluster(current);
  auto others = federation_.committed(current) - p.request;
  if (fits_within(others + request, cluster.capacity)) {
    federation_.resize_in_place(id, request);
    return json{{"project", federation_.project(id)}, {"moved", false}};
  }

  // The current cluster cannot hold the new request: re-place wholesale onto
  // another cluster, or leave everything untouched if none fits.
  auto views = federation_.load_views(availability_at(now_));
  std::erase_if(views, [&](const ClusterLoadView& v) { return v.cluster == current; });
  Project probe = p;
  probe.request = request;
  auto preview = place_project(views, probe);
  if (!preview.placed()) {
    throw Error(ErrorCode::Conflict, "no cluster can hold " + to_string(request) + ": " +
                                         preview.reason);
  }
  federation_.release_placement(id);
  federation_.project(id).request = request;
  auto decision = federation_.score(id, availability_at(now_));
  federation_.commit_placement(decision);
  bookings_.purge_project(id, now_, current);
  return json{{"project", federation_.project(id)}, {"moved", true}, {"decision", decision}};
}

json ControlPlane::delete_project(const Command& c) {
  require_admin(c.actor);
  auto id = required<ProjectId>(c.payload, "project");
  federation_.project(id);
  bookings_.purge_project(id, now_);
  federation_.remove_project(id);
  return json{{"deleted", id}};
}

json ControlPlane::create_booking(const Command& c) {
  auto project_id = required<ProjectId>(c.payload, "project");
  auto user = c.actor;
  if (c.payload.contains("user") && !c.payload.at("user").is_null()) {
    auto requested = required<UserId>(c.payload, "user");
    if (requested != c.actor) require_admin(c.actor);
    user = requested;
  }
  require_member(user, project_id, "book");
  const auto& p = federation_.project(project_id);
  if (p.state != ProjectState::Placed || !p.placement) {
    throw Error(ErrorCode::Precondition, "project " + project_id.str() + " is not Placed");
  }
  if (c.payload.contains("cluster") && !c.payload.at("cluster").is_null() &&
      required<ClusterId>(c.payload, "cluster") != *p.placement) {
    throw Error(ErrorCode::Validation, "bookings must target the project's cluster " +
                                           p.placement->str());
  }
  BookingRequest req;
  req.user = user;
  req.project = project_id;
  req.gpu_count = static_cast<std::uint64_t>(positive_count(c.payload, "gpus"));
  req.interval = {required<Timestamp>(c.payload, "start"), required<Timestamp>(c.payload, "end")};
  auto b = bookings_.request(*p.placement, req, now_, federation_.projects());
  return json{{"booking", b}};
}

json ControlPlane::cancel_booking(const Command& c) {
  auto id = required<BookingId>(c.payload, "booking");
  std::vector<RespawnAction> respawns;
  auto b = bookings_.cancel(id, c.actor, is_admin(c.actor), federation_.projects(), now_,
                            &respawns);
  return json{{"booking", b}, {"respawns", respawns}};
}

json ControlPlane::spawn_workspace(const Command& c) {
  auto project_id = required<ProjectId>(c.payload, "project");
  require_member(c.actor, project_id, "spawn-workspace");
  const auto& p = federation_.project(project_id);
  if (p.state != ProjectState::Placed || !p.placement) {
    throw Error(ErrorCode::Precondition, "project " + project_id.str() + " is not Placed");
  }
  AdmissionRequest req{c.actor, project_id, *p.placement,
                       optional_field<bool>(c.payload, "wants_gpu", false), now_};
  auto [admission, pod] = bookings_.spawn(req);
  if (admission.verdict == AdmissionVerdict::Reject) {
    throw Error(ErrorCode::Conflict, "admission rejected: " + admission.reason);
  }
  return json{{"admission", admission}, {"pod", bookings_.pods().at(*pod)}};
}

json ControlPlane::publish_release(const Command& c) {
  require_admin(c.actor);
  auto app = required<std::string>(c.payload, "app");
  auto version = required<SemVer>(c.payload, "version");
  auto digest = optional_field<std::string>(c.payload, "digest", "sha256:" + sha256_hex(app + "@" + version.str()));
  return json{{"release", registry_.publish(app, version, digest, now_)}};
}

json ControlPlane::poll_cluster(const Command& c) {
  require_admin(c.actor);
  auto id = required<ClusterId>(c.payload, "cluster");
  auto instant = optional_field<Timestamp>(c.payload, "instant", now_);
  if (instant > now_) throw Error(ErrorCode::Validation, "poll instant lies in the future");
  auto avail = availability(id, now_);
  auto actions = poll(federation_.cluster(id), registry_, config_.sync, instant, avail);
  for (auto& a : actions) a.applied_at = now_;
  if (!actions.empty()) sync_namespace_versions(id);
  return json{{"cluster", id}, {"availability", to_string(avail)}, {"upgrades", actions}};
}

// ---------------------------------------------------------------------------

json ControlPlane::state_json() const {
  json clusters = json::array();
  for (const auto& [_, c] : federation_.clusters()) clusters.push_back(c);
  json projects = json::array();
  for (const auto& [_, p] : federation_.projects()) projects.push_back(p);
  json namespaces = json::array();
  for (const auto& [_, ns] : federation_.namespaces()) namespaces.push_back(ns);
  json intents = json::array();
  for (const auto& i : federation_.intents()) {
    intents.push_back(json{{"project", i.project}, {"cluster", i.cluster}});
  }
  json calendars = json::object();
  for (const auto& [id, cal] : bookings_.calendars()) {
    json entries = json::array();
    for (const auto& [_, b] : cal.entries()) entries.push_back(b);
    calendars[id.str()] = json{{"capacity", cal.bookable_capacity()}, {"entries", entries}};
  }
  json closed = json::array();
  for (const auto& [_, b] : bookings_.closed()) closed.push_back(b);
  json pods = json::array();
  for (const auto& [_, pod] : bookings_.pods()) pods.push_back(pod);
  json monitor = json::object();
  for (const auto& [id, rec] : monitor_.records()) {
    json history = json::array();
    for (const auto& hb : rec.history) history.push_back(hb);
    monitor[id.str()] = json{
        {"last_heartbeat", rec.last_heartbeat ? json(*rec.last_heartbeat) : json(nullptr)},
        {"latest", rec.latest ? json(*rec.latest) : json(nullptr)},
        {"history", history}};
  }
  json releases = json::object();
  for (const auto& [app, list] : registry_.apps()) releases[app] = list;

  return json{{"config", config_},
              {"now", now_},
              {"applied", applied_},
              {"next_project", next_project_},
              {"version", federation_.version()},
              {"clusters", clusters},
              {"projects", projects},
              {"namespaces", namespaces},
              {"intents", intents},
              {"retired_projects", federation_.retired_projects()},
              {"calendars", calendars},
              {"closed_bookings", closed},
              {"pods", pods},
              {"next_booking", bookings_.next_booking_seq()},
              {"next_pod", bookings_.next_pod_seq()},
              {"monitor", monitor},
              {"releases", releases}};
}

std::string ControlPlane::digest() const { return sha256_hex(state_json().dump()); }

std::string ControlPlane::project_digest(const ProjectId& project) const {
  json doc;
  auto pit = federation_.projects().find(project);
  doc["project"] = pit == federation_.projects().end() ? json(nullptr) : json(pit->second);
  auto nit = federation_.namespaces().find(project);
  doc["namespace"] = nit == federation_.namespaces().end() ? json(nullptr) : json(nit->second);
  json bookings = json::array();
  for (const auto& b : bookings_.all_bookings()) {
    if (b.project == project) bookings.push_back(b);
  }
  doc["bookings"] = bookings;
  json pods = json::array();
  for (const auto& [_, pod] : bookings_.pods()) {
    if (pod.project == project) pods.push_back(pod);
  }
  doc["pods"] = pods;
  return sha256_hex(doc.dump());
}

ControlPlane ControlPlane::from_state_json(const json& state) {
  ControlPlane plane(required<PlaneConfig>(state, "config"));
  plane.now_ = required<Timestamp>(state, "now");
  plane.applied_ = required<std::uint64_t>(state, "applied");
  plane.next_project_ = required<std::uint64_t>(state, "next_project");

  std::map<ClusterId, Cluster> clusters;
  for (const auto& c : state.at("clusters")) {
    auto cluster = c.get<Cluster>();
    auto id = cluster.id;
    clusters.emplace(id, std::move(cluster));
  }
  ProjectStore projects;
  for (const auto& p : state.at("projects")) {
    auto project = p.get<Project>();
    auto id = project.id;
    projects.emplace(id, std::move(project));
  }
  std::map<ProjectId, Namespace> namespaces;
  for (const auto& n : state.at("namespaces")) {
    auto ns = n.get<Namespace>();
    auto id = ns.project;
    namespaces.emplace(id, std::move(ns));
  }
  std::deque<ReconcileIntent> intents;
  for (const auto& i : state.at("intents")) {
    intents.push_back({required<ProjectId>(i, "project"), required<ClusterId>(i, "cluster")});
  }
  plane.federation_.restore(std::move(clusters), std::move(projects), std::move(namespaces),
                            std::move(intents),
                            required<std::set<ProjectId>>(state, "retired_projects"),
                            required<std::uint64_t>(state, "version"));

  std::map<ClusterId, BookingCalendar> calendars;
  for (const auto& [id, cal] : state.at("calendars").items()) {
    ClusterId cid = make_id<ClusterId>(id);
    BookingCalendar calendar(cid, required<std::uint64_t>(cal, "capacity"));
    for (const auto& b : cal.at("entries")) calendar.insert(b.get<Booking>());
    calendars.emplace(cid, std::move(calendar));
  }
  std::map<BookingId, Booking> closed;
  for (const auto& b : state.at("closed_bookings")) {
    auto booking = b.get<Booking>();
    auto id = booking.id;
    closed.emplace(id, std::move(booking));
  }
  PodStore pods;
  for (const auto& p : state.at("pods")) {
    auto pod = p.get<WorkspacePod>();
    auto id = pod.id;
    pods.emplace(id, std::move(pod));
  }
  plane.bookings_.restore(std::move(calendars), std::move(closed), std::move(pods),
                          required<std::uint64_t>(state, "next_booking"),
                          required<std::uint64_t>(state, "next_pod"));

  std::map<ClusterId, MonitorStore::Record> records;
  for (const auto& [id, rec] : state.at("monitor").items()) {
    MonitorStore::Record r;
    if (!rec.at("last_heartbeat").is_null()) r.last_heartbeat = rec.at("last_heartbeat").get<Timestamp>();
    if (!rec.at("latest").is_null()) r.latest = rec.at("latest").get<HeartbeatMetrics>();
    for (const auto& hb : rec.at("history")) r.history.push_back(hb.get<Heartbeat>());
    records.emplace(make_id<ClusterId>(id), std::move(r));
  }
  plane.monitor_.restore(std::move(records));

  for (const auto& [app, list] : state.at("releases").items()) {
    for (const auto& r : list) {
      auto rel = r.get<Release>();
      plane.registry_.publish(rel.app, rel.version, rel.digest, rel.published_at);
    }
  }
  return plane;
}

}  // namespace fedplane
