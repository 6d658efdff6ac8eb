#include "fedplane/scenario.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace fedplane::sim {

namespace {

const std::vector<std::string_view> kVerbs = {
    "register", "quota",  "delete",  "book",     "cancel",   "spawn",  "partition",
    "publish",  "sweep",  "advance", "workload", "assert"};

std::optional<std::int64_t> parse_int(std::string_view s) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

Error line_error(std::size_t line, const std::string& what) {
  return Error(ErrorCode::Validation, "scenario line " + std::to_string(line) + ": " + what);
}

// Splits tokens into positional args and key=value options.
void split_tokens(const std::vector<std::string>& tokens, std::size_t from,
                  std::vector<std::string>& args, std::map<std::string, std::string>& options) {
  for (std::size_t i = from; i < tokens.size(); ++i) {
    auto eq = tokens[i].find('=');
    if (eq == std::string::npos) {
      args.push_back(tokens[i]);
    } else {
      options[tokens[i].substr(0, eq)] = tokens[i].substr(eq + 1);
    }
  }
}

json resource_json(const ScenarioCommand& c) {
  return json{{"gpus", c.int_option_or("gpus", 0)},
              {"cpu", c.int_option_or("cpu", 0)},
              {"mem", c.int_option_or("mem", 0)}};
}

std::string positional(const ScenarioCommand& c, std::size_t i, const char* what) {
  if (i >= c.args.size()) {
    throw Error(ErrorCode::Validation, c.verb + " needs " + what);
  }
  return c.args[i];
}

}  // namespace

const std::string* ScenarioCommand::option(const std::string& key) const {
  auto it = options.find(key);
  return it == options.end() ? nullptr : &it->second;
}

std::string ScenarioCommand::option_or(const std::string& key, std::string fallback) const {
  const auto* v = option(key);
  return v ? *v : std::move(fallback);
}

std::int64_t ScenarioCommand::int_option(const std::string& key) const {
  const auto* v = option(key);
  if (v == nullptr) throw Error(ErrorCode::Validation, verb + " needs " + key + "=");
  auto n = parse_int(*v);
  if (!n) throw Error(ErrorCode::Validation, verb + ": " + key + " expects an integer");
  return *n;
}

std::int64_t ScenarioCommand::int_option_or(const std::string& key, std::int64_t fallback) const {
  return option(key) ? int_option(key) : fallback;
}

Scenario Scenario::parse(std::string_view text) {
  Scenario s;
  std::map<std::string, std::string> settings;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto hash = raw.find('#');
    std::string line = raw.substr(0, hash);
    std::istringstream words(line);
    std::vector<std::string> tokens;
    for (std::string w; words >> w;) tokens.push_back(w);
    if (tokens.empty()) continue;

    try {
      const auto& head = tokens[0];
      if (head == "seed") {
        if (tokens.size() != 2 || !parse_int(tokens[1])) throw line_error(line_no, "seed <integer>");
        s.seed = static_cast<std::uint64_t>(*parse_int(tokens[1]));
      } else if (head == "config") {
        std::vector<std::string> args;
        std::map<std::string, std::string> opts;
        split_tokens(tokens, 1, args, opts);
        if (!args.empty()) throw line_error(line_no, "config takes key=value pairs only");
        for (const auto& [k, v] : opts) settings[k] = v;
      } else if (head == "cluster") {
        ScenarioCommand c;
        c.verb = "cluster";
        split_tokens(tokens, 1, c.args, c.options);
        ClusterSpec spec;
        spec.id = make_id<ClusterId>(positional(c, 0, "an id"));
        spec.display_name = c.option_or("name", spec.id.str());
        spec.capacity = resource_vector_from_signed(c.int_option_or("gpus", 0),
                                                    c.int_option_or("cpu", 0),
                                                    c.int_option_or("mem", 0));
        auto bookable = c.int_option_or("bookable", static_cast<std::int64_t>(spec.capacity.gpus));
        if (bookable < 0) throw line_error(line_no, "bookable is negative");
        spec.bookable_gpus = static_cast<std::uint64_t>(bookable);
        spec.delay = c.int_option_or("delay", 0);
        if (spec.delay < 0) throw line_error(line_no, "delay is negative");
        for (const auto& item : split_list(c.option_or("install", ""), ',')) {
          auto at = item.find('@');
          if (at == std::string::npos) throw line_error(line_no, "install expects app@version");
          spec.installed[item.substr(0, at)] = SemVer::parse(item.substr(at + 1));
        }
        s.clusters.push_back(std::move(spec));
      } else if (auto t = parse_int(head)) {
        if (tokens.size() < 2) throw line_error(line_no, "missing command");
        ScenarioCommand c;
        c.at = *t;
        c.verb = tokens[1];
        c.line = line_no;
        c.text = line;
        while (!c.text.empty() && std::isspace(static_cast<unsigned char>(c.text.back()))) {
          c.text.pop_back();
        }
        if (std::find(kVerbs.begin(), kVerbs.end(), c.verb) == kVerbs.end()) {
          throw line_error(line_no, "unknown command '" + c.verb + "'");
        }
        split_tokens(tokens, 2, c.args, c.options);
        s.script.push_back(std::move(c));
      } else {
        throw line_error(line_no, "expected seed, config, cluster or a timed command");
      }
    } catch (const Error& e) {
      if (std::string_view(e.what()).starts_with("scenario line")) throw;
      throw line_error(line_no, e.what());
    }
  }
  s.config = plane_config_from_strings(settings);
  s.validate();
  return s;
}

Scenario Scenario::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open scenario file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

void Scenario::validate() const {
  std::set<ClusterId> seen;
  for (const auto& c : clusters) {
    if (!seen.insert(c.id).second) {
      throw Error(ErrorCode::Validation, "duplicate cluster id " + c.id.str());
    }
  }
  Timestamp last = 0;
  for (std::size_t i = 0; i < script.size(); ++i) {
    const auto& c = script[i];
    if (c.at < last) {
      throw line_error(c.line, "commands must be in non-decreasing time order");
    }
    if (c.at < 0) throw line_error(c.line, "negative time");
    last = c.at;
    if (c.verb == "workload") {
      auto end = c.at + c.int_option_or("span", 0);
      if (i + 1 < script.size() && script[i + 1].at < end) {
        throw line_error(script[i + 1].line, "command falls inside the preceding workload span");
      }
      last = end;
    }
  }
}

std::string Trace::text() const {
  std::string out;
  for (const auto& r : records) {
    out += r;
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------

FederationSim::FederationSim(const Scenario& scenario)
    : scenario_(scenario), plane_(scenario.config), rng_(scenario.seed) {
  sim_.on(EventKind::HeartbeatDue, [this](const SimEvent& ev) { on_heartbeat(ev); });
  sim_.on(EventKind::PollDue, [this](const SimEvent& ev) { on_poll(ev); });
  sim_.on(EventKind::BookingExpiry, [this](const SimEvent& ev) { on_expiry(ev); });
  sim_.on(EventKind::PartitionStart, [this](const SimEvent& ev) { on_partition_start(ev); });
  sim_.on(EventKind::PartitionEnd, [this](const SimEvent& ev) { on_partition_end(ev); });

  json clusters = json::array();
  for (const auto& c : scenario_.clusters) clusters.push_back(c.id);
  record(0, 0, "init",
         json{{"seed", scenario_.seed}, {"config", scenario_.config}, {"clusters", clusters}});

  for (const auto& spec : scenario_.clusters) {
    Cluster c;
    c.id = spec.id;
    c.display_name = spec.display_name;
    c.capacity = spec.capacity;
    c.bookable_gpus = spec.bookable_gpus;
    c.installed = spec.installed;
    auto result = plane_.apply({cmd::kAddCluster, 0, kSystemActor, json(c)});
    record(0, 0, "init", json{{"cluster", result.at("cluster")}, {"delay", spec.delay}});
    delays_[spec.id] = spec.delay;
  }
  const auto& cfg = plane_.config();
  for (const auto& spec : scenario_.clusters) {
    SimEvent hb;
    hb.kind = EventKind::HeartbeatDue;
    hb.cluster = spec.id;
    hb.nominal = 0;
    hb.at = spec.delay;
    sim_.schedule(hb);
    SimEvent poll;
    poll.kind = EventKind::PollDue;
    poll.cluster = spec.id;
    poll.nominal = cfg.sync.cadence();
    poll.at = poll.nominal + spec.delay;
    sim_.schedule(poll);
  }
}

Trace FederationSim::take_trace() {
  trace_.final_digest = plane_.digest();
  return std::move(trace_);
}

void FederationSim::record(Timestamp at, std::uint64_t seq, std::string_view tag,
                           const json& detail) {
  std::string line = "t=" + std::to_string(at) + " seq=" + std::to_string(seq) + " ";
  line += tag;
  line += ' ';
  line += detail.dump();
  trace_.records.push_back(std::move(line));
}

bool FederationSim::cut_off(const ClusterId& cluster, Timestamp t) const {
  return partitions_.cut_off(cluster, t);
}

void FederationSim::run_until(Timestamp t) { sim_.advance_to(t); }

json FederationSim::submit(const std::string& kind, const UserId& actor, json payload) {
  auto result = plane_.apply({kind, sim_.now(), actor, std::move(payload)});
  if (kind == cmd::kCreateBooking) schedule_expiry(result.at("booking"));
  return result;
}

void FederationSim::schedule_expiry(const json& booking) {
  SimEvent ev;
  ev.kind = EventKind::BookingExpiry;
  ev.booking = booking.at("id").get<BookingId>();
  ev.at = booking.at("end").get<Timestamp>();
  sim_.schedule(ev);
}

void FederationSim::send_heartbeat(const ClusterId& cluster, Timestamp sent_at) {
  json payload{{"cluster", cluster},
               {"sent_at", sent_at},
               {"metrics", plane_.observed_metrics(cluster)}};
  auto result = submit(cmd::kHeartbeat, kSystemActor, std::move(payload));
  record(sim_.now(), sim_.clock().last_seq(), "heartbeat", result);
}

void FederationSim::send_poll(const ClusterId& cluster, Timestamp instant) {
  auto result = submit(cmd::kPoll, kSystemActor, json{{"cluster", cluster}, {"instant", instant}});
  record(sim_.now(), sim_.clock().last_seq(), "poll", result);
}

void FederationSim::on_heartbeat(const SimEvent& ev) {
  if (cut_off(ev.cluster, ev.nominal)) {
    record(ev.at, ev.seq, "HeartbeatDue",
           json{{"cluster", ev.cluster}, {"sent_at", ev.nominal}, {"suppressed", true}});
  } else {
    json payload{{"cluster", ev.cluster},
                 {"sent_at", ev.nominal},
                 {"metrics", plane_.observed_metrics(ev.cluster)}};
    auto result = submit(cmd::kHeartbeat, kSystemActor, std::move(payload));
    record(ev.at, ev.seq, "HeartbeatDue", result);
  }
  SimEvent next = ev;
  next.nominal = ev.nominal + plane_.config().monitor.interval;
  next.at = next.nominal + delays_.at(ev.cluster);
  sim_.schedule(next);
}

void FederationSim::on_poll(const SimEvent& ev) {
  if (cut_off(ev.cluster, ev.at)) {
    record(ev.at, ev.seq, "PollDue", json{{"cluster", ev.cluster}, {"skipped", "partitioned"}});
  } else {
    auto result = submit(cmd::kPoll, kSystemActor,
                         json{{"cluster", ev.cluster}, {"instant", ev.nominal}});
    record(ev.at, ev.seq, "PollDue", result);
  }
  SimEvent next = ev;
  next.nominal = ev.nominal + plane_.config().sync.cadence();
  next.at = next.nominal + delays_.at(ev.cluster);
  sim_.schedule(next);
}

void FederationSim::on_expiry(const SimEvent& ev) {
  auto result = submit(cmd::kSweep, kSystemActor, json::object());
  result["booking"] = ev.booking;
  record(ev.at, ev.seq, "BookingExpiry", result);
}

void FederationSim::on_partition_start(const SimEvent& ev) {
  record(ev.at, ev.seq, "PartitionStart", json{{"cluster", ev.cluster}});
}

void FederationSim::on_partition_end(const SimEvent& ev) {
  if (!partitions_.ends_at(ev.cluster, ev.at)) {
    record(ev.at, ev.seq, "PartitionEnd", json{{"cluster", ev.cluster}, {"superseded", true}});
    return;
  }
  record(ev.at, ev.seq, "PartitionEnd", json{{"cluster", ev.cluster}});
  send_heartbeat(ev.cluster, ev.at);
  send_poll(ev.cluster, ev.at);
}

void FederationSim::partition(const ClusterId& cluster, Timestamp from, Timestamp to) {
  if (!plane_.federation().has_cluster(cluster)) {
    throw Error(ErrorCode::NotFound, "cluster " + cluster.str() + " not found");
  }
  if (from < sim_.now()) throw Error(ErrorCode::Validation, "partition starts in the past");
  bool was_ending = false;
  auto before = partitions_.intervals(cluster);
  auto merged = partitions_.add(cluster, from, to);
  for (const auto& iv : before) was_ending |= iv.end == merged.end;

  SimEvent start;
  start.kind = EventKind::PartitionStart;
  start.cluster = cluster;
  start.at = from;
  sim_.schedule(start);
  if (!was_ending) {
    SimEvent end;
    end.kind = EventKind::PartitionEnd;
    end.cluster = cluster;
    end.at = merged.end;
    sim_.schedule(end);
  }
}

void FederationSim::fail(const ScenarioCommand& c, const std::string& why) {
  trace_.failed = true;
  trace_.failure = "line " + std::to_string(c.line) + ": " + why;
  record(sim_.now(), sim_.clock().next_seq(), "ASSERT-FAILED",
         json{{"line", c.line}, {"command", c.text}, {"why", why}, {"digest", plane_.digest()}});
}

bool FederationSim::execute(const ScenarioCommand& c) {
  if (c.verb == "assert") {
    std::optional<std::string> failure;
    try {
      failure = check_assert(c);
    } catch (const Error& e) {
      failure = e.what();
    }
    if (failure) {
      fail(c, *failure);
      return false;
    }
    record(sim_.now(), sim_.clock().next_seq(), "assert", json{{"line", c.line}, {"ok", true}});
    return true;
  }
  if (c.verb == "workload") {
    run_workload(c);
    record(sim_.now(), sim_.clock().next_seq(), "workload",
           json{{"line", c.line}, {"digest", plane_.digest()}});
    return true;
  }

  json detail{{"line", c.line}};
  std::string outcome = "ok";
  try {
    detail["result"] = run_command(c);
  } catch (const Error& e) {
    outcome = to_string(e.code());
    detail["error"] = json{{"code", outcome}, {"message", e.what()}};
  }
  detail["digest"] = plane_.digest();
  record(sim_.now(), sim_.clock().next_seq(), c.verb, detail);

  if (const auto* expect = c.option("expect"); expect && *expect != outcome) {
    fail(c, "expected " + *expect + ", got " + outcome);
    return false;
  }
  return true;
}

json FederationSim::run_command(const ScenarioCommand& c) {
  const auto& v = c.verb;
  if (v == "register") {
    auto id = positional(c, 0, "a project id");
    json members = json::array();
    for (const auto& m : split_list(c.option_or("members", ""), ',')) members.push_back(m);
    json payload{{"id", id}, {"name", c.option_or("name", id)}, {"members", members},
                 {"request", resource_json(c)}};
    if (const auto* pin = c.option("cluster")) payload["cluster"] = *pin;
    auto actor = c.option_or("as", members.empty() ? kSystemActor.str() : members[0].get<std::string>());
    return submit(cmd::kRegisterProject, UserId(actor), payload);
  }
  if (v == "quota") {
    auto id = ProjectId(positional(c, 0, "a project id"));
    std::string actor = c.option_or("as", "");
    if (actor.empty()) actor = plane_.federation().project(id).members.begin()->str();
    return submit(cmd::kChangeQuota, UserId(actor),
                  json{{"project", id}, {"request", resource_json(c)}});
  }
  if (v == "delete") {
    return submit(cmd::kDeleteProject, kSystemActor,
                  json{{"project", positional(c, 0, "a project id")}});
  }
  if (v == "book") {
    auto label = positional(c, 0, "a label");
    auto start = c.int_option_or("start", sim_.now());
    auto end = c.option("end") ? c.int_option("end") : start + c.int_option("duration");
    json payload{{"project", c.option_or("project", "")}, {"gpus", c.int_option("gpus")},
                 {"start", start}, {"end", end}};
    auto result = submit(cmd::kCreateBooking, UserId(c.option_or("user", "")), payload);
    booking_labels_[label] = result.at("booking").at("id").get<BookingId>();
    return result;
  }
  if (v == "cancel") {
    auto label = positional(c, 0, "a booking label");
    auto it = booking_labels_.find(label);
    BookingId id = it == booking_labels_.end() ? BookingId(label) : it->second;
    auto by = c.option_or("by", plane_.bookings().booking(id).user.str());
    return submit(cmd::kCancelBooking, UserId(by), json{{"booking", id}});
  }
  if (v == "spawn") {
    auto label = positional(c, 0, "a label");
    bool gpu = c.option_or("gpu", "no") == "yes";
    auto result = submit(cmd::kSpawnWorkspace, UserId(c.option_or("user", "")),
                         json{{"project", c.option_or("project", "")}, {"wants_gpu", gpu}});
    pod_labels_[label] = result.at("pod").at("id").get<PodId>();
    return result;
  }
  if (v == "partition") {
    auto cluster = ClusterId(positional(c, 0, "a cluster id"));
    auto from = c.int_option_or("from", sim_.now());
    auto to = c.int_option("until");
    partition(cluster, from, to);
    return json{{"cluster", cluster}, {"from", from}, {"until", to}};
  }
  if (v == "publish") {
    json payload{{"app", positional(c, 0, "an app")}, {"version", positional(c, 1, "a version")}};
    if (const auto* d = c.option("digest")) payload["digest"] = *d;
    return submit(cmd::kPublishRelease, kSystemActor, payload);
  }
  if (v == "sweep") return submit(cmd::kSweep, kSystemActor, json::object());
  if (v == "advance") return json::object();
  throw Error(ErrorCode::Validation, "unknown command '" + v + "'");
}

std::optional<std::string> FederationSim::check_assert(const ScenarioCommand& c) {
  auto subject = positional(c, 0, "a subject");
  auto mismatch = [](const std::string& what, const std::string& want,
                     const std::string& got) -> std::optional<std::string> {
    if (want == got) return std::nullopt;
    return what + ": expected " + want + ", got " + got;
  };
  auto check = [&](const std::string& key, const std::string& got) -> std::optional<std::string> {
    if (const auto* want = c.option(key)) return mismatch(subject + " " + key, *want, got);
    return std::nullopt;
  };
  const auto now = sim_.now();

  if (subject == "workspace") {
    UserId user(c.option_or("user", ""));
    ProjectId project(c.option_or("project", ""));
    const WorkspacePod* latest = nullptr;
    for (const auto& [_, pod] : plane_.bookings().pods()) {
      if (pod.live() && pod.user == user && pod.project == project) latest = &pod;
    }
    if (latest == nullptr) return "no live workspace for " + user.str() + " in " + project.str();
    auto gpus = latest->gpu_grant ? latest->gpu_grant->gpus : 0;
    if (auto f = check("gpus", std::to_string(gpus))) return f;
    if (auto f = check("phase", to_string(latest->phase))) return f;
    return std::nullopt;
  }
  if (subject == "booking") {
    auto label = positional(c, 1, "a booking label");
    auto it = booking_labels_.find(label);
    const auto& b = plane_.bookings().booking(it == booking_labels_.end() ? BookingId(label)
                                                                          : it->second);
    return check("status", to_string(b.status));
  }
  if (subject == "cluster") {
    ClusterId id(positional(c, 1, "a cluster id"));
    if (auto f = check("availability", to_string(plane_.availability(id, now)))) return f;
    if (auto f = check("granted", std::to_string(plane_.bookings().granted_gpus(id)))) return f;
    return std::nullopt;
  }
  if (subject == "project") {
    const auto& p = plane_.federation().project(ProjectId(positional(c, 1, "a project id")));
    if (auto f = check("state", to_string(p.state))) return f;
    if (auto f = check("cluster", p.placement ? p.placement->str() : "none")) return f;
    return std::nullopt;
  }
  if (subject == "namespace") {
    ProjectId id(positional(c, 1, "a project id"));
    const auto& spaces = plane_.federation().namespaces();
    auto it = spaces.find(id);
    if (it == spaces.end()) return "no namespace for " + id.str();
    if (const auto* want = c.option("apps")) {
      for (const auto& [slot, app] : it->second.apps) {
        if (auto f = mismatch("slot " + slot, *want, to_string(app.state))) return f;
      }
    }
    return check("cluster", it->second.cluster.str());
  }
  if (subject == "installed") {
    const auto& cluster = plane_.federation().cluster(ClusterId(positional(c, 1, "a cluster id")));
    auto app = positional(c, 2, "an app");
    auto want = positional(c, 3, "a version");
    auto it = cluster.installed.find(app);
    return mismatch("installed " + app, want, it == cluster.installed.end() ? "none" : it->second.str());
  }
  if (subject == "drift") {
    const auto& cluster = plane_.federation().cluster(ClusterId(positional(c, 1, "a cluster id")));
    auto app = positional(c, 2, "an app");
    auto drift = cluster_drift(plane_.registry(), cluster);
    auto it = drift.find(app);
    return check("behind", it == drift.end() ? "absent" : std::to_string(it->second.behind_by));
  }
  if (subject == "committed") {
    auto committed = plane_.federation().committed(ClusterId(positional(c, 1, "a cluster id")));
    if (auto f = check("gpus", std::to_string(committed.gpus))) return f;
    if (auto f = check("cpu", std::to_string(committed.cpu_cores))) return f;
    return check("mem", std::to_string(committed.memory_gib));
  }
  return "unknown assert subject '" + subject + "'";
}

void FederationSim::run_workload(const ScenarioCommand& c) {
  const auto ops = c.int_option("ops");
  const auto span = c.int_option_or("span", 0);
  const auto start = sim_.now();

  std::vector<Timestamp> times;
  std::uniform_int_distribution<Timestamp> when(0, span);
  for (std::int64_t i = 0; i < ops; ++i) times.push_back(start + when(rng_));
  std::sort(times.begin(), times.end());

  for (auto t : times) {
    run_until(t);
    std::vector<const Project*> placed;
    for (const auto& [_, p] : plane_.federation().projects()) {
      if (p.state == ProjectState::Placed) placed.push_back(&p);
    }
    if (placed.empty()) continue;
    const auto& project = *placed[std::uniform_int_distribution<std::size_t>(0, placed.size() - 1)(rng_)];
    std::vector<UserId> members(project.members.begin(), project.members.end());
    const auto& user = members[std::uniform_int_distribution<std::size_t>(0, members.size() - 1)(rng_)];
    const auto& cal = plane_.bookings().calendar(*project.placement);

    auto op = std::uniform_int_distribution<int>(0, 9)(rng_);
    std::string kind;
    UserId actor = user;
    json payload;
    if (op < 5) {
      auto gpus = std::uniform_int_distribution<std::int64_t>(
          1, std::max<std::int64_t>(1, static_cast<std::int64_t>(cal.bookable_capacity())))(rng_);
      auto begin = t + std::uniform_int_distribution<Timestamp>(0, 120)(rng_);
      auto length = std::uniform_int_distribution<Timestamp>(1, 240)(rng_);
      kind = cmd::kCreateBooking;
      payload = json{{"project", project.id}, {"gpus", gpus}, {"start", begin}, {"end", begin + length}};
    } else if (op < 7) {
      std::vector<const Booking*> live;
      for (const auto& [_, b] : cal.entries()) {
        if (b.project == project.id) live.push_back(&b);
      }
      if (live.empty()) continue;
      const auto& b = *live[std::uniform_int_distribution<std::size_t>(0, live.size() - 1)(rng_)];
      kind = cmd::kCancelBooking;
      actor = b.user;
      payload = json{{"booking", b.id}};
    } else {
      kind = cmd::kSpawnWorkspace;
      payload = json{{"project", project.id}, {"wants_gpu", op != 7}};
    }

    json detail{{"line", c.line}, {"kind", kind}, {"actor", actor}};
    try {
      detail["result"] = submit(kind, actor, payload);
    } catch (const Error& e) {
      detail["error"] = json{{"code", to_string(e.code())}, {"message", e.what()}};
    }
    record(sim_.now(), sim_.clock().next_seq(), "op", detail);
  }
  run_until(start + span);
}

Trace run_scenario(const Scenario& scenario) {
  scenario.validate();
  FederationSim fs(scenario);
  for (const auto& c : scenario.script) {
    fs.run_until(c.at);
    if (!fs.execute(c)) break;
  }
  return fs.take_trace();
}

}  // namespace fedplane::sim
