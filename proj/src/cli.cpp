#include "fedplane/cli.hpp"

#include <CLI11.hpp>
#include <httplib.h>

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

#include "fedplane/gateway.hpp"
#include "fedplane/scenario.hpp"

namespace fedplane {

namespace {

struct GlobalOptions {
  std::string server;
  std::string token;
  bool offline = false;
  std::string data_dir;
  std::string config;
  std::string clock;
  std::string as = kSystemActor.str();
  std::string idempotency_key;
  bool json_out = false;
};

/// Sends requests to a gateway, either over HTTP or in-process.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual ApiResponse call(ApiRequest request) = 0;
};

class HttpTransport : public Transport {
 public:
  HttpTransport(const std::string& url, std::string token)
      : client_(url), token_(std::move(token)) {
    client_.set_connection_timeout(5);
  }

  ApiResponse call(ApiRequest request) override {
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);
    for (const auto& [k, v] : request.headers) headers.emplace(k, v);
    auto target = request.path;
    if (!request.query.empty()) target += "?" + httplib::detail::params_to_query_str(
                                                    {request.query.begin(), request.query.end()});
    httplib::Result res;
    if (request.method == "GET") {
      res = client_.Get(target, headers);
    } else if (request.method == "POST") {
      res = client_.Post(target, headers, request.body, "application/json");
    } else {
      res = client_.Delete(target, headers, request.body, "application/json");
    }
    if (!res) {
      throw std::runtime_error("gateway unreachable: " + httplib::to_string(res.error()));
    }
    ApiResponse out;
    out.status = res->status;
    out.body = res->body.empty() ? json::object() : json::parse(res->body, nullptr, false);
    return out;
  }

 private:
  httplib::Client client_;
  std::string token_;
};

class OfflineTransport : public Transport {
 public:
  OfflineTransport(GatewayConfig config, UserId as)
      : gateway_(std::move(config)), as_(std::move(as)) {}

  ApiResponse call(ApiRequest request) override {
    request.principal = as_;
    return gateway_.handle(request);
  }

 private:
  Gateway gateway_;
  UserId as_;
};

GatewayConfig gateway_config(const GlobalOptions& g) {
  auto cfg = g.config.empty() ? GatewayConfig{} : GatewayConfig::load(g.config);
  cfg.apply_env([](const char* k) { return std::getenv(k); });
  if (!g.data_dir.empty()) cfg.data_dir = g.data_dir;
  if (!g.clock.empty()) cfg.clock = clock_mode_from_string(g.clock);
  return cfg;
}

std::unique_ptr<Transport> make_transport(const GlobalOptions& g) {
  if (g.offline) return std::make_unique<OfflineTransport>(gateway_config(g), make_id<UserId>(g.as));
  return std::make_unique<HttpTransport>(g.server, g.token);
}

std::string fmt_rv(const json& rv) {
  std::ostringstream s;
  s << rv.value("gpus", 0) << " gpu / " << rv.value("cpu", 0) << " cpu / " << rv.value("mem", 0)
    << " GiB";
  return s.str();
}

std::string fmt_interval(const json& b) {
  const auto& iv = b.contains("interval") ? b.at("interval") : b;
  return "[" + iv.at("start").dump() + "," + iv.at("end").dump() + ")";
}

/// Prints the human form of a successful response.
void print_human(const std::string& what, const json& body, std::ostream& out) {
  if (what == "status") {
    const auto& clusters = body.at("clusters");
    const auto& projects = body.at("projects");
    out << clusters.size() << " clusters, " << projects.size() << " projects\n";
    for (const auto& c : clusters) {
      out << "  " << c.at("id").get<std::string>() << "  " << c.at("availability").get<std::string>()
          << "  free " << fmt_rv(c.at("free")) << "  gpus granted " << c.at("gpus_granted") << "/"
          << c.at("bookable_gpus") << "\n";
    }
    for (const auto& p : projects) {
      out << "  " << p.at("id").get<std::string>() << "  " << p.at("state").get<std::string>();
      if (!p.at("placement").is_null()) out << " on " << p.at("placement").get<std::string>();
      out << "\n";
    }
  } else if (what == "cluster-list") {
    for (const auto& c : body.at("clusters")) {
      out << c.at("id").get<std::string>() << "  " << c.at("availability").get<std::string>()
          << "  capacity " << fmt_rv(c.at("capacity")) << "  committed " << fmt_rv(c.at("committed"))
          << "\n";
    }
  } else if (what == "cluster-add") {
    out << "added cluster " << body.at("cluster").at("id").get<std::string>() << "\n";
  } else if (what == "project-register") {
    const auto& d = body.at("decision");
    out << "project " << body.at("project").at("id").get<std::string>() << ": "
        << d.at("outcome").get<std::string>();
    if (d.contains("cluster") && !d.at("cluster").is_null()) {
      out << " on " << d.at("cluster").get<std::string>();
    }
    if (d.contains("reason") && !d.at("reason").get<std::string>().empty()) {
      out << " (" << d.at("reason").get<std::string>() << ")";
    }
    out << "\n";
  } else if (what == "project-list") {
    for (const auto& p : body.at("projects")) {
      out << p.at("id").get<std::string>() << "  " << p.at("name").get<std::string>() << "  "
          << p.at("state").get<std::string>() << "  " << fmt_rv(p.at("request")) << "\n";
    }
  } else if (what == "booking-create" || what == "booking-cancel") {
    const auto& b = body.at("booking");
    out << "booking " << b.at("id").get<std::string>() << " " << b.at("status").get<std::string>()
        << " " << b.at("gpus") << " gpu " << fmt_interval(b) << " on "
        << b.at("cluster").get<std::string>() << "\n";
  } else if (what == "booking-list") {
    for (const auto& b : body.at("bookings")) {
      out << b.at("id").get<std::string>() << "  " << b.at("user").get<std::string>() << "  "
          << b.at("project").get<std::string>() << "  " << b.at("gpus") << " gpu "
          << fmt_interval(b) << "  " << b.at("status").get<std::string>() << "\n";
    }
  } else if (what == "workspace-spawn") {
    const auto& p = body.at("pod");
    out << "workspace " << p.at("id").get<std::string>() << " "
        << body.at("admission").at("verdict").get<std::string>() << "\n";
  } else if (what == "workspace-list") {
    for (const auto& p : body.at("workspaces")) {
      out << p.at("id").get<std::string>() << "  " << p.at("user").get<std::string>() << "  "
          << p.at("phase").get<std::string>()
          << (p.at("gpu_grant").is_null() ? "" : "  gpu") << "\n";
    }
  } else if (what == "release-publish") {
    const auto& r = body.at("release");
    out << "published " << r.at("app").get<std::string>() << " "
        << r.at("version").get<std::string>() << "\n";
  } else if (what == "release-list") {
    for (const auto& [app, list] : body.at("releases").items()) {
      out << app << ":";
      for (const auto& r : list) out << " " << r.at("version").get<std::string>();
      out << "\n";
    }
  } else if (what == "release-drift") {
    const auto& drift = body.at("drift");
    if (drift.empty()) out << body.at("cluster").get<std::string>() << " has no tracked apps\n";
    for (const auto& [app, d] : drift.items()) {
      out << app << "  installed " << d.at("installed").get<std::string>() << "  latest "
          << d.at("latest").get<std::string>() << "  behind " << d.at("behind_by") << "\n";
    }
  } else {
    out << body.dump(2) << "\n";
  }
}

int run_request(const GlobalOptions& g, const std::string& what, ApiRequest request,
                std::ostream& out, std::ostream& err) {
  if (!g.idempotency_key.empty()) request.headers["idempotency-key"] = g.idempotency_key;
  ApiResponse res;
  try {
    res = make_transport(g)->call(std::move(request));
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::Validation ? kExitValidation : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  if (res.status >= 200 && res.status < 300) {
    if (g.json_out) {
      out << res.body.dump() << "\n";
    } else {
      print_human(what, res.body, out);
    }
    return kExitOk;
  }
  if (g.json_out) {
    out << res.body.dump() << "\n";
  } else {
    std::string message = res.body.is_object() && res.body.contains("error")
                              ? res.body["error"].value("message", "")
                              : res.body.dump();
    err << "error (" << res.status << "): " << message << "\n";
  }
  return exit_code_for_status(res.status);
}

ApiRequest make_request(std::string method, std::string path, json body = nullptr) {
  ApiRequest r;
  r.method = std::move(method);
  r.path = std::move(path);
  if (!body.is_null()) r.body = body.dump();
  return r;
}

int run_scenario_command(const GlobalOptions& g, const std::string& file, bool full_trace,
                         const std::string& trace_out, const std::string& golden,
                         std::ostream& out, std::ostream& err) {
  sim::Trace trace;
  try {
    trace = sim::run_scenario(sim::Scenario::load(file));
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::Validation ? kExitValidation : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  const auto text = trace.text();
  if (!trace_out.empty()) {
    std::ofstream f(trace_out, std::ios::binary);
    f << text;
  }
  bool golden_ok = true;
  if (!golden.empty()) {
    std::ifstream f(golden, std::ios::binary);
    std::stringstream buf;
    buf << f.rdbuf();
    golden_ok = f.good() || f.eof() ? buf.str() == text : false;
  }

  if (g.json_out) {
    json summary{{"scenario", file},
                 {"records", trace.records.size()},
                 {"failed", trace.failed},
                 {"failure", trace.failure},
                 {"final_digest", trace.final_digest}};
    if (!golden.empty()) summary["golden_match"] = golden_ok;
    out << summary.dump() << "\n";
  } else {
    if (full_trace) out << text;
    out << "scenario " << file << ": " << trace.records.size() << " records, final digest "
        << trace.final_digest.substr(0, 16) << "\n";
    if (trace.failed) out << "FAILED " << trace.failure << "\n";
    if (!golden.empty()) out << "golden trace " << (golden_ok ? "matches" : "DIFFERS") << "\n";
    if (!trace.failed && golden_ok) out << "ok\n";
  }
  return trace.failed || !golden_ok ? kExitFailure : kExitOk;
}

}  // namespace

int exit_code_for_status(int status) noexcept {
  if (status >= 200 && status < 300) return kExitOk;
  if (status == 400) return kExitValidation;
  if (status == 401 || status == 403) return kExitAuthorization;
  if (status == 409) return kExitConflict;
  return kExitFailure;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"fedctl: federation control plane gateway and admin tool"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand
  GlobalOptions g;
  const char* env_url = std::getenv("FEDPLANE_URL");
  const char* env_token = std::getenv("FEDPLANE_TOKEN");
  g.server = env_url ? env_url : "http://127.0.0.1:8080";
  g.token = env_token ? env_token : "";
  app.add_option("--server", g.server, "Gateway base URL (env FEDPLANE_URL)");
  app.add_option("--token", g.token, "Bearer token (env FEDPLANE_TOKEN)");
  app.add_flag("--offline", g.offline, "Operate directly on the data dir instead of a gateway");
  app.add_option("--data-dir", g.data_dir, "Data directory (serve, --offline)");
  app.add_option("--config", g.config, "Gateway config file (serve, --offline)");
  app.add_option("--clock", g.clock, "live or simulated (serve, --offline)");
  app.add_option("--as", g.as, "Acting user in --offline mode");
  app.add_option("--idempotency-key", g.idempotency_key, "Idempotency key for mutations");
  app.add_flag("--json", g.json_out, "Machine-readable output");

  std::function<int()> action;

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP gateway");
  std::string listen;
  serve_cmd->add_option("--listen", listen, "host:port (env FEDPLANE_LISTEN)");
  serve_cmd->callback([&] {
    action = [&]() -> int {
      auto cfg = gateway_config(g);
      if (!listen.empty()) cfg.listen = listen;
      Gateway gateway(cfg);
      const auto& rec = gateway.recovery();
      err << "recovered " << rec.records << " records";
      if (rec.snapshot_seq) err << " (snapshot " << *rec.snapshot_seq << ")";
      if (rec.torn_bytes_discarded) err << ", discarded " << rec.torn_bytes_discarded << " torn bytes";
      err << "\n";
      serve(gateway);
      return kExitOk;
    };
  });

  auto* status_cmd = app.add_subcommand("status", "Federation status");
  status_cmd->callback([&] {
    action = [&] { return run_request(g, "status", make_request("GET", "/federation/status"), out, err); };
  });

  // cluster
  auto* cluster = app.add_subcommand("cluster", "Clusters");
  cluster->require_subcommand(1);
  std::string cluster_id, cluster_name;
  std::int64_t c_gpus = 0, c_cpu = 0, c_mem = 0, c_bookable = -1;
  std::vector<std::string> installs;
  auto* cluster_add = cluster->add_subcommand("add", "Register a cluster (admin)");
  cluster_add->add_option("id", cluster_id)->required();
  cluster_add->add_option("--name", cluster_name);
  cluster_add->add_option("--gpus", c_gpus);
  cluster_add->add_option("--cpu", c_cpu);
  cluster_add->add_option("--mem", c_mem, "GiB");
  cluster_add->add_option("--bookable", c_bookable, "Bookable GPUs (default: all)");
  cluster_add->add_option("--install", installs, "app@version already installed");
  cluster_add->callback([&] {
    action = [&]() -> int {
      json installed = json::object();
      for (const auto& item : installs) {
        auto at = item.find('@');
        if (at == std::string::npos) {
          err << "error: --install expects app@version\n";
          return kExitValidation;
        }
        installed[item.substr(0, at)] = item.substr(at + 1);
      }
      json body{{"id", cluster_id},
                {"display_name", cluster_name.empty() ? cluster_id : cluster_name},
                {"capacity", {{"gpus", c_gpus}, {"cpu", c_cpu}, {"mem", c_mem}}},
                {"bookable_gpus", c_bookable < 0 ? c_gpus : c_bookable},
                {"installed", installed}};
      return run_request(g, "cluster-add", make_request("POST", "/clusters", body), out, err);
    };
  });
  cluster->add_subcommand("list", "List clusters")->callback([&] {
    action = [&] { return run_request(g, "cluster-list", make_request("GET", "/clusters"), out, err); };
  });
  auto* cluster_hb = cluster->add_subcommand("heartbeat", "Record a heartbeat (admin)");
  cluster_hb->add_option("id", cluster_id)->required();
  cluster_hb->callback([&] {
    action = [&] {
      return run_request(g, "raw", make_request("POST", "/clusters/" + cluster_id + "/heartbeat", json::object()), out, err);
    };
  });
  auto* cluster_poll = cluster->add_subcommand("poll", "Run a release poll for a cluster (admin)");
  cluster_poll->add_option("id", cluster_id)->required();
  cluster_poll->callback([&] {
    action = [&] {
      return run_request(g, "raw", make_request("POST", "/clusters/" + cluster_id + "/poll", json::object()), out, err);
    };
  });

  // project
  auto* project = app.add_subcommand("project", "Projects");
  project->require_subcommand(1);
  std::string p_name, p_id, p_cluster;
  std::vector<std::string> members;
  std::int64_t p_gpus = 0, p_cpu = 0, p_mem = 0;
  auto* project_register = project->add_subcommand("register", "Register and place a project");
  project_register->add_option("name", p_name)->required();
  project_register->add_option("--member", members, "Member user id (repeatable)")->required();
  project_register->add_option("--gpus", p_gpus);
  project_register->add_option("--cpu", p_cpu);
  project_register->add_option("--mem", p_mem, "GiB");
  project_register->add_option("--id", p_id, "Project id (generated when omitted)");
  project_register->add_option("--cluster", p_cluster, "Pin to a cluster");
  project_register->callback([&] {
    action = [&] {
      json body{{"name", p_name},
                {"members", members},
                {"request", {{"gpus", p_gpus}, {"cpu", p_cpu}, {"mem", p_mem}}}};
      if (!p_id.empty()) body["id"] = p_id;
      if (!p_cluster.empty()) body["cluster"] = p_cluster;
      return run_request(g, "project-register", make_request("POST", "/projects", body), out, err);
    };
  });
  project->add_subcommand("list", "List visible projects")->callback([&] {
    action = [&] { return run_request(g, "project-list", make_request("GET", "/projects"), out, err); };
  });
  auto* project_show = project->add_subcommand("show", "Show a project and its namespace");
  project_show->add_option("id", p_id)->required();
  project_show->callback([&] {
    action = [&] { return run_request(g, "raw", make_request("GET", "/projects/" + p_id), out, err); };
  });
  auto* project_delete = project->add_subcommand("delete", "Delete a project (admin)");
  project_delete->add_option("id", p_id)->required();
  project_delete->callback([&] {
    action = [&] { return run_request(g, "raw", make_request("DELETE", "/projects/" + p_id), out, err); };
  });

  // booking
  auto* booking = app.add_subcommand("booking", "GPU bookings");
  booking->require_subcommand(1);
  std::string b_project, b_user, b_id;
  std::int64_t b_gpus = 0, b_start = 0, b_end = 0;
  auto* booking_create = booking->add_subcommand("create", "Book GPUs for an interval");
  booking_create->add_option("--project", b_project)->required();
  booking_create->add_option("--gpus", b_gpus)->required();
  booking_create->add_option("--start", b_start, "seconds")->required();
  booking_create->add_option("--end", b_end, "seconds")->required();
  booking_create->add_option("--user", b_user, "Book on behalf of a user (admin)");
  booking_create->callback([&] {
    action = [&] {
      json body{{"project", b_project}, {"gpus", b_gpus}, {"start", b_start}, {"end", b_end}};
      if (!b_user.empty()) body["user"] = b_user;
      return run_request(g, "booking-create", make_request("POST", "/bookings", body), out, err);
    };
  });
  auto* booking_list = booking->add_subcommand("list", "List bookings");
  booking_list->add_option("--project", b_project);
  booking_list->add_option("--user", b_user);
  booking_list->callback([&] {
    action = [&] {
      auto r = make_request("GET", "/bookings");
      if (!b_project.empty()) r.query["project"] = b_project;
      if (!b_user.empty()) r.query["user"] = b_user;
      return run_request(g, "booking-list", r, out, err);
    };
  });
  auto* booking_cancel = booking->add_subcommand("cancel", "Cancel a booking");
  booking_cancel->add_option("id", b_id)->required();
  booking_cancel->callback([&] {
    action = [&] { return run_request(g, "booking-cancel", make_request("DELETE", "/bookings/" + b_id), out, err); };
  });

  // workspace
  auto* workspace = app.add_subcommand("workspace", "Workspace pods");
  workspace->require_subcommand(1);
  std::string w_project;
  bool w_gpu = false;
  auto* workspace_spawn = workspace->add_subcommand("spawn", "Start a workspace");
  workspace_spawn->add_option("--project", w_project)->required();
  workspace_spawn->add_flag("--gpu", w_gpu, "Ask for the GPUs of a current booking");
  workspace_spawn->callback([&] {
    action = [&] {
      json body{{"project", w_project}, {"wants_gpu", w_gpu}};
      return run_request(g, "workspace-spawn", make_request("POST", "/workspaces", body), out, err);
    };
  });
  auto* workspace_list = workspace->add_subcommand("list", "List workspaces of a project");
  workspace_list->add_option("--project", w_project)->required();
  workspace_list->callback([&] {
    action = [&] {
      auto r = make_request("GET", "/workspaces");
      r.query["project"] = w_project;
      return run_request(g, "workspace-list", r, out, err);
    };
  });

  // release
  auto* release = app.add_subcommand("release", "Application releases");
  release->require_subcommand(1);
  std::string r_app, r_version, r_digest, r_cluster;
  auto* release_publish = release->add_subcommand("publish", "Publish a release (admin)");
  release_publish->add_option("app", r_app)->required();
  release_publish->add_option("version", r_version)->required();
  release_publish->add_option("--digest", r_digest);
  release_publish->callback([&] {
    action = [&] {
      json body{{"app", r_app}, {"version", r_version}};
      if (!r_digest.empty()) body["digest"] = r_digest;
      return run_request(g, "release-publish", make_request("POST", "/releases", body), out, err);
    };
  });
  release->add_subcommand("list", "List releases")->callback([&] {
    action = [&] { return run_request(g, "release-list", make_request("GET", "/releases"), out, err); };
  });
  auto* release_drift = release->add_subcommand("drift", "Version drift of one cluster");
  release_drift->add_option("cluster", r_cluster)->required();
  release_drift->callback([&] {
    action = [&] {
      return run_request(g, "release-drift", make_request("GET", "/clusters/" + r_cluster + "/drift"), out, err);
    };
  });

  // admin
  auto* admin = app.add_subcommand("admin", "Admin operations");
  admin->require_subcommand(1);
  admin->add_subcommand("sweep", "Expire ended bookings now")->callback([&] {
    action = [&] { return run_request(g, "raw", make_request("POST", "/admin/sweep", json::object()), out, err); };
  });
  std::int64_t clock_to = 0;
  auto* admin_clock = admin->add_subcommand("clock", "Advance the simulated clock");
  admin_clock->add_option("to", clock_to)->required();
  admin_clock->callback([&] {
    action = [&] {
      return run_request(g, "raw", make_request("POST", "/admin/clock", json{{"to", clock_to}}), out, err);
    };
  });

  // scenario
  auto* scenario = app.add_subcommand("scenario", "Simulated federation scenarios");
  scenario->require_subcommand(1);
  std::string s_file, s_trace_out, s_golden;
  bool s_full = false;
  auto* scenario_run = scenario->add_subcommand("run", "Run a scenario file");
  scenario_run->add_option("file", s_file)->required();
  scenario_run->add_flag("--trace", s_full, "Print every trace record");
  scenario_run->add_option("--trace-out", s_trace_out, "Write the trace to a file");
  scenario_run->add_option("--golden", s_golden, "Compare the trace with a golden file");
  scenario_run->callback([&] {
    action = [&] { return run_scenario_command(g, s_file, s_full, s_trace_out, s_golden, out, err); };
  });

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitValidation;
  }
  if (!action) {
    err << app.help();
    return kExitValidation;
  }
  try {
    return action();
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::Validation ? kExitValidation : kExitFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace fedplane
