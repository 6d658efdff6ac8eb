#include "fedplane/gateway_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace fedplane {

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p);
  if (!in) throw Error(ErrorCode::NotFound, "cannot open " + p.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void add_token(std::map<std::string, UserId>& table, const std::string& line) {
  std::istringstream in(line);
  std::string token;
  std::string user;
  std::string extra;
  if (!(in >> token >> user) || (in >> extra)) {
    throw Error(ErrorCode::Validation, "token entries are '<token> <user>'");
  }
  table[token] = make_id<UserId>(user);
}

}  // namespace

const char* to_string(ClockMode m) noexcept {
  return m == ClockMode::Live ? "live" : "simulated";
}

ClockMode clock_mode_from_string(std::string_view s) {
  if (s == "live") return ClockMode::Live;
  if (s == "simulated") return ClockMode::Simulated;
  throw Error(ErrorCode::Validation, "clock must be live or simulated, got '" + std::string(s) + "'");
}

std::map<std::string, UserId> parse_token_table(std::string_view text) {
  std::map<std::string, UserId> table;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    line = trim(line.substr(0, line.find('#')));
    if (!line.empty()) add_token(table, line);
  }
  return table;
}

GatewayConfig GatewayConfig::parse(std::string_view text, const std::filesystem::path& base_dir) {
  GatewayConfig cfg;
  std::map<std::string, std::string> plane;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    auto line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::Validation,
                  "config line " + std::to_string(line_no) + ": expected key = value");
    }
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key == "listen") {
      cfg.listen = value;
    } else if (key == "data_dir") {
      std::filesystem::path p(value);
      cfg.data_dir = p.is_absolute() ? p : base_dir / p;
    } else if (key == "clock") {
      cfg.clock = clock_mode_from_string(value);
    } else if (key == "tokens") {
      std::filesystem::path p(value);
      for (auto& [t, u] : parse_token_table(read_text(p.is_absolute() ? p : base_dir / p))) {
        cfg.tokens[t] = u;
      }
    } else if (key == "token") {
      add_token(cfg.tokens, value);
    } else if (key == "snapshot_every") {
      std::uint64_t n = 0;
      auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), n);
      if (ec != std::errc() || ptr != value.data() + value.size()) {
        throw Error(ErrorCode::Validation, "snapshot_every expects a non-negative integer");
      }
      cfg.snapshot_every = n;
    } else {
      plane[key] = value;
    }
  }
  cfg.plane = plane_config_from_strings(plane);
  cfg.listen_address();
  return cfg;
}

GatewayConfig GatewayConfig::load(const std::filesystem::path& path) {
  return parse(read_text(path), path.parent_path().empty() ? "." : path.parent_path());
}

void GatewayConfig::apply_env(const std::function<const char*(const char*)>& getenv) {
  if (const char* v = getenv("FEDPLANE_LISTEN"); v && *v) listen = v;
  if (const char* v = getenv("FEDPLANE_DATA_DIR"); v && *v) data_dir = v;
  listen_address();
}

std::pair<std::string, int> GatewayConfig::listen_address() const {
  auto colon = listen.rfind(':');
  if (colon == std::string::npos || colon == 0) {
    throw Error(ErrorCode::Validation, "listen must be host:port, got '" + listen + "'");
  }
  int port = 0;
  auto digits = std::string_view(listen).substr(colon + 1);
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), port);
  if (ec != std::errc() || ptr != digits.data() + digits.size() || port < 0 || port > 65535) {
    throw Error(ErrorCode::Validation, "bad port in listen address '" + listen + "'");
  }
  return {listen.substr(0, colon), port};
}

}  // namespace fedplane
