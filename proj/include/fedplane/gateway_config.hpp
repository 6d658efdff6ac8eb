#pragma once

// Gateway configuration file: plain text, one `key = value` per line, '#'
// comments. Gateway keys:
//
//   listen = 127.0.0.1:8080
//   data_dir = /var/lib/fedplane
//   clock = live | simulated
//   tokens = tokens.txt        # lines of "<token> <user>", relative to this file
//   token = s3cret alice       # inline token entry, may repeat
//   snapshot_every = 100
//
// Any other key is a control-plane setting (heartbeat_interval, miss_threshold,
// sync_mode, sync_period, poll_interval, max_booking_duration,
// max_future_bookings, admins, utilization_window).
//
// FEDPLANE_LISTEN and FEDPLANE_DATA_DIR override the file.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>

#include "fedplane/control_plane.hpp"

namespace fedplane {

enum class ClockMode { Live, Simulated };
const char* to_string(ClockMode m) noexcept;
ClockMode clock_mode_from_string(std::string_view s);

struct GatewayConfig {
  std::string listen = "127.0.0.1:8080";
  std::filesystem::path data_dir = "fedplane-data";
  ClockMode clock = ClockMode::Live;
  std::map<std::string, UserId> tokens;
  std::uint64_t snapshot_every = 100;
  PlaneConfig plane;

  static GatewayConfig parse(std::string_view text,
                             const std::filesystem::path& base_dir = ".");
  static GatewayConfig load(const std::filesystem::path& path);

  /// Applies FEDPLANE_LISTEN and FEDPLANE_DATA_DIR when set.
  void apply_env(const std::function<const char*(const char*)>& getenv);

  /// Host and port of `listen`. Throws Validation on a malformed address.
  std::pair<std::string, int> listen_address() const;
};

/// Reads "<token> <user>" lines.
std::map<std::string, UserId> parse_token_table(std::string_view text);

}  // namespace fedplane
