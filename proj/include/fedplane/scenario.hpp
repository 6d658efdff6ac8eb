#pragma once

// Scenario scripts and the simulated federation that executes them.
//
// Scenario file format, one item per line, '#' starts a comment:
//
//   seed 42
//   config heartbeat_interval=10 miss_threshold=3 poll_interval=30
//   cluster kuh gpus=2 cpu=64 mem=388 bookable=2 install=workspace@1.0.0 delay=0
//   0   register ms-thesis members=u1 gpus=2 cpu=16 mem=64
//   100 book b1 user=u1 project=ms-thesis gpus=2 start=100 end=200
//   150 spawn w1 user=u1 project=ms-thesis gpu=yes
//   200 assert workspace user=u1 project=ms-thesis gpus=0 phase=Respawned
//
// Timed lines are `<time> <command> <args...>` in non-decreasing time order.
// Commands: register, quota, delete, book, cancel, spawn, partition, publish,
// sweep, advance, workload, assert. Any command except assert and workload
// accepts expect=<ok|error-code> and fails the run when the outcome differs.

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "fedplane/control_plane.hpp"
#include "fedplane/sim.hpp"

namespace fedplane::sim {

struct ClusterSpec {
  ClusterId id;
  std::string display_name;
  ResourceVector capacity;
  std::uint64_t bookable_gpus = 0;
  std::map<std::string, SemVer> installed;
  Timestamp delay = 0;
};

struct ScenarioCommand {
  Timestamp at = 0;
  std::string verb;
  std::vector<std::string> args;              // positional
  std::map<std::string, std::string> options;  // key=value
  std::size_t line = 0;
  std::string text;

  const std::string* option(const std::string& key) const;
  std::string option_or(const std::string& key, std::string fallback) const;
  std::int64_t int_option(const std::string& key) const;
  std::int64_t int_option_or(const std::string& key, std::int64_t fallback) const;
};

struct Scenario {
  std::uint64_t seed = 0;
  PlaneConfig config;
  std::vector<ClusterSpec> clusters;
  std::vector<ScenarioCommand> script;

  /// Parses the text format. Throws Validation with the offending line number.
  static Scenario parse(std::string_view text);
  static Scenario load(const std::string& path);

  /// Distinct cluster ids and time-ordered commands.
  void validate() const;
};

struct Trace {
  std::vector<std::string> records;
  bool failed = false;
  std::string failure;
  std::string final_digest;

  /// One record per line, newline-terminated.
  std::string text() const;
};

/// A simulated federation wired to a fresh control plane: clusters heartbeat
/// and poll the registry on their own, bookings schedule their expiry, and
/// partitions silence clusters.
class FederationSim {
 public:
  explicit FederationSim(const Scenario& scenario);

  ControlPlane& plane() noexcept { return plane_; }
  const ControlPlane& plane() const noexcept { return plane_; }
  Simulator& simulator() noexcept { return sim_; }
  Timestamp now() const noexcept { return sim_.now(); }
  const Trace& trace() const noexcept { return trace_; }
  Trace take_trace();

  /// Cuts `cluster` off during [from, to): no heartbeats and no polls strictly
  /// inside the interval; a heartbeat and a rejoin poll fire at `to`.
  /// Overlapping partitions merge. Throws Validation if from >= to or from < now.
  void partition(const ClusterId& cluster, Timestamp from, Timestamp to);
  bool cut_off(const ClusterId& cluster, Timestamp t) const;

  /// Fires every event due up to `t`.
  void run_until(Timestamp t);

  /// Applies a command through the control plane at the current time, traces
  /// it, and schedules follow-up events. Errors are traced and rethrown.
  json submit(const std::string& kind, const UserId& actor, json payload);

  /// Runs one script line. Returns false once an assertion has failed.
  bool execute(const ScenarioCommand& command);

 private:
  void record(Timestamp at, std::uint64_t seq, std::string_view tag, const json& detail);
  void on_heartbeat(const SimEvent& ev);
  void on_poll(const SimEvent& ev);
  void on_expiry(const SimEvent& ev);
  void on_partition_start(const SimEvent& ev);
  void on_partition_end(const SimEvent& ev);
  void send_heartbeat(const ClusterId& cluster, Timestamp sent_at);
  void send_poll(const ClusterId& cluster, Timestamp instant);
  void schedule_expiry(const json& booking);
  json run_command(const ScenarioCommand& c);
  std::optional<std::string> check_assert(const ScenarioCommand& c);
  void run_workload(const ScenarioCommand& c);
  void fail(const ScenarioCommand& c, const std::string& why);

  Scenario scenario_;
  Simulator sim_;
  ControlPlane plane_;
  PartitionTable partitions_;
  std::map<ClusterId, Timestamp> delays_;
  std::map<std::string, BookingId> booking_labels_;
  std::map<std::string, PodId> pod_labels_;
  std::mt19937_64 rng_;
  Trace trace_;
};

/// Executes a scenario against a fresh control plane. Deterministic: the same
/// scenario always yields a byte-identical trace.
Trace run_scenario(const Scenario& scenario);

}  // namespace fedplane::sim
