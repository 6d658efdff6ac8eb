#pragma once

// Append-only, hash-chained mutation log with periodic state snapshots.
//
// On disk, `events.log` is a sequence of records, each a little-endian u32
// byte length followed by that many bytes of JSON. A record's `chain` is
// sha256(prev_chain || canonical JSON of the record without `chain`); the
// first record chains from 64 zeros. Snapshots live next to the log as
// `snapshot-<seq>.json` and hold the plane state after record <seq>.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fedplane/control_plane.hpp"

namespace fedplane {

inline const std::string kGenesisChain(64, '0');

struct EventRecord {
  std::uint64_t seq = 0;
  Timestamp at = 0;
  UserId actor;
  std::string kind;
  json payload = json::object();
  std::string result_digest;  // plane digest after applying this record

  // Idempotency bookkeeping so the response cache survives restarts.
  std::optional<std::string> idempotency_key;
  std::string request_hash;
  int status = 0;
  json response;

  std::string prev_chain;
  std::string chain;

  Command command() const { return {kind, at, actor, payload}; }
};

void to_json(json& j, const EventRecord& r);
void from_json(const json& j, EventRecord& r);

/// sha256(prev_chain || canonical body), where the body omits `chain`.
std::string chain_digest(const EventRecord& r);

/// Encodes one framed record.
std::string frame_record(const EventRecord& r);

struct LogScan {
  std::vector<EventRecord> records;
  std::uint64_t valid_bytes = 0;  // offset just past the last complete record
  std::uint64_t torn_bytes = 0;   // trailing bytes of an incomplete record
};

/// Parses a log image. A truncated final record is reported as torn. A
/// complete record that fails to parse, skips a seq or breaks the chain
/// throws Corruption naming that seq.
LogScan scan_log(std::string_view bytes);

struct RecoveryReport {
  std::uint64_t records = 0;
  std::uint64_t replayed = 0;                 // records applied after the snapshot
  std::optional<std::uint64_t> snapshot_seq;  // snapshot used, if any
  std::uint64_t torn_bytes_discarded = 0;
};

class EventLog {
 public:
  /// Opens (creating if needed) the log in `dir`, discards a torn tail, and
  /// rebuilds the plane from the newest usable snapshot plus replay. Replay
  /// starts from a default-configured plane; configuration changes are
  /// records like any other. Every replayed record must reproduce its
  /// result_digest. Throws Corruption.
  explicit EventLog(std::filesystem::path dir, std::uint64_t snapshot_every = 100);
  ~EventLog();
  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;

  const ControlPlane& plane() const noexcept { return plane_; }
  const std::vector<EventRecord>& records() const noexcept { return records_; }
  std::uint64_t last_seq() const noexcept { return records_.size(); }
  const std::string& head_chain() const noexcept;
  const RecoveryReport& recovery() const noexcept { return report_; }
  const std::filesystem::path& dir() const noexcept { return dir_; }

  /// Fills seq and chain fields, writes and syncs the record, then installs
  /// `next` as the current plane. The caller has already applied the record's
  /// command to `next` and set result_digest.
  const EventRecord& append(EventRecord record, ControlPlane next);

  /// Writes snapshot-<last_seq>.json now.
  void snapshot();

 private:
  void recover();
  void write_bytes(const std::string& bytes);

  std::filesystem::path dir_;
  std::uint64_t snapshot_every_;
  int fd_ = -1;
  ControlPlane plane_;
  std::vector<EventRecord> records_;
  RecoveryReport report_;
};

std::filesystem::path log_path(const std::filesystem::path& dir);
std::filesystem::path snapshot_path(const std::filesystem::path& dir, std::uint64_t seq);

}  // namespace fedplane
