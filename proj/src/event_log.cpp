#include "fedplane/event_log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fedplane/digest.hpp"
#include "fedplane/serialize.hpp"

namespace fedplane {

namespace fs = std::filesystem;

namespace {

json body_json(const EventRecord& r) {
  json j{{"seq", r.seq},
         {"at", r.at},
         {"actor", r.actor},
         {"kind", r.kind},
         {"payload", r.payload},
         {"result_digest", r.result_digest},
         {"prev_chain", r.prev_chain}};
  if (r.idempotency_key) {
    j["idempotency_key"] = *r.idempotency_key;
    j["request_hash"] = r.request_hash;
    j["status"] = r.status;
    j["response"] = r.response;
  }
  return j;
}

Error corrupt(std::uint64_t seq, const std::string& why) {
  return Error(ErrorCode::Corruption,
               "event log corrupt at seq " + std::to_string(seq) + ": " + why);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void sync_fd(int fd) {
  if (::fsync(fd) != 0) {
    throw Error(ErrorCode::Corruption, std::string("fsync failed: ") + std::strerror(errno));
  }
}

}  // namespace

fs::path log_path(const fs::path& dir) { return dir / "events.log"; }

fs::path snapshot_path(const fs::path& dir, std::uint64_t seq) {
  return dir / ("snapshot-" + std::to_string(seq) + ".json");
}

void to_json(json& j, const EventRecord& r) {
  j = body_json(r);
  j["chain"] = r.chain;
}

void from_json(const json& j, EventRecord& r) {
  r.seq = required<std::uint64_t>(j, "seq");
  r.at = required<Timestamp>(j, "at");
  r.actor = required<UserId>(j, "actor");
  r.kind = required<std::string>(j, "kind");
  r.payload = j.at("payload");
  r.result_digest = required<std::string>(j, "result_digest");
  r.prev_chain = required<std::string>(j, "prev_chain");
  r.chain = required<std::string>(j, "chain");
  if (j.contains("idempotency_key")) {
    r.idempotency_key = required<std::string>(j, "idempotency_key");
    r.request_hash = required<std::string>(j, "request_hash");
    r.status = required<int>(j, "status");
    r.response = j.at("response");
  }
}

std::string chain_digest(const EventRecord& r) {
  return sha256_hex(r.prev_chain + body_json(r).dump());
}

std::string frame_record(const EventRecord& r) {
  auto body = json(r).dump();
  auto n = static_cast<std::uint32_t>(body.size());
  std::string out;
  out.reserve(4 + body.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((n >> (8 * i)) & 0xff));
  out += body;
  return out;
}

LogScan scan_log(std::string_view bytes) {
  LogScan scan;
  std::size_t pos = 0;
  std::string prev = kGenesisChain;
  while (pos < bytes.size()) {
    if (bytes.size() - pos < 4) break;
    std::uint32_t n = 0;
    for (int i = 0; i < 4; ++i) {
      n |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes[pos + i])) << (8 * i);
    }
    if (bytes.size() - pos - 4 < n) break;
    const auto expected = scan.records.size() + 1;
    EventRecord r;
    try {
      r = json::parse(bytes.substr(pos + 4, n)).get<EventRecord>();
    } catch (const std::exception& e) {
      throw corrupt(expected, std::string("unreadable record: ") + e.what());
    }
    if (r.seq != expected) {
      throw corrupt(expected, "found seq " + std::to_string(r.seq));
    }
    if (r.prev_chain != prev || chain_digest(r) != r.chain) {
      throw corrupt(r.seq, "hash chain break");
    }
    prev = r.chain;
    scan.records.push_back(std::move(r));
    pos += 4 + n;
  }
  scan.valid_bytes = pos;
  scan.torn_bytes = bytes.size() - pos;
  return scan;
}

EventLog::EventLog(fs::path dir, std::uint64_t snapshot_every)
    : dir_(std::move(dir)), snapshot_every_(snapshot_every) {
  fs::create_directories(dir_);
  recover();
  fd_ = ::open(log_path(dir_).c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd_ < 0) {
    throw Error(ErrorCode::Corruption, "cannot open " + log_path(dir_).string() + ": " +
                                           std::strerror(errno));
  }
}

EventLog::~EventLog() {
  if (fd_ >= 0) ::close(fd_);
}

const std::string& EventLog::head_chain() const noexcept {
  return records_.empty() ? kGenesisChain : records_.back().chain;
}

void EventLog::recover() {
  const auto path = log_path(dir_);
  auto scan = scan_log(read_file(path));
  if (scan.torn_bytes > 0) {
    fs::resize_file(path, scan.valid_bytes);
    report_.torn_bytes_discarded = scan.torn_bytes;
  }
  records_ = std::move(scan.records);
  report_.records = records_.size();

  // Newest snapshot that the surviving log still vouches for. Snapshots past
  // the end of the log (the log lost its tail) are stale and removed.
  std::vector<std::uint64_t> snaps;
  if (fs::exists(dir_)) {
    for (const auto& entry : fs::directory_iterator(dir_)) {
      auto name = entry.path().filename().string();
      if (!name.starts_with("snapshot-") || !name.ends_with(".json")) continue;
      try {
        snaps.push_back(std::stoull(name.substr(9, name.size() - 14)));
      } catch (const std::exception&) {
      }
    }
  }
  std::sort(snaps.rbegin(), snaps.rend());
  plane_ = ControlPlane();
  std::uint64_t start = 0;
  for (auto seq : snaps) {
    if (seq > records_.size()) {
      fs::remove(snapshot_path(dir_, seq));
      continue;
    }
    try {
      auto doc = json::parse(read_file(snapshot_path(dir_, seq)));
      if (doc.at("seq").get<std::uint64_t>() != seq) continue;
      if (seq > 0 && doc.at("chain").get<std::string>() != records_[seq - 1].chain) continue;
      auto restored = ControlPlane::from_state_json(doc.at("state"));
      if (seq > 0 && restored.digest() != records_[seq - 1].result_digest) continue;
      plane_ = std::move(restored);
      start = seq;
      report_.snapshot_seq = seq;
      break;
    } catch (const std::exception&) {
      // An unreadable snapshot is skipped; the log alone can rebuild state.
    }
  }

  for (std::uint64_t i = start; i < records_.size(); ++i) {
    const auto& r = records_[i];
    try {
      plane_.apply(r.command());
    } catch (const Error& e) {
      throw corrupt(r.seq, std::string("replay failed: ") + e.what());
    }
    if (plane_.digest() != r.result_digest) throw corrupt(r.seq, "state digest mismatch");
    ++report_.replayed;
  }
}

void EventLog::write_bytes(const std::string& bytes) {
  std::size_t done = 0;
  while (done < bytes.size()) {
    auto n = ::write(fd_, bytes.data() + done, bytes.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::Corruption, std::string("log write failed: ") + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
  sync_fd(fd_);
}

const EventRecord& EventLog::append(EventRecord record, ControlPlane next) {
  record.seq = records_.size() + 1;
  record.prev_chain = head_chain();
  record.chain = chain_digest(record);
  write_bytes(frame_record(record));
  records_.push_back(std::move(record));
  plane_ = std::move(next);
  if (snapshot_every_ > 0 && records_.size() % snapshot_every_ == 0) snapshot();
  return records_.back();
}

void EventLog::snapshot() {
  json doc{{"seq", last_seq()}, {"chain", head_chain()}, {"state", plane_.state_json()}};
  auto final_path = snapshot_path(dir_, last_seq());
  auto tmp = final_path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << doc.dump();
    out.flush();
    if (!out) throw Error(ErrorCode::Corruption, "cannot write snapshot " + tmp.string());
  }
  fs::rename(tmp, final_path);
}

}  // namespace fedplane
