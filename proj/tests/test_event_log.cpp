#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fedplane/event_log.hpp"

using namespace fedplane;
namespace fs = std::filesystem;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("fedplane-log-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, std::string_view bytes) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

bool append(EventLog& log, const std::string& kind, Timestamp at, json payload,
            const UserId& actor = kSystemActor) {
  EventRecord r;
  r.at = at;
  r.actor = actor;
  r.kind = kind;
  r.payload = std::move(payload);
  ControlPlane next = log.plane();
  try {
    next.apply(r.command());
  } catch (const Error&) {
    return false;
  }
  r.result_digest = next.digest();
  log.append(std::move(r), std::move(next));
  return true;
}

/// Appends `n` successful records of mixed traffic.
void fill(EventLog& log, std::size_t n) {
  Timestamp t = log.plane().now();
  if (log.last_seq() == 0) {
    append(log, cmd::kAddCluster, 0,
           {{"id", "kuh"}, {"capacity", ResourceVector{4, 64, 388}}, {"bookable_gpus", 4}});
    append(log, cmd::kHeartbeat, 1, {{"cluster", "kuh"}});
    append(log, cmd::kRegisterProject, 1,
           {{"id", "ms"}, {"name", "ms"}, {"members", {"u1", "u2"}}, {"request", ResourceVector{2, 8, 8}}});
    t = 1;
  }
  std::uint64_t i = 0;
  while (log.last_seq() < n) {
    t += 5;
    switch (i++ % 4) {
      case 0:
        append(log, cmd::kHeartbeat, t, {{"cluster", "kuh"}});
        break;
      case 1:
        append(log, cmd::kCreateBooking, t,
               {{"project", "ms"}, {"gpus", 1 + i % 2}, {"start", t}, {"end", t + 12}},
               UserId(i % 3 ? "u1" : "u2"));
        break;
      case 2:
        append(log, cmd::kSpawnWorkspace, t, {{"project", "ms"}, {"wants_gpu", i % 3 != 0}},
               UserId(i % 3 ? "u1" : "u2"));
        break;
      default:
        append(log, cmd::kSweep, t, json::object());
    }
  }
}

/// Byte offsets just past each record of a log image.
std::vector<std::size_t> boundaries(std::string_view bytes) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos + 4 <= bytes.size()) {
    std::uint32_t len = 0;
    for (int k = 3; k >= 0; --k) len = (len << 8) | static_cast<unsigned char>(bytes[pos + static_cast<std::size_t>(k)]);
    pos += 4 + len;
    out.push_back(pos);
  }
  return out;
}

}  // namespace

TEST(EventLogTest, ReopenRestoresStateAndChain) {
  TempDir dir;
  std::string digest, chain;
  {
    EventLog log(dir.path(), 0);
    fill(log, 20);
    digest = log.plane().digest();
    chain = log.head_chain();
    EXPECT_EQ(log.records().front().prev_chain, kGenesisChain);
  }
  EventLog again(dir.path(), 0);
  EXPECT_EQ(again.last_seq(), 20u);
  EXPECT_EQ(again.plane().digest(), digest);
  EXPECT_EQ(again.head_chain(), chain);
  EXPECT_EQ(again.recovery().replayed, 20u);
}

TEST(EventLogTest, TruncationAtEveryByteRecoversTheCommittedPrefix) {
  TempDir src;
  std::vector<std::string> prefix_digests{ControlPlane().digest()};
  {
    EventLog log(src.path(), 0);
    fill(log, 8);
    for (const auto& r : log.records()) prefix_digests.push_back(r.result_digest);
  }
  const auto image = read_file(log_path(src.path()));
  const auto ends = boundaries(image);
  ASSERT_EQ(ends.size(), 8u);

  for (std::size_t cut = 0; cut <= image.size(); ++cut) {
    TempDir dir;
    write_file(log_path(dir.path()), std::string_view(image).substr(0, cut));
    std::size_t complete = 0;
    while (complete < ends.size() && ends[complete] <= cut) ++complete;
    EventLog log(dir.path(), 0);
    ASSERT_EQ(log.last_seq(), complete) << "cut at " << cut;
    ASSERT_EQ(log.plane().digest(), prefix_digests[complete]) << "cut at " << cut;
    std::size_t kept = complete == 0 ? 0 : ends[complete - 1];
    ASSERT_EQ(log.recovery().torn_bytes_discarded, cut - kept);
    ASSERT_EQ(fs::file_size(log_path(dir.path())), kept);
  }
}

TEST(EventLogTest, ThousandRecordReplayMatchesLastDigest) {
  TempDir dir;
  std::string last;
  {
    EventLog log(dir.path(), 100);
    fill(log, 1000);
    last = log.records().back().result_digest;
    EXPECT_EQ(log.plane().digest(), last);
  }
  {
    EventLog log(dir.path(), 100);
    EXPECT_EQ(log.recovery().snapshot_seq, 1000u);
    EXPECT_EQ(log.recovery().replayed, 0u);
    EXPECT_EQ(log.plane().digest(), last);
  }
  for (const auto& entry : fs::directory_iterator(dir.path())) {
    if (entry.path().filename().string().starts_with("snapshot-")) fs::remove(entry.path());
  }
  EventLog log(dir.path(), 0);
  EXPECT_FALSE(log.recovery().snapshot_seq);
  EXPECT_EQ(log.recovery().replayed, 1000u);
  EXPECT_EQ(log.plane().digest(), last);
}

TEST(EventLogTest, TamperedRecordReportsFirstBadSeq) {
  TempDir dir;
  {
    EventLog log(dir.path(), 0);
    fill(log, 10);
  }
  auto scan = scan_log(read_file(log_path(dir.path())));
  ASSERT_EQ(scan.records.size(), 10u);
  scan.records[4].payload["tampered"] = true;
  std::string image;
  for (const auto& r : scan.records) image += frame_record(r);
  write_file(log_path(dir.path()), image);
  try {
    EventLog log(dir.path(), 0);
    FAIL() << "expected corruption";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Corruption);
    EXPECT_NE(std::string(e.what()).find("seq 5"), std::string::npos) << e.what();
  }
}

TEST(EventLogTest, MissingRecordIsCorruption) {
  TempDir dir;
  {
    EventLog log(dir.path(), 0);
    fill(log, 6);
  }
  auto scan = scan_log(read_file(log_path(dir.path())));
  std::string image;
  for (std::size_t i = 0; i < scan.records.size(); ++i) {
    if (i != 2) image += frame_record(scan.records[i]);
  }
  write_file(log_path(dir.path()), image);
  EXPECT_THROW(EventLog(dir.path(), 0), Error);
}

TEST(EventLogTest, StaleSnapshotsAreRemovedAndBadOnesSkipped) {
  TempDir dir;
  std::vector<std::string> digests;
  {
    EventLog log(dir.path(), 100);
    fill(log, 250);
    for (const auto& r : log.records()) digests.push_back(r.result_digest);
  }
  ASSERT_TRUE(fs::exists(snapshot_path(dir.path(), 200)));
  auto image = read_file(log_path(dir.path()));
  auto ends = boundaries(image);
  write_file(log_path(dir.path()), image.substr(0, ends[149]));
  {
    EventLog log(dir.path(), 100);
    EXPECT_FALSE(fs::exists(snapshot_path(dir.path(), 200)));
    EXPECT_EQ(log.recovery().snapshot_seq, 100u);
    EXPECT_EQ(log.recovery().replayed, 50u);
    EXPECT_EQ(log.plane().digest(), digests[149]);
  }
  // A snapshot whose state no longer matches its record is not trusted.
  auto snap = json::parse(read_file(snapshot_path(dir.path(), 100)));
  snap["state"]["now"] = 999999;
  write_file(snapshot_path(dir.path(), 100), snap.dump());
  EventLog log(dir.path(), 100);
  EXPECT_FALSE(log.recovery().snapshot_seq);
  EXPECT_EQ(log.plane().digest(), digests[149]);
}
