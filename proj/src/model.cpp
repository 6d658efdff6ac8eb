#include "fedplane/model.hpp"

#include <charconv>

namespace fedplane {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::Validation: return "validation";
    case ErrorCode::Unauthorized: return "unauthorized";
    case ErrorCode::NotFound: return "not-found";
    case ErrorCode::Conflict: return "conflict";
    case ErrorCode::StaleConflict: return "stale";
    case ErrorCode::InvalidTransition: return "invalid-transition";
    case ErrorCode::Precondition: return "precondition";
    case ErrorCode::Corruption: return "corruption";
  }
  return "unknown";
}

BookingConflict::BookingConflict(std::int64_t start, std::int64_t end, std::int64_t peak,
                                 std::int64_t capacity)
    : Error(ErrorCode::Conflict,
            "booking exceeds bookable capacity on [" + std::to_string(start) + "," +
                std::to_string(end) + "): " + std::to_string(peak) + " > " +
                std::to_string(capacity)),
      start_(start),
      end_(end),
      peak_(peak),
      capacity_(capacity) {}

std::string identifier_violation(std::string_view value) {
  if (value.empty()) return "empty";
  if (value.size() > kMaxIdentifierLength) return "longer than 63 characters";
  for (char c : value) {
    auto u = static_cast<unsigned char>(c);
    if (u <= 0x20 || u == 0x7f) return "contains whitespace or control characters";
    if (c == '/' || c == '?' || c == '#' || c == '&' || c == '=') {
      return std::string("contains reserved character '") + c + "'";
    }
  }
  return {};
}

std::vector<std::string> validate_resource_vector(const ResourceVector& v) {
  std::vector<std::string> out;
  auto check = [&](std::uint64_t value, const char* name) {
    if (value > kMaxResourceComponent) {
      out.push_back(std::string(name) + " exceeds " + std::to_string(kMaxResourceComponent));
    }
  };
  check(v.gpus, "gpus");
  check(v.cpu_cores, "cpu_cores");
  check(v.memory_gib, "memory_gib");
  return out;
}

ResourceVector resource_vector_from_signed(std::int64_t gpus, std::int64_t cpu_cores,
                                           std::int64_t memory_gib) {
  std::vector<std::string> violations;
  auto take = [&](std::int64_t value, const char* name) -> std::uint64_t {
    if (value < 0) {
      violations.push_back(std::string(name) + " is negative");
      return 0;
    }
    return static_cast<std::uint64_t>(value);
  };
  ResourceVector v{take(gpus, "gpus"), take(cpu_cores, "cpu_cores"),
                   take(memory_gib, "memory_gib")};
  for (auto& s : validate_resource_vector(v)) violations.push_back(std::move(s));
  if (!violations.empty()) {
    std::string msg = "invalid resource vector:";
    for (const auto& s : violations) msg += " " + s + ";";
    msg.pop_back();
    throw Error(ErrorCode::Validation, msg);
  }
  return v;
}

std::string to_string(const ResourceVector& v) {
  return "{gpus:" + std::to_string(v.gpus) + ",cpu:" + std::to_string(v.cpu_cores) +
         ",mem:" + std::to_string(v.memory_gib) + "}";
}

SemVer SemVer::parse(std::string_view text) {
  SemVer out;
  std::uint64_t* parts[3] = {&out.major, &out.minor, &out.patch};
  std::size_t pos = 0;
  for (int i = 0; i < 3; ++i) {
    std::size_t end = i < 2 ? text.find('.', pos) : text.size();
    if (end == std::string_view::npos) end = text.size();
    auto piece = text.substr(pos, end - pos);
    bool bad = piece.empty() || (piece.size() > 1 && piece.front() == '0');
    if (!bad) {
      auto [ptr, ec] = std::from_chars(piece.data(), piece.data() + piece.size(), *parts[i]);
      bad = ec != std::errc() || ptr != piece.data() + piece.size();
    }
    if (bad || (i < 2 && end == text.size())) {
      throw Error(ErrorCode::Validation,
                  "invalid semantic version '" + std::string(text) + "'");
    }
    pos = end + 1;
  }
  return out;
}

std::string SemVer::str() const {
  return std::to_string(major) + "." + std::to_string(minor) + "." + std::to_string(patch);
}

const char* to_string(Availability a) noexcept {
  return a == Availability::Available ? "Available" : "Unavailable";
}

const char* to_string(ProjectState s) noexcept {
  switch (s) {
    case ProjectState::Pending: return "Pending";
    case ProjectState::Placed: return "Placed";
    case ProjectState::Rejected: return "Rejected";
  }
  return "?";
}

const char* to_string(AppState s) noexcept {
  return s == AppState::Ready ? "Ready" : "Deploying";
}

const char* to_string(BookingStatus s) noexcept {
  switch (s) {
    case BookingStatus::Granted: return "Granted";
    case BookingStatus::Active: return "Active";
    case BookingStatus::Expired: return "Expired";
    case BookingStatus::Cancelled: return "Cancelled";
  }
  return "?";
}

bool is_legal_transition(BookingStatus from, BookingStatus to) noexcept {
  using S = BookingStatus;
  switch (from) {
    case S::Granted: return to == S::Active || to == S::Cancelled || to == S::Expired;
    case S::Active: return to == S::Expired || to == S::Cancelled;
    default: return false;
  }
}

void Booking::transition(BookingStatus to) {
  if (!is_legal_transition(status, to)) {
    throw Error(ErrorCode::InvalidTransition, "booking " + id.str() + " cannot go from " +
                                                  to_string(status) + " to " + to_string(to));
  }
  status = to;
}

const char* to_string(PodPhase p) noexcept {
  switch (p) {
    case PodPhase::Running: return "Running";
    case PodPhase::Terminating: return "Terminating";
    case PodPhase::Respawned: return "Respawned";
  }
  return "?";
}

AuthDecision authorize(const UserId& user, const ProjectId& project, std::string_view,
                       const ProjectStore& projects) {
  auto it = projects.find(project);
  if (it == projects.end()) {
    throw Error(ErrorCode::NotFound, "project " + project.str() + " not found");
  }
  if (it->second.has_member(user)) return AuthDecision::allow();
  return AuthDecision::deny("not a member");
}

}  // namespace fedplane
