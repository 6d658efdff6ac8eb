#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace fedplane {

enum class ErrorCode {
  Validation,         // malformed input, bad interval, bad identifier
  Unauthorized,       // authorization Deny surfaced as an error
  NotFound,
  Conflict,           // capacity or uniqueness conflict
  StaleConflict,      // optimistic version mismatch, caller may retry
  InvalidTransition,  // illegal lifecycle transition
  Precondition,       // caller violated an operation contract
  Corruption,         // persisted data failed verification
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  bool retriable() const noexcept { return code_ == ErrorCode::StaleConflict; }

 private:
  ErrorCode code_;
};

/// Booking capacity conflict. Carries the earliest maximal sub-interval of the
/// requested interval on which the request would exceed bookable capacity.
class BookingConflict : public Error {
 public:
  BookingConflict(std::int64_t start, std::int64_t end, std::int64_t peak,
                  std::int64_t capacity);

  std::int64_t conflict_start() const noexcept { return start_; }
  std::int64_t conflict_end() const noexcept { return end_; }
  std::int64_t peak() const noexcept { return peak_; }
  std::int64_t capacity() const noexcept { return capacity_; }

 private:
  std::int64_t start_;
  std::int64_t end_;
  std::int64_t peak_;
  std::int64_t capacity_;
};

}  // namespace fedplane
