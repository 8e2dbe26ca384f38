#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rsssm {

/// Malformed or truncated on-disk data. `offset` is the byte position where
/// parsing stopped.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : std::runtime_error(what + " (at byte offset " + std::to_string(offset) + ")"),
        message_(what),
        offset_(offset) {}

  std::uint64_t offset() const { return offset_; }
  /// Description without the offset suffix.
  const std::string& message() const { return message_; }

 private:
  std::string message_;
  std::uint64_t offset_;
};

}  // namespace rsssm
