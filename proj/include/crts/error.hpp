#pragma once

#include <stdexcept>
#include <string>

namespace crts {

// Carries a stable machine-readable code next to the human message.
// Codes are part of the public contract (CLI exit handling, tests).
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

}  // namespace crts
