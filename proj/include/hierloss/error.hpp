#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace hierloss {

// Error with a stable machine-readable code plus a human message. The CLI
// surfaces the code in its error JSON; library callers can catch by type.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

[[noreturn]] inline void fail(std::string code, const std::string& message) {
  throw Error(std::move(code), message);
}

}  // namespace hierloss
