#pragma once

#include <stdexcept>
#include <string>

namespace fml {

enum class ErrorKind {
  kDomain,     // precondition on inputs violated
  kNumerical,  // solver failure, positivity loss, non-convergence
  kConfig,     // malformed experiment configuration
  kIo,         // container or filesystem problems
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

inline void require(bool condition, ErrorKind kind, const std::string& what) {
  if (!condition) fail(kind, what);
}

}  // namespace fml
