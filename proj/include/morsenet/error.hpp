#pragma once

#include <stdexcept>
#include <string>

namespace morsenet {

enum class ErrorKind {
  InvalidInput,
  Precondition,
  NoSolution,
  Integration,
  Unsupported,
  Parse,
  Schema,
  Shape,
  Io,
  Internal
};

const char* to_string(ErrorKind k);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace morsenet
