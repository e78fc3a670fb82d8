#pragma once

#include <stdexcept>
#include <string>

namespace mtlab {

/// Every failure raised by the library carries a stable kind tag
/// (e.g. "NoSignChange") so the CLI can emit structured error records.
class Error : public std::runtime_error {
public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

[[noreturn]] inline void fail(const std::string& kind, const std::string& what) {
  throw Error(kind, kind + ": " + what);
}

}  // namespace mtlab
