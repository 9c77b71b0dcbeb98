#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lagdelay {

enum class ErrorCode {
  invalid_argument,
  ill_conditioned,
  singular_input,
  degenerate_b,
  zero_information,
  flat_correlation,
  no_improvement,
  infeasible,
  io,
};

std::string_view to_string(ErrorCode code);

/// Exception carrying a machine-readable code so callers (the CLI in
/// particular) can map failure classes onto exit statuses.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw Error(ErrorCode::invalid_argument, what);
}

}  // namespace lagdelay
