#include "jist/types.hpp"

#include <cmath>

namespace jist {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::unknown_variable: return "unknown_variable";
    case ErrorCode::arity_mismatch: return "arity_mismatch";
    case ErrorCode::non_edge: return "non_edge";
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::singular_system: return "singular_system";
    case ErrorCode::non_finite: return "non_finite";
    case ErrorCode::out_of_range: return "out_of_range";
    case ErrorCode::config: return "config";
    case ErrorCode::io: return "io";
    case ErrorCode::placement: return "placement";
  }
  return "unknown";
}

double unwrap_near(double angle, double reference) {
  constexpr double kTwoPi = 6.28318530717958647692;
  return angle - kTwoPi * std::round((angle - reference) / kTwoPi);
}

}  // namespace jist
