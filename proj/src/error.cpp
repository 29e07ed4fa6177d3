#include "mtae/error.hpp"

namespace mtae {

std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::parse: return "parse";
    case ErrorCategory::range: return "range";
    case ErrorCategory::io: return "io";
    case ErrorCategory::config: return "config";
    case ErrorCategory::shape: return "shape";
    case ErrorCategory::state: return "state";
  }
  return "unknown";
}

}  // namespace mtae
