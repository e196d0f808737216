#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mito {

/// Coarse failure classes; the CLI maps each to an exit code and prints the
/// category name on its one-line diagnostic.
enum class ErrorCategory { shape, value, io, format, config, numeric };

inline std::string_view category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::shape: return "shape";
    case ErrorCategory::value: return "value";
    case ErrorCategory::io: return "io";
    case ErrorCategory::format: return "format";
    case ErrorCategory::config: return "config";
    case ErrorCategory::numeric: return "numeric";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory c, const std::string& what) {
  throw Error(c, what);
}

}  // namespace mito
