#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace mn {

using i64 = std::int64_t;
using u64 = std::uint64_t;

// Bad input: malformed specs, out-of-range arguments, inconsistent files.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical failure: non-finite loss, degenerate inputs to a numeric routine.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

// Artifact mismatch: checkpoint/graph/embedding files that do not fit together.
class ArtifactError : public std::runtime_error {
 public:
  explicit ArtifactError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace mn
