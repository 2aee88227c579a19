#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>

namespace acp {

inline constexpr const char* kToolVersion = "0.1.0";

// Extended-real nonconformity scores: finite nonnegative values, or +infinity
// for "every claim correct" records.
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// Invalid or inconsistent configuration (CLI exit code 2).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or contract-violating data (CLI exit code 3).
struct DataError : std::runtime_error {
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Numeric failure during fitting or calibration (CLI exit code 4).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

enum class Task { longform, mcqa };

enum class TransformMode { multiplicative, additive, none };

inline std::string to_string(Task task) {
  return task == Task::longform ? "longform" : "mcqa";
}

inline std::string to_string(TransformMode mode) {
  switch (mode) {
    case TransformMode::multiplicative: return "multiplicative";
    case TransformMode::additive: return "additive";
    case TransformMode::none: return "none";
  }
  return "none";
}

inline Task task_from_string(const std::string& s) {
  if (s == "longform") return Task::longform;
  if (s == "mcqa") return Task::mcqa;
  throw ConfigError("unknown task \"" + s + "\" (expected longform or mcqa)");
}

inline TransformMode transform_mode_from_string(const std::string& s) {
  if (s == "multiplicative") return TransformMode::multiplicative;
  if (s == "additive") return TransformMode::additive;
  if (s == "none") return TransformMode::none;
  throw ConfigError("unknown transform_mode \"" + s +
                    "\" (expected multiplicative, additive or none)");
}

// FNV-1a 64-bit content digest, used for input auditing in run manifests.
inline std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    h ^= bytes[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace acp
