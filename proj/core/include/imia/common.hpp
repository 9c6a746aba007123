#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace imia {

/// Row-major so that one sample is one contiguous row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Row index into a parent Dataset.
using Index = std::int64_t;

inline constexpr double kProbEpsilon = 1e-12;
inline constexpr double kSigmaFloor = 1e-6;

// Error hierarchy. Everything derives from Error so callers can catch once.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual std::string_view kind() const noexcept { return "error"; }
};

class ShapeError : public Error {
 public:
  using Error::Error;
  std::string_view kind() const noexcept override { return "shape_error"; }
};

class DomainError : public Error {
 public:
  using Error::Error;
  std::string_view kind() const noexcept override { return "domain_error"; }
};

class ParseError : public Error {
 public:
  using Error::Error;
  std::string_view kind() const noexcept override { return "parse_error"; }
};

class FormatError : public Error {
 public:
  using Error::Error;
  std::string_view kind() const noexcept override { return "format_error"; }
};

class ConfigError : public Error {
 public:
  using Error::Error;
  std::string_view kind() const noexcept override { return "config_error"; }
};

class InternalError : public Error {
 public:
  using Error::Error;
  std::string_view kind() const noexcept override { return "internal_error"; }
};

enum class LogLevel { kInfo, kWarning };

using LogSink = std::function<void(LogLevel, std::string_view)>;

/// Replaces the process-wide log sink and returns the previous one. The
/// default sink writes warnings to stderr and drops info messages.
LogSink set_log_sink(LogSink sink);
void log(LogLevel level, std::string_view message);
inline void log_warning(std::string_view message) { log(LogLevel::kWarning, message); }

/// splitmix64 finalizer; used to derive independent child seeds.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Runs body(i) for i in [0, count) on up to `jobs` threads. Results must be
/// written to per-index slots; the first exception thrown is rethrown.
void parallel_for(std::size_t count, int jobs, const std::function<void(std::size_t)>& body);

}  // namespace imia
