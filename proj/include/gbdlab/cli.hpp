#pragma once

// Batch front-end: configuration files, subcommands and their reports.

#include <istream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "gbdlab/errors.hpp"

namespace gbd::cli {

inline constexpr const char* kConfigSchema = "gbdlab-config/1";

/// Exit statuses.
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kViolation = 2;

/// Bad command line or configuration key.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Flat key = value settings. Lines starting with '#' are comments; the
/// `schema` key must name kConfigSchema.
class Config {
 public:
  static Config parse(std::istream& in, const std::string& source = "config");
  static Config load(const std::string& path);

  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string text(const std::string& key, const std::string& fallback) const;
  double number(const std::string& key, double fallback) const;
  long long integer(const std::string& key, long long fallback) const;
  std::vector<double> numbers(const std::string& key, const std::vector<double>& fallback) const;
  std::vector<std::string> list(const std::string& key) const;

 private:
  std::map<std::string, std::string> values_;
};

std::vector<std::string> commands();

/// Keys accepted by a command (besides `schema`).
std::vector<std::string> allowed_keys(const std::string& command);

/// Runs a subcommand; returns an exit status. Errors propagate as exceptions.
int run_command(const std::string& command, const Config& config);

/// Entry point used by the executable: parses flags, loads the config and
/// maps exceptions to exit status 1.
int main(int argc, char** argv);

}  // namespace gbd::cli
