#pragma once

#include <stdexcept>
#include <string>

namespace avtag {

/// Bad or missing configuration (config file, unreadable input paths).
class ConfigError : public std::runtime_error {
  public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed scan-report input encountered in strict mode.
class IngestError : public std::runtime_error {
  public:
    explicit IngestError(const std::string& what) : std::runtime_error(what) {}
};

/// Invalid data file contents (rules, wordlist, aliases, correlations) or
/// inputs that violate an operation's preconditions.
class ValidationError : public std::runtime_error {
  public:
    explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace avtag
