#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace bdr {

/// One validation problem, tied to the source line when it came from a file.
struct ConfigIssue {
    int line = 0;  // 0 when the issue is not tied to a line
    std::string message;
};

/// A fully validated configuration: every known key resolved to a value, with
/// provenance ("default" or the source line) kept for the normalized echo.
class ValidatedConfig {
public:
    const std::string& get(const std::string& key) const;
    double get_real(const std::string& key) const;
    long long get_int(const std::string& key) const;
    bool has(const std::string& key) const;

    /// Normalized form: sections in schema order, one "key = value" per line,
    /// provenance as a trailing comment.
    std::string render() const;

    /// Raw text the config was parsed from (for hashing/manifests).
    const std::string& source_text() const { return source_; }

    std::map<std::string, std::string> values;      // "section.key" -> value
    std::map<std::string, std::string> provenance;  // "section.key" -> origin
    std::string source_;
};

struct ConfigResult {
    std::optional<ValidatedConfig> config;
    std::vector<ConfigIssue> errors;
    bool ok() const { return errors.empty(); }
    /// All messages joined, "line N: message" per entry.
    std::string error_text() const;
};

/// Parses and validates a key/value config with nested [section.sub] headers.
/// Unknown keys are rejected; missing keys take schema defaults; value
/// constraints are checked. Errors are aggregated rather than first-fail.
ConfigResult validate_config(const std::filesystem::path& path);
ConfigResult validate_config_text(const std::string& text);

/// validate_config that throws ConfigError with the aggregated messages.
ValidatedConfig load_config(const std::filesystem::path& path);

}  // namespace bdr
