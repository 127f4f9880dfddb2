#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace muco {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// One `key = value` entry with its source line.
struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

/// Parses `key = value` lines. Blank lines and lines starting with '#' are
/// skipped; anything else without '=' is an error.
std::vector<ConfigEntry> parse_config(const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

/// Dispatches entries to typed setters and rejects unknown keys.
class ConfigBinder {
 public:
  void bind(const std::string& key, std::size_t& target);
  void bind(const std::string& key, double& target);
  void bind(const std::string& key, bool& target);
  void bind(const std::string& key, std::string& target);
  void bind(const std::string& key, std::function<void(const std::string&)> setter);

  void apply(const std::vector<ConfigEntry>& entries) const;

 private:
  std::map<std::string, std::function<void(const std::string&)>> setters_;
};

std::size_t parse_size(const std::string& key, const std::string& value);
double parse_double(const std::string& key, const std::string& value);
bool parse_bool(const std::string& key, const std::string& value);
/// "1..10", "1,2,5" or a single number.
std::vector<std::uint64_t> parse_seed_list(const std::string& text);

}  // namespace muco
