#include "muco/util/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace muco {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

std::vector<ConfigEntry> parse_config(const std::string& text) {
  std::vector<ConfigEntry> entries;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    ConfigEntry e{trim(t.substr(0, eq)), trim(t.substr(eq + 1)), line_no};
    if (e.key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
    entries.push_back(std::move(e));
  }
  return entries;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  std::size_t out = 0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError(key + ": expected a nonnegative integer, got '" + value + "'");
  }
  return out;
}

double parse_double(const std::string& key, const std::string& value) {
  double out = 0.0;
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || !std::isfinite(out)) {
    throw ConfigError(key + ": expected a number, got '" + value + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw ConfigError(key + ": expected true or false, got '" + value + "'");
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  const auto range = text.find("..");
  if (range != std::string::npos) {
    const auto lo = parse_size("seeds", trim(text.substr(0, range)));
    const auto hi = parse_size("seeds", trim(text.substr(range + 2)));
    if (hi < lo) throw ConfigError("seeds: empty range '" + text + "'");
    for (auto s = lo; s <= hi; ++s) seeds.push_back(s);
    return seeds;
  }
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) seeds.push_back(parse_size("seeds", trim(item)));
  if (seeds.empty()) throw ConfigError("seeds: no seeds given");
  return seeds;
}

void ConfigBinder::bind(const std::string& key, std::size_t& target) {
  setters_[key] = [&target, key](const std::string& v) { target = parse_size(key, v); };
}

void ConfigBinder::bind(const std::string& key, double& target) {
  setters_[key] = [&target, key](const std::string& v) { target = parse_double(key, v); };
}

void ConfigBinder::bind(const std::string& key, bool& target) {
  setters_[key] = [&target, key](const std::string& v) { target = parse_bool(key, v); };
}

void ConfigBinder::bind(const std::string& key, std::string& target) {
  setters_[key] = [&target](const std::string& v) { target = v; };
}

void ConfigBinder::bind(const std::string& key, std::function<void(const std::string&)> setter) {
  setters_[key] = std::move(setter);
}

void ConfigBinder::apply(const std::vector<ConfigEntry>& entries) const {
  for (const auto& e : entries) {
    auto it = setters_.find(e.key);
    if (it == setters_.end()) {
      throw ConfigError("config line " + std::to_string(e.line) + ": unknown key '" + e.key + "'");
    }
    it->second(e.value);
  }
}

}  // namespace muco
