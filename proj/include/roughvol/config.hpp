#pragma once

// Flat key = value files with # comments, and the value parsers shared with the CLI flags.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace roughvol {

class Config {
 public:
  /// Throws ConfigError naming the source and line on malformed input or repeated keys.
  static Config parse(std::istream& in, const std::string& source = "<config>");
  static Config load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Parsers raise ConfigError mentioning `key`. Reals accept fractions such as 1/100.
double parse_real(const std::string& text, const std::string& key);
std::size_t parse_count(const std::string& text, const std::string& key);
std::uint64_t parse_u64(const std::string& text, const std::string& key);
std::vector<double> parse_real_list(const std::string& text, const std::string& key);
std::vector<std::size_t> parse_count_list(const std::string& text, const std::string& key);

}  // namespace roughvol
