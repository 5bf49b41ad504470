#include "roughvol/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "roughvol/errors.hpp"

namespace roughvol {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& text, const char* expected) {
  throw ConfigError("value for '" + key + "' is not " + expected + ": '" + text + "'");
}

double plain_real(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  try {
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used == t.size() && std::isfinite(v)) return v;
  } catch (const std::exception&) {
  }
  bad_value(key, text, "a finite number");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ',')) out.push_back(trim(item));
  return out;
}

}  // namespace

Config Config::parse(std::istream& in, const std::string& source) {
  Config cfg;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = source + ":" + std::to_string(line_no);
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    for (char c : key) {
      if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_')) {
        throw ConfigError(where + ": invalid character in key '" + key + "'");
      }
    }
    if (cfg.has(key)) throw ConfigError(where + ": key '" + key + "' given twice");
    cfg.values_[key] = value;
  }
  return cfg;
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse(in, path);
}

const std::string& Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

double parse_real(const std::string& text, const std::string& key) {
  const auto slash = text.find('/');
  if (slash == std::string::npos) return plain_real(text, key);
  const double num = plain_real(text.substr(0, slash), key);
  const double den = plain_real(text.substr(slash + 1), key);
  if (den == 0) bad_value(key, text, "a fraction with nonzero denominator");
  return num / den;
}

std::uint64_t parse_u64(const std::string& text, const std::string& key) {
  const std::string t = trim(text);
  if (t.empty() || !std::all_of(t.begin(), t.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
    bad_value(key, text, "a non-negative integer");
  }
  try {
    return std::stoull(t);
  } catch (const std::exception&) {
    bad_value(key, text, "a 64-bit integer");
  }
}

std::size_t parse_count(const std::string& text, const std::string& key) {
  const std::uint64_t v = parse_u64(text, key);
  if (v > std::numeric_limits<std::size_t>::max()) bad_value(key, text, "a representable count");
  return static_cast<std::size_t>(v);
}

std::vector<double> parse_real_list(const std::string& text, const std::string& key) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(parse_real(item, key));
  if (out.empty()) bad_value(key, text, "a comma-separated list");
  return out;
}

std::vector<std::size_t> parse_count_list(const std::string& text, const std::string& key) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(text)) out.push_back(parse_count(item, key));
  if (out.empty()) bad_value(key, text, "a comma-separated list");
  return out;
}

}  // namespace roughvol
