#include "citrus/experiments/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "citrus/errors.hpp"

namespace citrus::experiments {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

double parse_real(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
  if (t == "-inf") return -std::numeric_limits<double>::infinity();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || end != t.c_str() + t.size() || errno == ERANGE || std::isnan(v))
    throw ParseError(what + ": '" + text + "' is not a number");
  return v;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

Config::Config(std::map<std::string, std::string> defaults) : values_(std::move(defaults)) {}

void Config::assign(const std::string& key, const std::string& value, const std::string& where) {
  auto it = values_.find(key);
  if (it == values_.end()) throw ParseError(where + ": unknown key '" + key + "'");
  it->second = value;
}

void Config::merge_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    const std::string where = origin + ":" + std::to_string(lineno);
    if (eq == std::string::npos) throw ParseError(where + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(where + ": empty key");
    assign(key, trim(line.substr(eq + 1)), where);
  }
}

void Config::merge_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  merge_text(buf.str(), path);
}

void Config::set(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ParseError("--set '" + assignment + "': expected key=value");
  assign(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)), "--set");
}

const std::string& Config::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ParseError("missing config key '" + key + "'");
  return it->second;
}

double Config::real(const std::string& key) const { return parse_real(str(key), key); }

std::size_t Config::size(const std::string& key) const {
  const double v = real(key);
  if (v < 0 || v != std::floor(v) || v > 9.0e15)
    throw ParseError(key + ": expected a nonnegative integer, got '" + str(key) + "'");
  return static_cast<std::size_t>(v);
}

std::uint64_t Config::u64(const std::string& key) const {
  const std::string& t = str(key);
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
  if (t.empty() || t[0] == '-' || end != t.c_str() + t.size() || errno == ERANGE)
    throw ParseError(key + ": expected an unsigned integer, got '" + t + "'");
  return v;
}

bool Config::flag(const std::string& key) const {
  const std::string& t = str(key);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ParseError(key + ": expected true or false, got '" + t + "'");
}

std::vector<double> Config::reals(const std::string& key) const {
  std::vector<double> out;
  for (const auto& item : split_list(str(key))) out.push_back(parse_real(item, key));
  return out;
}

std::vector<std::size_t> Config::sizes(const std::string& key) const {
  std::vector<std::size_t> out;
  for (double v : reals(key)) {
    if (v < 0 || v != std::floor(v))
      throw ParseError(key + ": expected nonnegative integers, got '" + str(key) + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  return out;
}

nlohmann::json Config::echo() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : values_) j[k] = v;
  return j;
}

}  // namespace citrus::experiments
