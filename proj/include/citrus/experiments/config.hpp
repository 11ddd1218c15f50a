#pragma once

// Flat `key = value` experiment configuration with command-line overrides.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace citrus::experiments {

/// Settings for one command. Every accepted key has a default; files and
/// overrides may only set keys that already exist. Parse problems throw
/// ParseError.
class Config {
 public:
  Config() = default;
  explicit Config(std::map<std::string, std::string> defaults);

  /// Applies `key = value` lines; `#` starts a comment. `origin` names the
  /// source in error messages.
  void merge_text(const std::string& text, const std::string& origin);
  void merge_file(const std::string& path);
  /// Applies a single `key=value` override.
  void set(const std::string& assignment);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& str(const std::string& key) const;
  double real(const std::string& key) const;
  std::size_t size(const std::string& key) const;
  std::uint64_t u64(const std::string& key) const;
  bool flag(const std::string& key) const;
  std::vector<double> reals(const std::string& key) const;
  std::vector<std::size_t> sizes(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }
  nlohmann::json echo() const;

 private:
  void assign(const std::string& key, const std::string& value, const std::string& where);
  std::map<std::string, std::string> values_;
};

double parse_real(const std::string& text, const std::string& what);
std::vector<std::string> split_list(const std::string& text);

}  // namespace citrus::experiments
