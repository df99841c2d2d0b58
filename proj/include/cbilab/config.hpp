#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

namespace cbilab {

// Flat key-value experiment configs with TOML-style [section] scoping:
// numbers, quoted strings, booleans and numeric arrays. Section keys are
// flattened to "section.key".
struct ConfigValue {
  std::variant<double, std::string, bool, std::vector<double>> value;

  double as_number() const;
  const std::string& as_string() const;
  bool as_bool() const;
  const std::vector<double>& as_array() const;
};

class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  double number(const std::string& key) const;
  double number_or(const std::string& key, double fallback) const;
  std::string str(const std::string& key) const;
  std::string str_or(const std::string& key, const std::string& fallback) const;
  bool flag_or(const std::string& key, bool fallback) const;
  std::vector<double> array(const std::string& key) const;
  std::vector<double> array_or(const std::string& key, std::vector<double> fallback) const;

  // all numeric keys under a section, e.g. preset parameter maps
  std::map<std::string, double> section_numbers(const std::string& section) const;

 private:
  std::map<std::string, ConfigValue> values_;
};

}  // namespace cbilab
