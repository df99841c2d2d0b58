#include "cbilab/config.hpp"

#include <cctype>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace cbilab {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

ConfigValue parse_value(const std::string& raw, const std::string& key) {
  std::string v = trim(raw);
  if (v.empty()) throw std::invalid_argument("config: empty value for '" + key + "'");
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"')
      throw std::invalid_argument("config: unterminated string for '" + key + "'");
    return {v.substr(1, v.size() - 2)};
  }
  if (v == "true") return {true};
  if (v == "false") return {false};
  if (v.front() == '[') {
    if (v.back() != ']') throw std::invalid_argument("config: unterminated array for '" + key + "'");
    std::vector<double> arr;
    std::string body = v.substr(1, v.size() - 2);
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;
      std::size_t used = 0;
      double x = std::stod(item, &used);
      if (used != item.size())
        throw std::invalid_argument("config: bad array entry '" + item + "' for '" + key + "'");
      arr.push_back(x);
    }
    return {arr};
  }
  std::size_t used = 0;
  double x = std::stod(v, &used);
  if (used != v.size())
    throw std::invalid_argument("config: bad value '" + v + "' for '" + key + "'");
  return {x};
}

}  // namespace

double ConfigValue::as_number() const {
  if (auto* p = std::get_if<double>(&value)) return *p;
  throw std::invalid_argument("config: expected a number");
}

const std::string& ConfigValue::as_string() const {
  if (auto* p = std::get_if<std::string>(&value)) return *p;
  throw std::invalid_argument("config: expected a string");
}

bool ConfigValue::as_bool() const {
  if (auto* p = std::get_if<bool>(&value)) return *p;
  throw std::invalid_argument("config: expected a boolean");
}

const std::vector<double>& ConfigValue::as_array() const {
  if (auto* p = std::get_if<std::vector<double>>(&value)) return *p;
  throw std::invalid_argument("config: expected an array");
}

Config Config::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str());
}

Config Config::parse_string(const std::string& text) {
  Config cfg;
  std::stringstream ss(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::invalid_argument("config: bad section header at line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config: expected key = value at line " + std::to_string(lineno));
    std::string key = trim(line.substr(0, eq));
    if (key.empty())
      throw std::invalid_argument("config: empty key at line " + std::to_string(lineno));
    if (!section.empty()) key = section + "." + key;
    cfg.values_[key] = parse_value(line.substr(eq + 1), key);
  }
  return cfg;
}

double Config::number(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("config: missing key '" + key + "'");
  return it->second.as_number();
}

double Config::number_or(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second.as_number();
}

std::string Config::str(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("config: missing key '" + key + "'");
  return it->second.as_string();
}

std::string Config::str_or(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second.as_string();
}

bool Config::flag_or(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second.as_bool();
}

std::vector<double> Config::array(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw std::invalid_argument("config: missing key '" + key + "'");
  return it->second.as_array();
}

std::vector<double> Config::array_or(const std::string& key, std::vector<double> fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second.as_array();
}

std::map<std::string, double> Config::section_numbers(const std::string& section) const {
  std::map<std::string, double> out;
  std::string prefix = section + ".";
  for (const auto& [key, value] : values_) {
    if (key.rfind(prefix, 0) == 0) {
      if (auto* p = std::get_if<double>(&value.value)) out[key.substr(prefix.size())] = *p;
    }
  }
  return out;
}

}  // namespace cbilab
