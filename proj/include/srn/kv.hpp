#ifndef SRN_KV_HPP_
#define SRN_KV_HPP_

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "srn/tensor.hpp"

namespace srn {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(trim(item));
  return out;
}

/// Plain-text `key = value` configuration file. Lines starting with '#' and
/// blank lines are ignored; duplicate keys are an error.
class KvFile {
 public:
  KvFile() = default;

  static KvFile parse_text(const std::string& text, const std::string& origin = "<string>") {
    KvFile kv;
    std::istringstream is(text);
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
      const std::string key = trim(t.substr(0, eq));
      const std::string val = trim(t.substr(eq + 1));
      if (key.empty()) throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      if (kv.values_.count(key))
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
      kv.values_[key] = val;
      kv.order_.push_back(key);
    }
    return kv;
  }

  static KvFile parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), path);
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
    return it->second;
  }
  std::string get_string(const std::string& key, const std::string& dflt) const {
    auto it = values_.find(key);
    return it == values_.end() ? dflt : it->second;
  }

  long get_int(const std::string& key) const { return to_int(key, get_string(key)); }
  long get_int(const std::string& key, long dflt) const {
    return has(key) ? get_int(key) : dflt;
  }

  double get_real(const std::string& key) const { return to_real(key, get_string(key)); }
  double get_real(const std::string& key, double dflt) const {
    return has(key) ? get_real(key) : dflt;
  }

  std::vector<long> get_int_list(const std::string& key) const {
    std::vector<long> out;
    for (const auto& tok : split(get_string(key), ','))
      if (!tok.empty()) out.push_back(to_int(key, tok));
    return out;
  }

  const std::vector<std::string>& keys() const { return order_; }

 private:
  long to_int(const std::string& key, const std::string& v) const {
    try {
      std::size_t pos = 0;
      const long r = std::stol(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return r;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': '" + v + "' is not an integer");
    }
  }
  double to_real(const std::string& key, const std::string& v) const {
    try {
      std::size_t pos = 0;
      const double r = std::stod(v, &pos);
      if (pos != v.size()) throw std::invalid_argument(v);
      return r;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
    }
  }

  std::map<std::string, std::string> values_;
  std::vector<std::string> order_;
};

}  // namespace srn

#endif  // SRN_KV_HPP_
