#pragma once

// Flat key/value experiment configuration read from a TOML subset or JSON.
// TOML: `key = value` lines, `[section]` headers (keys become section.key),
// '#' comments, numbers, "strings", true/false and one-line arrays.
// Numbers may be written as 2^-k.

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace kakeya {

using Json = nlohmann::ordered_json;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double parse_number(const std::string& s) {
  std::string t;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) t += c;
  auto caret = t.find('^');
  try {
    std::size_t used = 0;
    if (caret != std::string::npos) {
      double base = std::stod(t.substr(0, caret), &used);
      if (used != caret) throw ConfigError("bad number: " + s);
      std::string e = t.substr(caret + 1);
      double ex = std::stod(e, &used);
      if (used != e.size()) throw ConfigError("bad number: " + s);
      return std::pow(base, ex);
    }
    double v = std::stod(t, &used);
    if (used != t.size()) throw ConfigError("bad number: " + s);
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError("bad number: " + s);
  }
}

namespace detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

inline std::vector<std::string> split_top(const std::string& s) {
  std::vector<std::string> out;
  int depth = 0;
  bool in_str = false;
  std::string cur;
  for (char c : s) {
    if (c == '"') in_str = !in_str;
    if (!in_str && c == '[') ++depth;
    if (!in_str && c == ']') --depth;
    if (!in_str && depth == 0 && c == ',') {
      out.push_back(trim(cur));
      cur.clear();
      continue;
    }
    cur += c;
  }
  if (!trim(cur).empty()) out.push_back(trim(cur));
  return out;
}

}  // namespace detail

inline Json parse_toml_value(const std::string& raw) {
  std::string v = detail::trim(raw);
  if (v.empty()) throw ConfigError("empty value");
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') throw ConfigError("unterminated string: " + v);
    return v.substr(1, v.size() - 2);
  }
  if (v == "true") return true;
  if (v == "false") return false;
  if (v.front() == '[') {
    if (v.back() != ']') throw ConfigError("unterminated array: " + v);
    Json arr = Json::array();
    for (const auto& item : detail::split_top(v.substr(1, v.size() - 2))) arr.push_back(parse_toml_value(item));
    return arr;
  }
  double d = parse_number(v);
  if (v.find_first_of(".eE^") == std::string::npos && d == std::floor(d) && std::abs(d) < 9e15)
    return static_cast<std::int64_t>(d);
  return d;
}

inline Json parse_toml(const std::string& text) {
  Json out = Json::object();
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string s = detail::trim(detail::strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[' && s.back() == ']' && s.find('=') == std::string::npos) {
      section = detail::trim(s.substr(1, s.size() - 2));
      continue;
    }
    auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = detail::trim(s.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (!section.empty()) key = section + "." + key;
    try {
      out[key] = parse_toml_value(s.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

// Nested objects flatten to dotted keys; a result file's metadata.config is accepted as a config.
inline void flatten_into(const Json& j, const std::string& prefix, Json& out) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    std::string k = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (it->is_object())
      flatten_into(*it, k, out);
    else
      out[k] = *it;
  }
}

inline Json parse_config_text(const std::string& text, bool json) {
  if (!json) return parse_toml(text);
  Json j;
  try {
    j = Json::parse(text);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("json: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("json config must be an object");
  if (j.contains("metadata") && j["metadata"].contains("config")) j = j["metadata"]["config"];
  Json out = Json::object();
  flatten_into(j, "", out);
  return out;
}

inline Json load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config: " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  std::string text = ss.str();
  bool json = path.size() >= 5 && path.substr(path.size() - 5) == ".json";
  std::string t = detail::trim(text);
  if (!t.empty() && t.front() == '{') json = true;
  return parse_config_text(text, json);
}

// key=value with a TOML value; bare words are taken as strings.
inline std::pair<std::string, Json> parse_override(const std::string& kv) {
  auto eq = kv.find('=');
  if (eq == std::string::npos) throw ConfigError("override must be key=value: " + kv);
  std::string key = detail::trim(kv.substr(0, eq)), val = detail::trim(kv.substr(eq + 1));
  if (key.empty()) throw ConfigError("override has an empty key");
  try {
    return {key, parse_toml_value(val)};
  } catch (const ConfigError&) {
    return {key, val};
  }
}

// "a, b, c" and "2^-4..2^-8" (integer exponent steps) as a list of numbers.
inline Json expand_list(const std::string& text) {
  Json out = Json::array();
  for (const auto& part : detail::split_top(text)) {
    auto dots = part.find("..");
    if (dots == std::string::npos) {
      out.push_back(parse_number(part));
      continue;
    }
    std::string a = detail::trim(part.substr(0, dots)), b = detail::trim(part.substr(dots + 2));
    auto ca = a.find('^'), cb = b.find('^');
    if (ca == std::string::npos || cb == std::string::npos || a.substr(0, ca) != b.substr(0, cb))
      throw ConfigError("range must be base^i..base^j: " + part);
    double base = parse_number(a.substr(0, ca));
    double i = parse_number(a.substr(ca + 1)), j = parse_number(b.substr(cb + 1));
    if (i != std::floor(i) || j != std::floor(j)) throw ConfigError("range exponents must be integers: " + part);
    int step = j >= i ? 1 : -1;
    for (int k = static_cast<int>(i);; k += step) {
      out.push_back(std::pow(base, k));
      if (k == static_cast<int>(j)) break;
    }
  }
  return out;
}

// Merges user values onto schema defaults; unknown keys and type changes are errors.
inline Json apply_schema(const Json& schema, const Json& user) {
  Json out = schema;
  for (auto it = user.begin(); it != user.end(); ++it) {
    if (!schema.contains(it.key())) throw ConfigError("unknown config key: " + it.key());
    const Json& def = schema[it.key()];
    Json v = *it;
    if (def.is_number() && v.is_string()) v = parse_number(v.get<std::string>());
    if (def.is_number_float() && v.is_number_integer()) v = static_cast<double>(v.get<std::int64_t>());
    if (def.is_number_integer() && v.is_number_float()) {
      double d = v.get<double>();
      if (d != std::floor(d)) throw ConfigError("key " + it.key() + " expects an integer");
      v = static_cast<std::int64_t>(d);
    }
    if (def.is_array() && v.is_string() && !def.empty() && def[0].is_number()) v = expand_list(v.get<std::string>());
    if (def.is_array() && !v.is_array()) v = Json::array({v});
    if (def.is_array()) {
      Json arr = Json::array();
      for (const auto& e : v) arr.push_back(e.is_string() && !def.empty() && def[0].is_number()
                                                ? Json(parse_number(e.get<std::string>()))
                                                : e);
      v = arr;
    }
    bool ok = (def.is_number() && v.is_number()) || (def.is_string() && v.is_string()) ||
              (def.is_boolean() && v.is_boolean()) || (def.is_array() && v.is_array());
    if (!ok) throw ConfigError("key " + it.key() + " has the wrong type");
    out[it.key()] = v;
  }
  return out;
}

inline std::vector<double> number_list(const Json& j) {
  std::vector<double> out;
  for (const auto& e : j) out.push_back(e.is_string() ? parse_number(e.get<std::string>()) : e.get<double>());
  return out;
}

}  // namespace kakeya
