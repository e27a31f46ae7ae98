#pragma once

// Strict JSON config access: every object lists its allowed keys, and every
// value is type-checked with the dotted path in the message.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "sonic/core/error.hpp"

namespace sonic::cli {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Malformed or inconsistent run configuration (exit status 1).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class Node {
 public:
  Node(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ValidationError(where() + " must be an object");
  }

  const std::string& path() const { return path_; }
  std::string where() const { return path_.empty() ? "config" : path_; }
  std::string key_path(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }

  /// Rejects keys outside the allowed set.
  const Node& allow(std::initializer_list<const char*> keys) const {
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!ok.count(it.key())) {
        std::ostringstream msg;
        msg << "unknown key '" << key_path(it.key()) << "' (allowed:";
        for (const auto& k : ok) msg << ' ' << k;
        msg << ')';
        throw ValidationError(msg.str());
      }
    return *this;
  }

  bool has(const std::string& k) const { return j_.contains(k); }

  Node child(const std::string& k) const {
    if (!has(k)) throw ValidationError("missing object '" + key_path(k) + "'");
    return Node(j_.at(k), key_path(k));
  }
  std::optional<Node> optional_child(const std::string& k) const {
    if (!has(k)) return std::nullopt;
    return Node(j_.at(k), key_path(k));
  }

  double number(const std::string& k) const {
    if (!has(k)) throw ValidationError("missing number '" + key_path(k) + "'");
    const auto& v = j_.at(k);
    if (!v.is_number()) throw ValidationError("'" + key_path(k) + "' must be a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw ValidationError("'" + key_path(k) + "' must be finite");
    return d;
  }
  double number(const std::string& k, double def) const { return has(k) ? number(k) : def; }
  std::optional<double> optional_number(const std::string& k) const {
    if (!has(k)) return std::nullopt;
    return number(k);
  }

  double positive(const std::string& k) const { return check_positive(k, number(k)); }
  double positive(const std::string& k, double def) const { return check_positive(k, number(k, def)); }

  long integer(const std::string& k, long def, long min_value) const {
    if (!has(k)) return def;
    const auto& v = j_.at(k);
    if (!v.is_number_integer()) throw ValidationError("'" + key_path(k) + "' must be an integer");
    const long n = v.get<long>();
    if (n < min_value) {
      std::ostringstream msg;
      msg << "'" << key_path(k) << "' must be >= " << min_value << " (got " << n << ")";
      throw ValidationError(msg.str());
    }
    return n;
  }

  bool boolean(const std::string& k, bool def) const {
    if (!has(k)) return def;
    const auto& v = j_.at(k);
    if (!v.is_boolean()) throw ValidationError("'" + key_path(k) + "' must be true or false");
    return v.get<bool>();
  }

  std::string string(const std::string& k) const {
    if (!has(k)) throw ValidationError("missing string '" + key_path(k) + "'");
    const auto& v = j_.at(k);
    if (!v.is_string()) throw ValidationError("'" + key_path(k) + "' must be a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& k, const std::string& def) const { return has(k) ? string(k) : def; }

  std::string choice(const std::string& k, const std::string& def, std::initializer_list<const char*> options) const {
    const auto s = string(k, def);
    for (const char* o : options)
      if (s == o) return s;
    std::ostringstream msg;
    msg << "'" << key_path(k) << "' must be one of:";
    for (const char* o : options) msg << ' ' << o;
    msg << " (got '" << s << "')";
    throw ValidationError(msg.str());
  }

  std::vector<double> numbers(const std::string& k, std::vector<double> def) const {
    if (!has(k)) return def;
    const auto& v = j_.at(k);
    if (!v.is_array()) throw ValidationError("'" + key_path(k) + "' must be an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
      if (!e.is_number()) throw ValidationError("'" + key_path(k) + "' must be an array of numbers");
      out.push_back(e.get<double>());
    }
    return out;
  }

  std::vector<std::string> strings(const std::string& k) const {
    if (!has(k)) throw ValidationError("missing array '" + key_path(k) + "'");
    const auto& v = j_.at(k);
    if (!v.is_array()) throw ValidationError("'" + key_path(k) + "' must be an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
      if (!e.is_string()) throw ValidationError("'" + key_path(k) + "' must be an array of strings");
      out.push_back(e.get<std::string>());
    }
    return out;
  }

  const json& raw() const { return j_; }

 private:
  double check_positive(const std::string& k, double v) const {
    if (!(v > 0.0)) {
      std::ostringstream msg;
      msg << "'" << key_path(k) << "' must be positive (got " << v << ")";
      throw ValidationError(msg.str());
    }
    return v;
  }

  const json& j_;
  std::string path_;
};

inline json load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot read config file " + file.string());
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ValidationError("config " + file.string() + " is not valid JSON: " + e.what());
  }
}

/// Checks schema_version and that the config targets this subcommand.
inline void check_header(const Node& root, const std::string& subcommand) {
  if (!root.has("schema_version")) throw ValidationError("missing 'schema_version'");
  if (!root.raw().at("schema_version").is_number_integer() || root.raw().at("schema_version").get<long>() != kSchemaVersion) {
    std::ostringstream msg;
    msg << "unsupported schema_version " << root.raw().at("schema_version").dump() << " (this tool reads "
        << kSchemaVersion << ")";
    throw ValidationError(msg.str());
  }
  const auto sub = root.string("subcommand");
  if (sub != subcommand)
    throw ValidationError("config is for subcommand '" + sub + "' but was run as '" + subcommand + "'");
}

}  // namespace sonic::cli
