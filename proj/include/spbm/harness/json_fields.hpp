#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "spbm/errors.hpp"

namespace spbm::harness {

using json = nlohmann::json;

/// Strict reader over one JSON object: every key must be consumed by a
/// read() call before finish(), so typos surface as ConfigError.
class Fields {
 public:
  Fields(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  bool has(std::string_view key) const { return j_.contains(key); }

  template <class T>
  void read(std::string_view key, T& out) {
    used_.emplace(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    out = convert<T>(*it, where_ + "." + std::string(key));
  }

  const json* raw(std::string_view key) {
    used_.emplace(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!used_.contains(k)) throw ConfigError(where_ + ": unknown key '" + k + "'");
    }
  }

  template <class T>
  struct is_vector : std::false_type {};
  template <class U>
  struct is_vector<std::vector<U>> : std::true_type {};

  template <class T>
  static T convert(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where + ": expected true or false");
    } else if constexpr (std::is_unsigned_v<T>) {
      if (!(v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0))) {
        throw ConfigError(where + ": expected a non-negative integer");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where + ": expected a number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where + ": expected a string");
    } else if constexpr (is_vector<T>::value) {
      if (!v.is_array()) throw ConfigError(where + ": expected a list");
      T out;
      for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(convert<typename T::value_type>(v[i], where + "[" + std::to_string(i) + "]"));
      }
      return out;
    }
    try {
      return v.get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string, std::less<>> used_;
};

/// Copies of `base` with every top-level key of `over` replaced.
inline json shallow_merge(json base, const json& over) {
  if (base.is_null()) base = json::object();
  for (const auto& [k, v] : over.items()) base[k] = v;
  return base;
}

/// Sets a dotted path ("method.alpha", "problem.data.n") inside `j`.
inline void set_path(json& j, std::string_view path, const json& value) {
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string key(path.substr(start, dot == std::string_view::npos ? dot : dot - start));
    if (key.empty()) throw ConfigError("grid: malformed parameter path '" + std::string(path) + "'");
    if (node->is_null()) *node = json::object();
    if (!node->is_object()) {
      throw ConfigError("grid: path '" + std::string(path) + "' crosses a non-object value");
    }
    if (dot == std::string_view::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

}  // namespace spbm::harness
