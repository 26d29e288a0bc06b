#pragma once

#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace rmlab {

// Rejects keys outside `allowed`; config documents are closed schemas.
inline void require_known_keys(const nlohmann::json& j, std::initializer_list<std::string_view> allowed,
                               std::string_view where) {
  if (!j.is_object()) throw std::invalid_argument(std::string(where) + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || (key == a);
    if (!ok) throw std::invalid_argument(std::string(where) + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->template get<T>();
}

}  // namespace rmlab
