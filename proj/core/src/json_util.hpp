#pragma once

#include <cmath>
#include <cstdio>
#include <string>

#include <nlohmann/json.hpp>

#include "gka/error.hpp"

namespace gka::detail {

using ordered_json = nlohmann::ordered_json;

inline std::string format_float17(double v) {
  if (!std::isfinite(v)) throw NumericError("cannot serialize a non-finite value to JSON");
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  std::string s = buf;
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

// Like json::dump() but every float is printed with 17 significant digits.
template <typename Json>
void dump17(const Json& j, std::string& out, int indent, int depth) {
  const auto newline = [&](int d) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case nlohmann::json::value_t::number_float:
      out += format_float17(j.template get<double>());
      break;
    case nlohmann::json::value_t::array: {
      out += '[';
      bool scalar_only = true;
      for (const auto& item : j) scalar_only = scalar_only && !item.is_structured();
      bool first = true;
      for (const auto& item : j) {
        if (!first) out += scalar_only || indent < 0 ? ", " : ",";
        if (!scalar_only) newline(depth + 1);
        dump17(item, out, indent, depth + 1);
        first = false;
      }
      if (!scalar_only && !j.empty()) newline(depth);
      out += ']';
      break;
    }
    case nlohmann::json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        newline(depth + 1);
        out += Json(it.key()).dump();
        out += indent < 0 ? ":" : ": ";
        dump17(it.value(), out, indent, depth + 1);
        first = false;
      }
      if (!j.empty()) newline(depth);
      out += '}';
      break;
    }
    default:
      out += j.dump();
  }
}

template <typename Json>
std::string dump17(const Json& j, int indent = 2) {
  std::string out;
  dump17(j, out, indent, 0);
  return out;
}

}  // namespace gka::detail
