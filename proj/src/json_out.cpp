#include "vpi/json_out.hpp"

#include <cmath>
#include <cstdio>

namespace vpi {
namespace {

void write(const Json& j, int indent, int level, std::string& out) {
  const auto pad = [&](int lvl) {
    if (indent >= 0) {
      out.push_back('\n');
      out.append(static_cast<std::size_t>(indent * lvl), ' ');
    }
  };
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out.push_back('{');
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out.push_back(',');
        first = false;
        pad(level + 1);
        out += Json(it.key()).dump();
        out += indent >= 0 ? ": " : ":";
        write(it.value(), indent, level + 1, out);
      }
      pad(level);
      out.push_back('}');
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out.push_back('[');
      bool first = true;
      for (const auto& v : j) {
        if (!first) out.push_back(',');
        first = false;
        pad(level + 1);
        write(v, indent, level + 1, out);
      }
      pad(level);
      out.push_back(']');
      return;
    }
    case Json::value_t::number_float: {
      const double x = j.get<double>();
      if (std::isnan(x)) {
        out += "\"nan\"";
      } else if (std::isinf(x)) {
        out += x > 0 ? "\"inf\"" : "\"-inf\"";
      } else {
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", x);
        out += buf;
      }
      return;
    }
    default:
      out += j.dump();
  }
}

}  // namespace

std::string dump_json(const Json& j, int indent) {
  std::string out;
  write(j, indent, 0, out);
  return out;
}

}  // namespace vpi
