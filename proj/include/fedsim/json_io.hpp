#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#include "fedsim/error.hpp"

namespace fedsim {

using ordered_json = nlohmann::ordered_json;

namespace detail {

// %.17g: enough digits to round-trip any double, bytes identical everywhere.
inline std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

inline void append_escaped(const std::string& s, std::string& out) {
  out.push_back('"');
  for (char ch : s) {
    switch (ch) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(ch) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof(buf), "\\u%04x", ch);
          out += buf;
        } else {
          out.push_back(ch);
        }
    }
  }
  out.push_back('"');
}

inline void emit_json(const ordered_json& v, std::string& out, int indent,
                      int depth) {
  const std::string pad(static_cast<std::size_t>(indent * (depth + 1)), ' ');
  const std::string close_pad(static_cast<std::size_t>(indent * depth), ' ');
  switch (v.type()) {
    case ordered_json::value_t::null:
      out += "null";
      break;
    case ordered_json::value_t::boolean:
      out += v.get<bool>() ? "true" : "false";
      break;
    case ordered_json::value_t::number_integer:
      out += std::to_string(v.get<std::int64_t>());
      break;
    case ordered_json::value_t::number_unsigned:
      out += std::to_string(v.get<std::uint64_t>());
      break;
    case ordered_json::value_t::number_float: {
      const double d = v.get<double>();
      if (!std::isfinite(d)) {
        out += "null";
      } else {
        out += format_double(d);
      }
      break;
    }
    case ordered_json::value_t::string:
      append_escaped(v.get<std::string>(), out);
      break;
    case ordered_json::value_t::array: {
      if (v.empty()) {
        out += "[]";
        break;
      }
      out += "[\n";
      for (std::size_t i = 0; i < v.size(); ++i) {
        out += pad;
        emit_json(v[i], out, indent, depth + 1);
        if (i + 1 < v.size()) out.push_back(',');
        out.push_back('\n');
      }
      out += close_pad;
      out.push_back(']');
      break;
    }
    case ordered_json::value_t::object: {
      if (v.empty()) {
        out += "{}";
        break;
      }
      out += "{\n";
      std::size_t i = 0;
      for (const auto& [key, value] : v.items()) {
        out += pad;
        append_escaped(key, out);
        out += ": ";
        emit_json(value, out, indent, depth + 1);
        if (++i < v.size()) out.push_back(',');
        out.push_back('\n');
      }
      out += close_pad;
      out.push_back('}');
      break;
    }
    default:
      throw Error("emit_json: unsupported value type");
  }
}

}  // namespace detail

// Serializes with 17-significant-digit floats; insertion-ordered keys.
inline std::string to_json_text(const ordered_json& v, int indent = 2) {
  std::string out;
  detail::emit_json(v, out, indent, 0);
  out.push_back('\n');
  return out;
}

inline void write_text_file(const std::filesystem::path& path,
                            const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw LoadError("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw LoadError("failed writing '" + path.string() + "'");
}

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError("cannot open '" + path.string() + "'");
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  return content;
}

inline ordered_json parse_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw LoadError("invalid JSON in '" + path.string() + "': " + e.what());
  }
}

}  // namespace fedsim
