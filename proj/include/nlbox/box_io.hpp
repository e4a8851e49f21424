#pragma once

// Box file format: one JSON object
//   {"x_card": 2, "y_card": 2, "a_card": 2, "b_card": 2, "p": [...]}
// with p ordered x outermost, then y, then a, then b. Values are written with
// 17 significant digits so that read(write(box)) is bit-exact.

#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "json.hpp"
#include "nlbox/box.hpp"

namespace nlbox {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string box_to_json(const BehaviorBox& box) {
  const BoxShape& s = box.shape();
  std::string out = "{\"x_card\": " + std::to_string(s.x_card) +
                    ", \"y_card\": " + std::to_string(s.y_card) +
                    ", \"a_card\": " + std::to_string(s.a_card) +
                    ", \"b_card\": " + std::to_string(s.b_card) + ", \"p\": [";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ", ";
    out += format_double(box[i]);
  }
  out += "]}\n";
  return out;
}

/// Parses a box without validating it; callers validate where required.
inline BehaviorBox box_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput(std::string("box file is not valid JSON: ") + e.what());
  }
  auto card = [&](const char* key) -> std::size_t {
    if (!j.contains(key) || !j[key].is_number_unsigned())
      throw InvalidInput(std::string("box file needs a non-negative integer '") + key + "'");
    return j[key].get<std::size_t>();
  };
  const BoxShape shape{card("x_card"), card("y_card"), card("a_card"), card("b_card")};
  if (!j.contains("p") || !j["p"].is_array()) throw InvalidInput("box file needs an array 'p'");
  std::vector<double> p;
  for (const auto& v : j["p"]) {
    if (!v.is_number()) throw InvalidInput("box file 'p' must contain numbers");
    p.push_back(v.get<double>());
  }
  return BehaviorBox(shape, std::move(p));
}

inline void write_box_file(const std::string& path, const BehaviorBox& box) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot open '" + path + "' for writing");
  out << box_to_json(box);
}

inline BehaviorBox read_box_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open box file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return box_from_json(text);
}

}  // namespace nlbox
