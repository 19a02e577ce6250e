#pragma once

// Error type and JSON shapes shared by the CLI and the HTTP service.

#include <json.hpp>

#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "bytebeat/analysis.hpp"
#include "bytebeat/corpus.hpp"
#include "bytebeat/semantics.hpp"

namespace bytebeat {

enum class ApiErrorKind { Parse, Type, Range, Internal };

inline std::string_view to_string(ApiErrorKind k) {
  switch (k) {
    case ApiErrorKind::Parse: return "parse";
    case ApiErrorKind::Type: return "type";
    case ApiErrorKind::Range: return "range";
    case ApiErrorKind::Internal: return "internal";
  }
  return "internal";
}

class ApiError : public std::runtime_error {
public:
  ApiError(ApiErrorKind kind, std::string msg, std::optional<std::size_t> pos = std::nullopt)
      : std::runtime_error(msg), kind_(kind), pos_(pos) {}

  static ApiError from(const ParseError& e) {
    std::string msg = "expected " + e.expected() + ", found " +
                      (e.found().empty() ? std::string("end of input") : "'" + e.found() + "'");
    return ApiError(ApiErrorKind::Parse, std::move(msg), e.pos());
  }
  static ApiError from(const TypeError& e) {
    return ApiError(ApiErrorKind::Type, e.what(), e.pos());
  }

  ApiErrorKind kind() const noexcept { return kind_; }
  std::optional<std::size_t> pos() const noexcept { return pos_; }

private:
  ApiErrorKind kind_;
  std::optional<std::size_t> pos_;
};

/// Parses and typechecks, translating failures into ApiError.
inline TypedExpr check_expression(std::string_view source, Mode mode) {
  try {
    return typecheck(parse(source), mode);
  } catch (const ParseError& e) {
    throw ApiError::from(e);
  } catch (const TypeError& e) {
    throw ApiError::from(e);
  }
}

/// Multi-line message with the source echoed and a caret under the error.
inline std::string describe(const ApiError& e, std::string_view source) {
  std::ostringstream os;
  os << "error: " << to_string(e.kind()) << " error";
  if (e.pos()) os << " at position " << *e.pos();
  os << ": " << e.what() << '\n';
  if (e.pos() && !source.empty()) {
    os << "  " << source << '\n' << "  " << std::string(*e.pos(), ' ') << "^\n";
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// JSON

using json = nlohmann::json;

inline json to_json(const ApiError& e) {
  json j{{"kind", to_string(e.kind())}, {"msg", e.what()}};
  j["pos"] = e.pos() ? json(*e.pos()) : json(nullptr);
  return j;
}

inline json to_json(const Value& v) {
  if (v.is_int()) return v.as_int();
  if (!std::isfinite(v.as_double())) return nullptr;
  return v.as_double();
}

inline json to_json(const NoteEvent& ev) {
  json j{{"t_start", ev.t_start}, {"t_len", ev.t_len}};
  j["freq"] = ev.freq ? json(*ev.freq) : json(nullptr);
  if (ev.name) {
    j["note"] = ev.name->note;
    j["octave"] = ev.name->octave;
    j["cents"] = ev.name->cents;
  } else {
    j["note"] = nullptr;
    j["octave"] = nullptr;
    j["cents"] = nullptr;
  }
  return j;
}

inline json to_json(const BitBandMatrix& m) {
  json rows = json::array();
  for (const auto& row : m.rows) {
    json r = json::array();
    for (const auto& a : row) r.push_back({{"duty", a.duty}, {"toggles", a.toggles}});
    rows.push_back(std::move(r));
  }
  return {{"window_len", m.window_len}, {"rows", std::move(rows)}};
}

inline json to_json(const Preset& p) {
  json modes = json::array();
  for (Mode m : p.modes) modes.push_back(to_string(m));
  json j{{"id", p.id},         {"source", p.source}, {"section", p.section},
         {"modes", modes},     {"status", to_string(p.status)}};
  j["credit"] = p.credit ? json(*p.credit) : json(nullptr);
  return j;
}

inline json presets_json() {
  json arr = json::array();
  for (const auto& p : presets()) arr.push_back(to_json(p));
  return arr;
}

}  // namespace bytebeat
