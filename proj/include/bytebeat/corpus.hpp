#pragma once

// Formulas from the bytebeat literature, kept as presets with provenance.

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "bytebeat/semantics.hpp"

namespace bytebeat {

enum class PresetStatus {
  Verbatim,       // printed exactly like this
  Reconstructed,  // rebuilt to match published values; not original text
  Truncated,      // published text is incomplete; never rendered
};

inline std::string_view to_string(PresetStatus s) {
  switch (s) {
    case PresetStatus::Verbatim: return "verbatim";
    case PresetStatus::Reconstructed: return "reconstructed";
    case PresetStatus::Truncated: return "truncated";
  }
  return "?";
}

struct Preset {
  std::string_view id;
  std::string_view source;
  std::string_view section;  // topic the formula illustrates
  std::optional<std::string_view> credit;
  std::vector<Mode> modes;   // empty for truncated entries
  PresetStatus status;
};

namespace detail {
inline std::vector<Preset> make_presets() {
  const std::vector<Mode> all(kAllModes.begin(), kAllModes.end());
  using enum PresetStatus;
  return {
      {"sawtooth", "t", "bitwise-amplitude", std::nullopt, all, Verbatim},
      {"sierpinski", "t&t>>8", "bitwise-amplitude", std::nullopt, all, Verbatim},
      {"sierpinski-3x", "3*t&t>>8", "bitwise-amplitude", std::nullopt, all, Verbatim},
      {"two-squares", "t&96", "bitwise-amplitude", std::nullopt, all, Verbatim},
      {"two-squares-gated", "t&96&t>>8", "bitwise-amplitude", std::nullopt, all, Verbatim},
      {"lullaby-1", "t*5&t>>7|t*3&t>>8", "bitwise-amplitude", std::nullopt, all, Verbatim},
      {"lullaby-2", "t*5&t>>7|t*3&t>>10", "bitwise-amplitude", std::nullopt, all, Verbatim},
      {"lullaby-3", "t*9&t>>4|t*5&t>>7|t*3&t>>10", "bitwise-amplitude", std::nullopt, all,
       Verbatim},
      {"rrrola", "t*(0xCA98>>(t>>9&14)&15)|t>>8", "bitwise-amplitude", "Rrrola", all, Verbatim},
      {"mu6k-melody", "(t>>6^t>>8|t>>12|t)&63", "bitwise-amplitude", "Mu6k", all, Verbatim},
      {"fortytwo", "t*(42&t>>10)", "pitch-values", std::nullopt, all, Verbatim},
      {"fortytwo-modulus", "t*((42&t>>10)", "pitch-values", std::nullopt, {}, Truncated},
      {"zero-bits-series", "((t>>10)^(t>>10)-2)", "pitch-values", std::nullopt, {}, Truncated},
      {"zero-bits-melody", "t*(((t>>9)^((t>>9)-2))%11)", "pitch-values", std::nullopt, all,
       Reconstructed},
      {"percussive-wrap", "(t*9&t>>4|t*5&t>>7|t*3&t>>10)-1", "modular-wraparound", std::nullopt,
       all, Verbatim},
      {"wrap-fragment", "(t&t", "modular-wraparound", std::nullopt, {}, Truncated},
      {"float-sweep", "(int)(t/1e7*t*t+t)", "modular-wraparound", std::nullopt, all, Verbatim},
      {"signed-shift", "t>>6&1?t>>5:-t>>4", "modular-wraparound", std::nullopt, all, Verbatim},
      {"divide-by-zero", "t>>4|t&((t>>5)/(t>>7-(t>>15)&-t>>7-(t>>15)))", "modular-wraparound",
       std::nullopt, all, Verbatim},
  };
}
}  // namespace detail

inline std::span<const Preset> presets() {
  static const std::vector<Preset> table = detail::make_presets();
  return table;
}

inline const Preset* find_preset(std::string_view id) {
  for (const auto& p : presets())
    if (p.id == id) return &p;
  return nullptr;
}

/// Presets safe to render: verbatim or reconstructed.
inline std::vector<const Preset*> renderable_presets() {
  std::vector<const Preset*> out;
  for (const auto& p : presets())
    if (p.status != PresetStatus::Truncated) out.push_back(&p);
  return out;
}

}  // namespace bytebeat
