#pragma once

// Musical analyses of rendered bytebeat streams: per-bit square-wave
// decomposition, pitch-multiplier series, sawtooth frequencies, alias
// folding, equal-tempered note naming, autocorrelation pitch tracking and
// amplitude bitmaps.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "bytebeat/audio.hpp"
#include "bytebeat/semantics.hpp"

namespace bytebeat {

// ---------------------------------------------------------------------------
// Bit bands

using BitSequence = std::vector<std::uint8_t>;

/// Sequence k holds bit k of every output byte in [t0, t0+n).
inline std::array<BitSequence, 8> bit_components(const Program& p, std::uint64_t t0,
                                                 std::size_t n) {
  const SampleChunk chunk = render_range(p, t0, n);
  std::array<BitSequence, 8> bits;
  for (int k = 0; k < 8; ++k) {
    bits[k].resize(n);
    for (std::size_t i = 0; i < n; ++i) bits[k][i] = (chunk.data[i] >> k) & 1;
  }
  return bits;
}

struct BandActivity {
  double duty = 0.0;        // fraction of samples with the bit set
  std::size_t toggles = 0;  // adjacent changes inside the window

  bool sounding() const noexcept { return toggles > 0; }
};

/// Splits a bit sequence into consecutive windows; a trailing partial window
/// is reported over its actual length.
inline std::vector<BandActivity> band_activity(std::span<const std::uint8_t> bits,
                                               std::size_t window_len) {
  if (window_len < 2) throw std::invalid_argument("window_len must be at least 2");
  std::vector<BandActivity> out;
  for (std::size_t start = 0; start < bits.size(); start += window_len) {
    const std::size_t len = std::min(window_len, bits.size() - start);
    BandActivity a;
    std::size_t ones = 0;
    for (std::size_t i = 0; i < len; ++i) {
      ones += bits[start + i] != 0;
      if (i > 0 && (bits[start + i] != 0) != (bits[start + i - 1] != 0)) ++a.toggles;
    }
    a.duty = static_cast<double>(ones) / static_cast<double>(len);
    out.push_back(a);
  }
  return out;
}

struct BitBandMatrix {
  std::size_t window_len = 0;
  std::array<std::vector<BandActivity>, 8> rows;
};

inline BitBandMatrix bit_bands(const Program& p, std::uint64_t t0, std::size_t n,
                               std::size_t window_len) {
  if (n == 0) throw std::invalid_argument("n must be positive");
  BitBandMatrix m;
  m.window_len = window_len;
  const auto bits = bit_components(p, t0, n);
  for (int k = 0; k < 8; ++k) m.rows[k] = band_activity(bits[k], window_len);
  return m;
}

// ---------------------------------------------------------------------------
// Pitch-multiplier series and frequencies

/// Element k is the expression's unquantized value at t = k * stride.
inline std::vector<Value> series(const TypedExpr& e, std::uint64_t stride, std::size_t count) {
  if (stride < 1) throw std::invalid_argument("stride must be at least 1");
  std::vector<Value> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) out.push_back(eval_ast(e, k * stride));
  return out;
}

/// Frequency of the byte-truncated sawtooth t*v. Negative multipliers give the
/// same period, and multiples of 256 wrap fully every sample (silence).
inline double sawtooth_freq(std::int64_t v, double rate) {
  if (rate <= 0) throw std::invalid_argument("rate must be positive");
  const std::uint64_t mag = v < 0 ? 0 - static_cast<std::uint64_t>(v) : static_cast<std::uint64_t>(v);
  return static_cast<double>(mag % 256) * rate / 256.0;
}

/// Folds a frequency into [0, rate/2], the band where it is heard after sampling.
inline double alias_fold(double f, double rate) {
  if (rate <= 0) throw std::invalid_argument("rate must be positive");
  double r = std::fmod(std::fabs(f), rate);
  if (r > rate / 2) r = rate - r;
  return r;
}

// ---------------------------------------------------------------------------
// Note naming

enum class PitchReference { A440, C256 };

inline std::string_view to_string(PitchReference r) { return r == PitchReference::A440 ? "a440" : "c256"; }

inline std::optional<PitchReference> reference_from_string(std::string_view s) {
  if (s == "a440" || s == "A440") return PitchReference::A440;
  if (s == "c256" || s == "C256") return PitchReference::C256;
  return std::nullopt;
}

struct NoteName {
  std::string note;  // letter plus optional '#'
  int octave = 0;
  int cents = 0;     // in [-50, 50)

  friend bool operator==(const NoteName&, const NoteName&) = default;
};

namespace detail {
inline constexpr std::array<std::string_view, 12> kNoteNames = {
    "C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"};

// Semitone index (C0 = 0) of a frequency, fractional.
inline double semitone_index(double f, PitchReference ref) {
  if (ref == PitchReference::A440) return 12.0 * std::log2(f / 440.0) + 57.0;
  return 12.0 * std::log2(f / 256.0) + 48.0;
}
}  // namespace detail

/// Nearest equal-tempered note. C256 places C4 at 256 Hz.
inline std::optional<NoteName> note_name(double f, PitchReference ref = PitchReference::A440) {
  if (!(f > 0) || !std::isfinite(f)) return std::nullopt;
  const double idx = detail::semitone_index(f, ref);
  auto nearest = static_cast<long long>(std::floor(idx + 0.5));
  auto cents = static_cast<int>(std::lround((idx - static_cast<double>(nearest)) * 100.0));
  if (cents >= 50) {
    ++nearest;
    cents -= 100;
  }
  const long long pc = ((nearest % 12) + 12) % 12;
  const long long octave = (nearest - pc) / 12;
  return NoteName{std::string(detail::kNoteNames[static_cast<std::size_t>(pc)]),
                  static_cast<int>(octave), cents};
}

// ---------------------------------------------------------------------------
// Pitch estimation

struct NoteEvent {
  std::uint64_t t_start = 0;
  std::size_t t_len = 0;
  std::optional<double> freq;
  std::optional<NoteName> name;
};

struct PitchOptions {
  std::size_t window_len = 1024;
  double threshold = 0.8;
  std::size_t min_lag = 2;
  std::size_t max_lag = 0;  // 0 means rate / 20
  bool interpolate = true;
  // A peak at lag L is read as m periods of L/m when lag L/m also holds a
  // local maximum at least this strong. Values above 1 disable the check.
  double subharmonic_threshold = 0.3;
  PitchReference ref = PitchReference::A440;
};

namespace detail {

inline std::optional<double> window_frequency(std::span<const std::uint8_t> w, double rate,
                                              const PitchOptions& opt) {
  const std::size_t n = w.size();
  std::vector<double> x(n);
  double mean = 0;
  for (auto s : w) mean += s;
  mean /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = w[i] - mean;

  std::size_t max_lag = opt.max_lag ? opt.max_lag : static_cast<std::size_t>(rate / 20);
  max_lag = std::min(max_lag, n - 2);
  if (max_lag <= opt.min_lag + 1) return std::nullopt;

  // r[l] for l in [min_lag - 1, max_lag + 1] so interior peaks have neighbours.
  const std::size_t lo = opt.min_lag > 0 ? opt.min_lag - 1 : 0;
  const std::size_t hi = max_lag + 1;
  std::vector<double> r(hi + 1, 0.0);
  for (std::size_t lag = lo; lag <= hi; ++lag) {
    double num = 0, e0 = 0, e1 = 0;
    for (std::size_t i = 0; i + lag < n; ++i) {
      num += x[i] * x[i + lag];
      e0 += x[i] * x[i];
      e1 += x[i + lag] * x[i + lag];
    }
    r[lag] = (e0 > 0 && e1 > 0) ? num / std::sqrt(e0 * e1) : 0.0;
  }

  // First local maximum above threshold; skips the initial decay from lag 0.
  for (std::size_t lag = std::max<std::size_t>(opt.min_lag, 1); lag <= max_lag; ++lag) {
    if (r[lag] < opt.threshold) continue;
    if (!(r[lag] >= r[lag - 1] && r[lag] > r[lag + 1])) continue;
    double best = static_cast<double>(lag);
    if (opt.interpolate) {
      const double a = r[lag - 1], b = r[lag], c = r[lag + 1];
      const double denom = a - 2 * b + c;
      if (denom != 0) best += 0.5 * (a - c) / denom;
    }
    // Periods that are not whole samples only repeat exactly after several
    // cycles; look for the shortest lag that divides the peak.
    const std::size_t first = std::max<std::size_t>(opt.min_lag, 1);
    const auto is_peak = [&](double q) {
      for (auto l : {static_cast<std::size_t>(std::floor(q)), static_cast<std::size_t>(std::ceil(q))})
        if (l >= first && l < lag && r[l] >= opt.subharmonic_threshold && r[l] >= r[l - 1] &&
            r[l] > r[l + 1])
          return true;
      return false;
    };
    for (bool divided = true; divided;) {
      divided = false;
      for (std::size_t m = 2; best / static_cast<double>(m) >= static_cast<double>(first); ++m) {
        if (is_peak(best / static_cast<double>(m))) {
          best /= static_cast<double>(m);
          divided = true;
          break;
        }
      }
    }
    return rate / best;
  }
  return std::nullopt;
}

}  // namespace detail

/// Autocorrelation pitch track over consecutive full windows of the chunk.
inline std::vector<NoteEvent> estimate_pitch(const SampleChunk& samples, const PitchOptions& opt = {}) {
  if (opt.window_len < 128) throw std::invalid_argument("window_len must be at least 128");
  std::vector<NoteEvent> out;
  const std::span<const std::uint8_t> data(samples.data);
  for (std::size_t start = 0; start + opt.window_len <= data.size(); start += opt.window_len) {
    NoteEvent ev;
    ev.t_start = samples.t0 + start;
    ev.t_len = opt.window_len;
    ev.freq = detail::window_frequency(data.subspan(start, opt.window_len), samples.rate, opt);
    if (ev.freq) ev.name = note_name(*ev.freq, opt.ref);
    out.push_back(std::move(ev));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Amplitude bitmaps

/// One column per sample, 256 rows; amplitude 255 is the top row.
struct Bitmap {
  std::size_t width = 0;
  static constexpr std::size_t height = 256;
  std::vector<std::uint8_t> pixels;  // row-major, 0 or 255

  bool lit(std::size_t x, std::size_t y) const { return pixels[y * width + x] != 0; }
};

inline Bitmap render_bitmap(const Program& p, std::uint64_t t0, std::size_t n) {
  if (n < 1) throw std::invalid_argument("n must be at least 1");
  Bitmap bm;
  bm.width = n;
  bm.pixels.assign(n * Bitmap::height, 0);
  const SampleChunk chunk = render_range(p, t0, n);
  for (std::size_t x = 0; x < n; ++x) bm.pixels[(255 - chunk.data[x]) * n + x] = 255;
  return bm;
}

/// Binary PPM (P6), white on black.
inline std::size_t write_ppm(const Bitmap& bm, Sink& sink) {
  const std::string header =
      "P6\n" + std::to_string(bm.width) + " " + std::to_string(Bitmap::height) + "\n255\n";
  sink.write(std::span(reinterpret_cast<const std::uint8_t*>(header.data()), header.size()));
  std::vector<std::uint8_t> row(bm.width * 3);
  for (std::size_t y = 0; y < Bitmap::height; ++y) {
    for (std::size_t x = 0; x < bm.width; ++x) {
      const std::uint8_t v = bm.pixels[y * bm.width + x];
      row[3 * x] = row[3 * x + 1] = row[3 * x + 2] = v;
    }
    sink.write(row);
  }
  return header.size() + row.size() * Bitmap::height;
}

}  // namespace bytebeat
