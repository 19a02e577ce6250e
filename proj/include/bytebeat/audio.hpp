#pragma once

// Raw unsigned 8-bit PCM and canonical 44-byte-header WAV output.

#include <array>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "bytebeat/sample_chunk.hpp"

namespace bytebeat {

class WriteError : public std::runtime_error {
public:
  WriteError(const std::string& what, std::size_t bytes_written)
      : std::runtime_error(what), bytes_written_(bytes_written) {}
  std::size_t bytes_written() const noexcept { return bytes_written_; }

private:
  std::size_t bytes_written_;
};

/// Append-only byte destination: a file, a borrowed stream or a memory buffer.
class Sink {
public:
  static Sink file(const std::string& path) {
    auto f = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
    if (!*f) throw WriteError("cannot open " + path + " for writing", 0);
    return Sink(std::move(f));
  }
  static Sink stream(std::ostream& os) { return Sink(&os); }
  static Sink memory() { return Sink(std::vector<std::uint8_t>{}); }

  void write(std::span<const std::uint8_t> bytes) {
    if (auto* buf = std::get_if<std::vector<std::uint8_t>>(&target_)) {
      buf->insert(buf->end(), bytes.begin(), bytes.end());
      written_ += bytes.size();
      return;
    }
    std::ostream& os = stream_ref();
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    if (!os) throw WriteError("write failed", written_);
    written_ += bytes.size();
  }

  void flush() {
    if (!std::holds_alternative<std::vector<std::uint8_t>>(target_)) stream_ref().flush();
  }

  std::size_t bytes_written() const noexcept { return written_; }

  /// Contents of a memory sink; empty for other kinds.
  const std::vector<std::uint8_t>& buffer() const {
    static const std::vector<std::uint8_t> empty;
    auto* buf = std::get_if<std::vector<std::uint8_t>>(&target_);
    return buf ? *buf : empty;
  }

private:
  using Target =
      std::variant<std::unique_ptr<std::ofstream>, std::ostream*, std::vector<std::uint8_t>>;
  explicit Sink(Target t) : target_(std::move(t)) {}

  std::ostream& stream_ref() {
    if (auto* f = std::get_if<std::unique_ptr<std::ofstream>>(&target_)) return **f;
    return *std::get<std::ostream*>(target_);
  }

  Target target_;
  std::size_t written_ = 0;
};

using AudioSink = Sink;

/// Writes the chunk's samples verbatim. Returns the number of bytes written.
inline std::size_t write_raw(const SampleChunk& chunk, Sink& sink) {
  sink.write(chunk.data);
  return chunk.data.size();
}

inline constexpr std::size_t kWavHeaderSize = 44;
inline constexpr std::uint64_t kMaxWavSamples = 0xFFFFFFFFull - 45;

/// Mono 8-bit PCM RIFF header for n samples.
inline std::array<std::uint8_t, kWavHeaderSize> wav_header(std::uint64_t n, std::uint32_t rate) {
  if (n > kMaxWavSamples) throw std::length_error("too many samples for a WAV file");
  if (rate == 0) throw std::invalid_argument("sample rate must be positive");
  std::array<std::uint8_t, kWavHeaderSize> h{};
  std::size_t at = 0;
  auto tag = [&](const char (&s)[5]) {
    for (int i = 0; i < 4; ++i) h[at++] = static_cast<std::uint8_t>(s[i]);
  };
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) h[at++] = static_cast<std::uint8_t>(v >> (8 * i));
  };
  auto u16 = [&](std::uint16_t v) {
    h[at++] = static_cast<std::uint8_t>(v);
    h[at++] = static_cast<std::uint8_t>(v >> 8);
  };
  const auto data_size = static_cast<std::uint32_t>(n);
  tag("RIFF");
  u32(36 + data_size);
  tag("WAVE");
  tag("fmt ");
  u32(16);
  u16(1);     // PCM
  u16(1);     // mono
  u32(rate);
  u32(rate);  // byte rate = rate * channels * bytes per sample
  u16(1);     // block align
  u16(8);     // bits per sample
  tag("data");
  u32(data_size);
  return h;
}

/// Writes a WAV file from chunks that must be contiguous in t.
inline std::size_t write_wav(std::span<const SampleChunk> chunks, std::uint32_t rate, Sink& sink) {
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    if (i > 0 && chunks[i].t0 != chunks[i - 1].t0 + chunks[i - 1].data.size())
      throw std::invalid_argument("WAV chunks must be contiguous and in t order");
    n += chunks[i].data.size();
  }
  const auto header = wav_header(n, rate);
  sink.write(header);
  for (const auto& c : chunks) sink.write(c.data);
  return kWavHeaderSize + n;
}

inline std::size_t write_wav(const SampleChunk& chunk, Sink& sink) {
  return write_wav(std::span<const SampleChunk>(&chunk, 1), chunk.rate, sink);
}

}  // namespace bytebeat
