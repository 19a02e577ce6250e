#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <vector>

#include "bytebeat/audio.hpp"
#include "bytebeat/semantics.hpp"

namespace bytebeat {
namespace {

std::uint32_t le32(const std::vector<std::uint8_t>& b, size_t at) {
  return b[at] | (b[at + 1] << 8) | (b[at + 2] << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}
std::uint16_t le16(const std::vector<std::uint8_t>& b, size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}
std::string tag(const std::vector<std::uint8_t>& b, size_t at) {
  return std::string(b.begin() + static_cast<long>(at), b.begin() + static_cast<long>(at) + 4);
}

TEST(WriteRaw, Identity) {
  Sink sink = Sink::memory();
  EXPECT_EQ(write_raw(SampleChunk{0, 8000, {0, 128, 255}}, sink), 3u);
  EXPECT_EQ(sink.buffer(), (std::vector<std::uint8_t>{0x00, 0x80, 0xFF}));

  Sink empty = Sink::memory();
  EXPECT_EQ(write_raw(SampleChunk{}, empty), 0u);
  EXPECT_TRUE(empty.buffer().empty());
}

TEST(WriteRaw, SawtoothSecond) {
  Sink sink = Sink::memory();
  EXPECT_EQ(write_raw(render_range(compile("t", Mode::C32), 0, 8000), sink), 8000u);
  for (size_t i = 0; i < 8000; ++i) ASSERT_EQ(sink.buffer()[i], i % 256);
}

TEST(WriteRaw, FileRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "bytebeat_raw_test.u8";
  const SampleChunk chunk = render_range(compile("t*5&t>>7|t*3&t>>8", Mode::C32), 0, 5000);
  {
    Sink sink = Sink::file(path.string());
    write_raw(chunk, sink);
  }
  std::ifstream in(path, std::ios::binary);
  std::vector<std::uint8_t> back((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  EXPECT_EQ(back, chunk.data);
  std::filesystem::remove(path);
}

TEST(WriteRaw, FailedStreamReportsBytesWritten) {
  std::ostringstream os;
  Sink sink = Sink::stream(os);
  sink.write(std::vector<std::uint8_t>{1, 2});
  os.setstate(std::ios::badbit);
  try {
    sink.write(std::vector<std::uint8_t>{3});
    FAIL();
  } catch (const WriteError& e) {
    EXPECT_EQ(e.bytes_written(), 2u);
  }
}

TEST(WriteWav, HeaderFor8000Samples) {
  Sink sink = Sink::memory();
  const SampleChunk chunk = render_range(compile("t&t>>8", Mode::C32), 0, 8000);
  EXPECT_EQ(write_wav(chunk, sink), 8044u);
  const auto& b = sink.buffer();
  ASSERT_EQ(b.size(), 8044u);
  // 36 + 8000 = 8036 = 0x1F64, 8000 = 0x1F40
  const std::vector<std::uint8_t> head(b.begin(), b.begin() + 8);
  EXPECT_EQ(head, (std::vector<std::uint8_t>{0x52, 0x49, 0x46, 0x46, 0x64, 0x1F, 0x00, 0x00}));
  const std::vector<std::uint8_t> data_tag(b.begin() + 36, b.begin() + 44);
  EXPECT_EQ(data_tag, (std::vector<std::uint8_t>{0x64, 0x61, 0x74, 0x61, 0x40, 0x1F, 0x00, 0x00}));

  EXPECT_EQ(tag(b, 8), "WAVE");
  EXPECT_EQ(tag(b, 12), "fmt ");
  EXPECT_EQ(le32(b, 16), 16u);
  EXPECT_EQ(le16(b, 20), 1u);
  EXPECT_EQ(le16(b, 22), 1u);
  EXPECT_EQ(le32(b, 24), 8000u);
  EXPECT_EQ(le32(b, 28), 8000u);
  EXPECT_EQ(le16(b, 32), 1u);
  EXPECT_EQ(le16(b, 34), 8u);
}

TEST(WriteWav, EmptyAndOtherRates) {
  Sink empty = Sink::memory();
  EXPECT_EQ(write_wav(SampleChunk{}, empty), 44u);
  EXPECT_EQ(le32(empty.buffer(), 40), 0u);
  EXPECT_EQ(le32(empty.buffer(), 4), 36u);

  Sink one = Sink::memory();
  write_wav(SampleChunk{0, 44100, {7}}, one);
  EXPECT_EQ(le32(one.buffer(), 24), 44100u);
  EXPECT_EQ(le32(one.buffer(), 28), 44100u);
  EXPECT_EQ(le16(one.buffer(), 32), 1u);
}

TEST(WriteWav, StrippedHeaderEqualsRawStream) {
  const Program p = compile("t*(0xCA98>>(t>>9&14)&15)|t>>8", Mode::C32);
  std::vector<SampleChunk> chunks;
  for (std::uint64_t t0 = 100; t0 < 100 + 5 * 3000; t0 += 3000) chunks.push_back(render_range(p, t0, 3000));
  Sink wav = Sink::memory();
  Sink raw = Sink::memory();
  write_wav(chunks, 8000, wav);
  for (const auto& c : chunks) write_raw(c, raw);
  const std::vector<std::uint8_t> body(wav.buffer().begin() + 44, wav.buffer().end());
  EXPECT_EQ(body, raw.buffer());
  EXPECT_EQ(body, render_range(p, 100, 15000).data);
}

TEST(WriteWav, Rejections) {
  EXPECT_THROW(wav_header(kMaxWavSamples + 1, 8000), std::length_error);
  EXPECT_NO_THROW(wav_header(kMaxWavSamples, 8000));
  EXPECT_EQ(kMaxWavSamples, 4294967250ull);
  EXPECT_THROW(wav_header(10, 0), std::invalid_argument);
  std::vector<SampleChunk> gap{{0, 8000, {1, 2}}, {5, 8000, {3}}};
  Sink sink = Sink::memory();
  EXPECT_THROW(write_wav(gap, 8000, sink), std::invalid_argument);
}

}  // namespace
}  // namespace bytebeat
