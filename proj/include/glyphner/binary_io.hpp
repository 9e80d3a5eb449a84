#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace glyphner::io {

// Little-endian encoder appending to an owned byte buffer.
class ByteWriter {
 public:
  void bytes(std::span<const std::uint8_t> data);
  void tag(std::string_view magic);
  void u8(std::uint8_t v);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f32(float v);
  void f64(double v);
  void str(std::string_view s);  // u32 length prefix

  const std::vector<std::uint8_t>& buffer() const noexcept { return buf_; }

 private:
  std::vector<std::uint8_t> buf_;
};

// Little-endian decoder; any read past the end throws FormatError(kTruncated).
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> data, std::string context)
      : data_(data), context_(std::move(context)) {}

  // Throws FormatError(kBadMagic) if the next bytes differ from `magic`.
  void expect_tag(std::string_view magic);
  std::span<const std::uint8_t> bytes(std::size_t n);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::string str();

  std::size_t remaining() const noexcept { return data_.size() - pos_; }
  std::size_t position() const noexcept { return pos_; }
  const std::string& context() const noexcept { return context_; }

 private:
  void need(std::size_t n);

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::string context_;
};

// Whole-file helpers. Missing or unreadable files raise IoError.
std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> data);

}  // namespace glyphner::io
