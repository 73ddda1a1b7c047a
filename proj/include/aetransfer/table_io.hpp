#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace aetransfer {

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

/// Strict parse of a full field; returns false on trailing garbage or empty input.
bool parse_double(std::string_view text, double& out);

/// parse_double that throws DataError mentioning `context`; rejects NaN and Inf.
double parse_finite(std::string_view text, const std::string& context);

std::vector<std::string_view> split(std::string_view line, char delimiter);
std::string_view trim(std::string_view text);

/// Reads a whole file; throws DataError if it cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Writes through a sibling temporary file and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace aetransfer

namespace aetransfer {

/// Little-endian binary buffer for model and cache files.
class BinaryWriter {
 public:
  void u64(std::uint64_t value);
  void f64(double value);
  void str(std::string_view value);
  void bytes(std::string_view value) { buffer_.append(value); }
  const std::string& data() const { return buffer_; }

 private:
  std::string buffer_;
};

class BinaryReader {
 public:
  explicit BinaryReader(std::string data) : data_(std::move(data)) {}
  std::uint64_t u64();
  double f64();
  std::string str();
  std::string bytes(std::size_t count);
  bool at_end() const { return offset_ == data_.size(); }

 private:
  std::string data_;
  std::size_t offset_ = 0;
};

}  // namespace aetransfer
