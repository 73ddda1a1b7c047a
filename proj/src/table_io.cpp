#include "aetransfer/table_io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "aetransfer/error.hpp"

namespace aetransfer {

double parse_finite(std::string_view text, const std::string& context) {
  double value = 0.0;
  if (!parse_double(text, value)) throw DataError(context + ": cannot parse '" + std::string(text) + "'");
  if (!std::isfinite(value)) throw DataError(context + ": non-finite value");
  return value;
}

std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

bool parse_double(std::string_view text, double& out) {
  text = trim(text);
  if (text.empty()) return false;
  if (text.front() == '+') text.remove_prefix(1);
  const auto result = std::from_chars(text.data(), text.data() + text.size(), out);
  return result.ec == std::errc() && result.ptr == text.data() + text.size();
}

std::vector<std::string_view> split(std::string_view line, char delimiter) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(delimiter, start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view text) {
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = text.find_last_not_of(" \t\r\n");
  return text.substr(first, last - first + 1);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw DataError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace aetransfer

namespace aetransfer {

void BinaryWriter::u64(std::uint64_t value) {
  for (int i = 0; i < 8; ++i) buffer_.push_back(static_cast<char>((value >> (8 * i)) & 0xff));
}

void BinaryWriter::f64(double value) { u64(std::bit_cast<std::uint64_t>(value)); }

void BinaryWriter::str(std::string_view value) {
  u64(value.size());
  buffer_.append(value);
}

std::uint64_t BinaryReader::u64() {
  if (data_.size() - offset_ < 8) throw DataError("binary file truncated");
  std::uint64_t value = 0;
  for (int i = 0; i < 8; ++i)
    value |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[offset_ + i])) << (8 * i);
  offset_ += 8;
  return value;
}

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string BinaryReader::str() { return bytes(static_cast<std::size_t>(u64())); }

std::string BinaryReader::bytes(std::size_t count) {
  if (data_.size() - offset_ < count) throw DataError("binary file truncated");
  std::string out = data_.substr(offset_, count);
  offset_ += count;
  return out;
}

}  // namespace aetransfer
