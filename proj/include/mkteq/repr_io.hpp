#pragma once

// Labeled representation files.
//
// Binary layout (all integers little-endian):
//
//   offset  size         field
//   0       4            magic "MKTR"
//   4       4            u32 version = 1
//   8       4            u32 n_points (>= 1)
//   12      4            u32 dim
//   16      4*n*dim      f32 features, row-major, IEEE-754 little-endian
//   16+4nd  n            u8 labels, each 0 or 1
//
// Total size is exactly 16 + 4*n*dim + n bytes. Weights are not stored; files
// always load as uniform-weight populations.
//
// CSV: one point per line, `x_0,...,x_{D-1},label`. The dimension comes from
// the first data row. A non-numeric first row is treated as a header.

#include <bit>
#include <cerrno>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <fcntl.h>
#include <unistd.h>

#include "mkteq/errors.hpp"
#include "mkteq/market.hpp"

namespace mkteq {

inline constexpr char kReprMagic[4] = {'M', 'K', 'T', 'R'};
inline constexpr std::uint32_t kReprVersion = 1;
inline constexpr std::size_t kReprHeaderSize = 16;

inline std::uint64_t repr_file_size(std::uint64_t n_points, std::uint64_t dim) {
  return kReprHeaderSize + 4 * n_points * dim + n_points;
}

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<unsigned char>(v >> (8 * k)));
}

inline std::uint32_t get_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::string errno_text() { return std::strerror(errno); }

}  // namespace detail

// Encodes a uniform-weight population in the binary layout.
inline std::vector<unsigned char> encode_repr(const Population& pop) {
  if (!pop.has_uniform_weights()) {
    throw UnsupportedError("repr format stores uniform-weight populations only");
  }
  if (pop.size() > std::numeric_limits<std::uint32_t>::max() ||
      pop.dim() > std::numeric_limits<std::uint32_t>::max()) {
    throw UnsupportedError("population too large for repr format");
  }
  std::vector<unsigned char> out;
  out.reserve(repr_file_size(pop.size(), pop.dim()));
  out.insert(out.end(), std::begin(kReprMagic), std::end(kReprMagic));
  detail::put_u32(out, kReprVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(pop.size()));
  detail::put_u32(out, static_cast<std::uint32_t>(pop.dim()));
  for (double v : pop.features()) detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  for (int y : pop.labels()) out.push_back(static_cast<unsigned char>(y));
  return out;
}

inline Population decode_repr(const unsigned char* data, std::size_t size,
                              const std::string& origin = "<memory>") {
  using Kind = FormatError::Kind;
  if (size == 0) throw FormatError(Kind::kEmpty, origin + ": empty file");
  if (size < kReprHeaderSize) {
    throw FormatError(Kind::kTruncated, origin + ": truncated header (" + std::to_string(size) +
                                            " bytes)");
  }
  if (std::memcmp(data, kReprMagic, 4) != 0) {
    throw FormatError(Kind::kBadMagic, origin + ": bad magic, expected \"MKTR\"");
  }
  const std::uint32_t version = detail::get_u32(data + 4);
  if (version != kReprVersion) {
    throw FormatError(Kind::kUnsupportedVersion,
                      origin + ": unsupported version " + std::to_string(version));
  }
  const std::uint32_t n = detail::get_u32(data + 8);
  const std::uint32_t dim = detail::get_u32(data + 12);
  if (n < 1) throw FormatError(Kind::kBadHeader, origin + ": n_points must be at least 1");
  const std::uint64_t expected = repr_file_size(n, dim);
  if (size < expected) {
    throw FormatError(Kind::kTruncated, origin + ": truncated, expected " +
                                            std::to_string(expected) + " bytes, found " +
                                            std::to_string(size));
  }
  if (size > expected) {
    throw FormatError(Kind::kTrailingData, origin + ": " + std::to_string(size - expected) +
                                               " unexpected trailing bytes");
  }
  const std::size_t count = static_cast<std::size_t>(n) * dim;
  std::vector<double> x(count);
  const unsigned char* p = data + kReprHeaderSize;
  for (std::size_t k = 0; k < count; ++k, p += 4) {
    x[k] = static_cast<double>(std::bit_cast<float>(detail::get_u32(p)));
  }
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i, ++p) {
    if (*p > 1) {
      throw FormatError(Kind::kBadLabel, origin + ": label byte " + std::to_string(*p) +
                                             " at point " + std::to_string(i));
    }
    y[i] = *p;
  }
  return Population::uniform(dim, std::move(x), std::move(y));
}

// Writes and fsyncs the file; errors carry the path.
inline void write_bytes(const std::string& path, const std::vector<unsigned char>& bytes) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  if (fd < 0) throw IoError(path + ": cannot open for writing: " + detail::errno_text());
  std::size_t done = 0;
  while (done < bytes.size()) {
    const ssize_t wrote = ::write(fd, bytes.data() + done, bytes.size() - done);
    if (wrote < 0) {
      if (errno == EINTR) continue;
      const std::string why = detail::errno_text();
      ::close(fd);
      throw IoError(path + ": write failed: " + why);
    }
    done += static_cast<std::size_t>(wrote);
  }
  if (::fsync(fd) != 0) {
    const std::string why = detail::errno_text();
    ::close(fd);
    throw IoError(path + ": fsync failed: " + why);
  }
  if (::close(fd) != 0) throw IoError(path + ": close failed: " + detail::errno_text());
}

inline std::vector<unsigned char> read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path + ": cannot open for reading");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError(path + ": read failed");
  return bytes;
}

inline void write_repr(const Population& pop, const std::string& path) {
  write_bytes(path, encode_repr(pop));
}

inline Population read_repr(const std::string& path) {
  const auto bytes = read_bytes(path);
  return decode_repr(bytes.data(), bytes.size(), path);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

inline std::optional<double> parse_double(std::string_view s) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

struct CsvRow {
  std::vector<double> x;
  int y = 0;
};

// Empty optional with `message` set when the row does not parse.
inline std::optional<CsvRow> parse_csv_row(std::string_view line, std::string& message) {
  const auto fields = split_fields(line);
  CsvRow row;
  for (std::size_t k = 0; k + 1 < fields.size(); ++k) {
    const auto v = parse_double(fields[k]);
    if (!v) {
      message = "field " + std::to_string(k + 1) + " is not a number";
      return std::nullopt;
    }
    row.x.push_back(*v);
  }
  const auto& last = fields.back();
  if (last == "0") {
    row.y = 0;
  } else if (last == "1") {
    row.y = 1;
  } else {
    message = "label '" + std::string(last) + "' is not 0 or 1";
    return std::nullopt;
  }
  return row;
}

}  // namespace detail

inline Population parse_csv_repr(std::string_view text, const std::string& origin = "<memory>") {
  using Kind = FormatError::Kind;
  struct Line {
    std::size_t number;
    std::string_view text;
  };
  std::vector<Line> lines;
  std::size_t number = 0;
  for (std::size_t start = 0; start <= text.size();) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    ++number;
    const auto line = detail::trim(text.substr(start, end - start));
    if (!line.empty()) lines.push_back({number, line});
    start = end + 1;
  }
  if (lines.empty()) throw FormatError(Kind::kEmpty, origin + ": no data rows");

  std::size_t first = 0;
  std::string message;
  if (!detail::parse_csv_row(lines[0].text, message) && lines.size() > 1) first = 1;  // header

  std::vector<double> x;
  std::vector<int> y;
  std::size_t dim = 0;
  for (std::size_t k = first; k < lines.size(); ++k) {
    const auto row = detail::parse_csv_row(lines[k].text, message);
    const std::string where = origin + ": line " + std::to_string(lines[k].number);
    if (!row) {
      const bool bad_label = message.rfind("label", 0) == 0;
      throw FormatError(bad_label ? Kind::kBadLabel : Kind::kParse, where + ": " + message);
    }
    if (k == first) {
      dim = row->x.size();
    } else if (row->x.size() != dim) {
      throw FormatError(Kind::kRagged, where + ": expected " + std::to_string(dim) +
                                           " features, found " + std::to_string(row->x.size()));
    }
    x.insert(x.end(), row->x.begin(), row->x.end());
    y.push_back(row->y);
  }
  return Population::uniform(dim, std::move(x), std::move(y));
}

inline Population read_csv_repr(const std::string& path) {
  const auto bytes = read_bytes(path);
  return parse_csv_repr(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()),
                        path);
}

// Writes `x_0..x_{D-1},label` rows with a header; values use %.17g so they
// parse back exactly.
inline void write_csv_repr(const Population& pop, const std::string& path) {
  std::string text;
  for (std::size_t d = 0; d < pop.dim(); ++d) text += "x" + std::to_string(d) + ",";
  text += "y\n";
  char buf[32];
  for (std::size_t i = 0; i < pop.size(); ++i) {
    for (double v : pop.x(i)) {
      std::snprintf(buf, sizeof buf, "%.17g,", v);
      text += buf;
    }
    text += pop.label(i) == 1 ? "1\n" : "0\n";
  }
  write_bytes(path, std::vector<unsigned char>(text.begin(), text.end()));
}

}  // namespace mkteq
