#pragma once

#include "spring/problems/deblur.hpp"
#include "spring/solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace spring::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

// SPMX words are little-endian regardless of host byte order.
inline std::uint32_t le32(const unsigned char* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}
inline std::uint64_t le64(const unsigned char* p) {
  std::uint64_t v = 0;
  for (int i = 7; i >= 0; --i) v = v << 8 | p[i];
  return v;
}
inline void put_le32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>(v >> (8 * i) & 0xff));
}
inline void put_le64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>(v >> (8 * i) & 0xff));
}

inline double parse_double(const std::string& tok, const std::string& where) {
  const char* begin = tok.c_str();
  while (*begin == ' ' || *begin == '\t') ++begin;
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  while (end && (*end == ' ' || *end == '\t' || *end == '\r')) ++end;
  if (end == begin || *end != '\0') throw FormatError(where + ": cannot parse '" + tok + "' as a number");
  if (!std::isfinite(v)) throw FormatError(where + ": non-finite value '" + tok + "'");
  return v;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream ss(line);
  while (std::getline(ss, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

}  // namespace detail

inline Eigen::MatrixXd parse_spmx(const std::string& bytes, const std::string& name = "<spmx>") {
  if (bytes.size() < 12) throw FormatError(name + ": truncated SPMX header (" + std::to_string(bytes.size()) + " bytes)");
  if (bytes.compare(0, 4, "SPMX") != 0) throw FormatError(name + ": bad magic at offset 0");
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::uint32_t rows = detail::le32(p + 4);
  const std::uint32_t cols = detail::le32(p + 8);
  const std::size_t expect = 12 + std::size_t(rows) * cols * 8;
  if (bytes.size() != expect) {
    throw FormatError(name + ": SPMX payload is " + std::to_string(bytes.size()) + " bytes, header implies " +
                      std::to_string(expect));
  }
  Eigen::MatrixXd M(rows, cols);
  std::size_t off = 12;
  for (std::uint32_t r = 0; r < rows; ++r)
    for (std::uint32_t c = 0; c < cols; ++c, off += 8) {
      const double v = std::bit_cast<double>(detail::le64(p + off));
      if (!std::isfinite(v)) throw FormatError(name + ": non-finite entry at offset " + std::to_string(off));
      M(r, c) = v;
    }
  return M;
}

inline Eigen::MatrixXd parse_csv_matrix(const std::string& text, const std::string& name = "<csv>") {
  std::istringstream in(text);
  std::string line;
  std::vector<std::vector<double>> rows;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    const std::string where = name + ", line " + std::to_string(lineno);
    for (const auto& tok : detail::split(line, ',')) row.push_back(detail::parse_double(tok, where));
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw FormatError(where + ": ragged row (" + std::to_string(row.size()) + " columns, expected " +
                        std::to_string(rows.front().size()) + ")");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw FormatError(name + ": empty matrix file");
  Eigen::MatrixXd M(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  return M;
}

/// CSV or SPMX, chosen by the leading magic bytes.
inline Eigen::MatrixXd load_matrix(const std::string& path) {
  const std::string bytes = detail::read_file(path);
  if (bytes.empty()) throw FormatError(path + ": empty file");
  if (bytes.size() >= 4 && bytes.compare(0, 4, "SPMX") == 0) return parse_spmx(bytes, path);
  return parse_csv_matrix(bytes, path);
}

inline std::string encode_spmx(const Eigen::MatrixXd& M) {
  if (M.rows() > 0xffffffffLL || M.cols() > 0xffffffffLL) throw std::invalid_argument("SPMX: matrix too large");
  std::string out = "SPMX";
  out.reserve(12 + static_cast<std::size_t>(M.size()) * 8);
  detail::put_le32(out, static_cast<std::uint32_t>(M.rows()));
  detail::put_le32(out, static_cast<std::uint32_t>(M.cols()));
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = 0; c < M.cols(); ++c) detail::put_le64(out, std::bit_cast<std::uint64_t>(M(r, c)));
  return out;
}

inline void write_spmx(const std::string& path, const Eigen::MatrixXd& M) { detail::write_file(path, encode_spmx(M)); }

inline std::string format_g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_matrix_csv(const std::string& path, const Eigen::MatrixXd& M) {
  std::string out;
  for (Eigen::Index r = 0; r < M.rows(); ++r) {
    for (Eigen::Index c = 0; c < M.cols(); ++c) {
      if (c) out += ',';
      out += format_g17(M(r, c));
    }
    out += '\n';
  }
  detail::write_file(path, out);
}

// --- PGM ----------------------------------------------------------------------

namespace detail {

// Next whitespace-separated header token, skipping '#' comments.
inline std::string pgm_token(const std::string& bytes, std::size_t& pos, const std::string& name) {
  while (pos < bytes.size()) {
    const char c = bytes[pos];
    if (c == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  if (start == pos) throw FormatError(name + ": truncated PGM at offset " + std::to_string(start));
  return bytes.substr(start, pos - start);
}

inline long pgm_int(const std::string& tok, const std::string& name) {
  char* end = nullptr;
  const long v = std::strtol(tok.c_str(), &end, 10);
  if (*end != '\0' || v < 0) throw FormatError(name + ": bad PGM integer '" + tok + "'");
  return v;
}

}  // namespace detail

inline Image parse_pgm(const std::string& bytes, const std::string& name = "<pgm>") {
  std::size_t pos = 0;
  const std::string magic = detail::pgm_token(bytes, pos, name);
  if (magic != "P5" && magic != "P2") throw FormatError(name + ": unsupported magic '" + magic + "'");
  const long w = detail::pgm_int(detail::pgm_token(bytes, pos, name), name);
  const long h = detail::pgm_int(detail::pgm_token(bytes, pos, name), name);
  const long maxval = detail::pgm_int(detail::pgm_token(bytes, pos, name), name);
  if (maxval != 255) throw FormatError(name + ": unsupported maxval " + std::to_string(maxval));
  if (w == 0 || h == 0) throw FormatError(name + ": empty image");
  Image img(h, w);
  if (magic == "P5") {
    ++pos;  // single whitespace byte after maxval
    if (bytes.size() < pos + static_cast<std::size_t>(w * h)) {
      throw FormatError(name + ": truncated P5 raster at offset " + std::to_string(bytes.size()));
    }
    for (long r = 0; r < h; ++r)
      for (long c = 0; c < w; ++c) img(r, c) = static_cast<unsigned char>(bytes[pos++]) / 255.0;
  } else {
    for (long r = 0; r < h; ++r)
      for (long c = 0; c < w; ++c) {
        const long v = detail::pgm_int(detail::pgm_token(bytes, pos, name), name);
        if (v > 255) throw FormatError(name + ": sample " + std::to_string(v) + " exceeds maxval");
        img(r, c) = static_cast<double>(v) / 255.0;
      }
  }
  return img;
}

inline Image load_image(const std::string& path) { return parse_pgm(detail::read_file(path), path); }

/// Quantizes to 8 bits (clamped, rounded) and writes P5 or P2.
inline void write_pgm(const std::string& path, const Image& img, bool binary = true) {
  std::string out = (binary ? "P5\n" : "P2\n") + std::to_string(img.cols()) + " " + std::to_string(img.rows()) + "\n255\n";
  for (Eigen::Index r = 0; r < img.rows(); ++r) {
    for (Eigen::Index c = 0; c < img.cols(); ++c) {
      const int q = static_cast<int>(std::lround(std::clamp(img(r, c), 0.0, 1.0) * 255.0));
      if (binary) {
        out.push_back(static_cast<char>(q));
      } else {
        out += std::to_string(q);
        out += c + 1 == img.cols() ? '\n' : ' ';
      }
    }
  }
  detail::write_file(path, out);
}

// --- Trace CSV ----------------------------------------------------------------

inline constexpr const char* kTraceHeader = "epoch,sfo_calls,objective,grad_map_norm_sq,wall_ms,lipschitz_sfo";

inline std::string encode_trace(const Trace& trace) {
  std::string out = kTraceHeader;
  out += '\n';
  for (const TraceRow& r : trace.rows) {
    out += format_g17(r.epoch) + ',' + std::to_string(r.sfo_calls) + ',' + format_g17(r.objective) + ',' +
           format_g17(r.grad_map_norm_sq) + ',' + format_g17(r.wall_ms) + ',' + std::to_string(r.lipschitz_sfo) + '\n';
  }
  return out;
}

inline void write_trace_csv(const std::string& path, const Trace& trace) { detail::write_file(path, encode_trace(trace)); }

inline Trace parse_trace(const std::string& text, const std::string& name = "<trace>") {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw FormatError(name + ": empty trace file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader) throw FormatError(name + ":1: unexpected header '" + line + "'");
  Trace trace;
  std::size_t lineno = 1;
  const auto count = [&](const std::string& tok, const std::string& where) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(tok.c_str(), &end, 10);
    if (tok.empty() || *end != '\0') throw FormatError(where + ": bad count '" + tok + "'");
    return static_cast<std::size_t>(v);
  };
  // Objective and gradient-map values may legitimately be inf; parse them leniently.
  const auto real = [&](const std::string& tok, const std::string& where) {
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (tok.empty() || *end != '\0') throw FormatError(where + ": bad number '" + tok + "'");
    return v;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::string where = name + ", line " + std::to_string(lineno);
    const auto tok = detail::split(line, ',');
    if (tok.size() != 6) throw FormatError(where + ": expected 6 fields, got " + std::to_string(tok.size()));
    TraceRow r;
    r.epoch = real(tok[0], where);
    r.sfo_calls = count(tok[1], where);
    r.objective = real(tok[2], where);
    r.grad_map_norm_sq = real(tok[3], where);
    r.wall_ms = real(tok[4], where);
    r.lipschitz_sfo = count(tok[5], where);
    trace.rows.push_back(r);
  }
  return trace;
}

inline Trace read_trace_csv(const std::string& path) { return parse_trace(detail::read_file(path), path); }

}  // namespace spring::io
