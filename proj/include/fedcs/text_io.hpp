#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>

#include "fedcs/sensing.hpp"

namespace fedcs {

// Shortest decimal form that parses back to the identical double
// (std::to_chars), so every file written here is diffable and round-trips
// bit-exactly.
inline void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

inline std::string format_double(double v) {
  std::string s;
  append_double(s, v);
  return s;
}

// Whitespace tokenizer with strict numeric parsing; all readers below share
// it so parse failures carry a token position.
class TokenReader {
 public:
  explicit TokenReader(std::string text, std::string origin)
      : text_(std::move(text)), origin_(std::move(origin)) {}

  bool next_token(std::string_view& tok) {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
    if (pos_ >= text_.size()) return false;
    const std::size_t start = pos_;
    while (pos_ < text_.size() && !is_space(text_[pos_])) ++pos_;
    tok = std::string_view(text_).substr(start, pos_ - start);
    ++index_;
    return true;
  }

  double read_double() {
    std::string_view tok;
    if (!next_token(tok)) fail("unexpected end of input");
    double v{};
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
      fail("bad number '" + std::string(tok) + "'");
    return v;
  }

  long long read_int() {
    std::string_view tok;
    if (!next_token(tok)) fail("unexpected end of input");
    long long v{};
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
      fail("bad integer '" + std::string(tok) + "'");
    return v;
  }

  std::string read_word() {
    std::string_view tok;
    if (!next_token(tok)) fail("unexpected end of input");
    return std::string(tok);
  }

  void expect_word(const std::string& expected) {
    const std::string got = read_word();
    if (got != expected) fail("expected '" + expected + "', got '" + got + "'");
  }

  void expect_end() {
    std::string_view tok;
    if (next_token(tok)) fail("trailing content '" + std::string(tok) + "'");
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw std::runtime_error(origin_ + ": " + what + " (token " +
                             std::to_string(index_) + ")");
  }

 private:
  static bool is_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r';
  }

  std::string text_;
  std::string origin_;
  std::size_t pos_ = 0;
  std::size_t index_ = 0;
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed for " + path);
}

// Matrix text format: header "rows cols", then rows lines of cols values.
inline std::string matrix_to_text(const Matrix& m) {
  std::string out;
  out += std::to_string(m.rows());
  out += ' ';
  out += std::to_string(m.cols());
  out += '\n';
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out += ' ';
      append_double(out, m(i, j));
    }
    out += '\n';
  }
  return out;
}

inline Matrix matrix_from_reader(TokenReader& r, long long rows, long long cols) {
  if (rows <= 0 || cols <= 0) r.fail("matrix dimensions must be positive");
  Matrix m(rows, cols);
  for (long long i = 0; i < rows; ++i)
    for (long long j = 0; j < cols; ++j) m(i, j) = r.read_double();
  return m;
}

inline Matrix parse_matrix_text(const std::string& text, const std::string& origin) {
  TokenReader r(text, origin);
  const long long rows = r.read_int();
  const long long cols = r.read_int();
  Matrix m = matrix_from_reader(r, rows, cols);
  r.expect_end();
  return m;
}

// Column norms are deliberately left untouched; loaded operators (e.g. a
// sensing matrix composed with an externally learned dictionary) are used
// verbatim.
inline Matrix load_matrix_file(const std::string& path) {
  return parse_matrix_text(read_file(path), path);
}

inline void save_matrix_file(const std::string& path, const Matrix& m) {
  write_file(path, matrix_to_text(m));
}

// Dataset text format: header "S M N", then per sample an "x" block (one row
// of N values) and a "y" block (one row of M values).
inline std::string dataset_to_text(const Dataset& ds) {
  std::string out;
  out += std::to_string(ds.size());
  out += ' ';
  out += std::to_string(ds.m);
  out += ' ';
  out += std::to_string(ds.n);
  out += '\n';
  for (const Sample& s : ds.samples) {
    out += "x\n";
    for (int i = 0; i < ds.n; ++i) {
      if (i) out += ' ';
      append_double(out, s.x[i]);
    }
    out += "\ny\n";
    for (int i = 0; i < ds.m; ++i) {
      if (i) out += ' ';
      append_double(out, s.y[i]);
    }
    out += '\n';
  }
  return out;
}

inline Dataset parse_dataset_text(const std::string& text, const std::string& origin) {
  TokenReader r(text, origin);
  const long long count = r.read_int();
  const long long m = r.read_int();
  const long long n = r.read_int();
  if (count < 0 || m <= 0 || n <= 0) r.fail("bad dataset header");
  Dataset ds;
  ds.m = static_cast<int>(m);
  ds.n = static_cast<int>(n);
  ds.samples.reserve(count);
  for (long long s = 0; s < count; ++s) {
    Sample sample;
    r.expect_word("x");
    sample.x.resize(n);
    for (long long i = 0; i < n; ++i) sample.x[i] = r.read_double();
    r.expect_word("y");
    sample.y.resize(m);
    for (long long i = 0; i < m; ++i) sample.y[i] = r.read_double();
    ds.samples.push_back(std::move(sample));
  }
  r.expect_end();
  return ds;
}

inline Dataset load_dataset_file(const std::string& path) {
  return parse_dataset_text(read_file(path), path);
}

inline void save_dataset_file(const std::string& path, const Dataset& ds) {
  write_file(path, dataset_to_text(ds));
}

}  // namespace fedcs
