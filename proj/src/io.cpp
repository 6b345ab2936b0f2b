#include "hflow/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "hflow/errors.hpp"

namespace hflow {

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& token) {
  if (token == "nan") return std::nan("");
  if (token == "inf") return INFINITY;
  if (token == "-inf") return -INFINITY;
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) throw ParseError("not a number: '" + token + "'");
  return value;
}

void write_matrix_text(std::ostream& os, const Matrix& a) {
  os << a.rows() << ' ' << a.cols() << '\n';
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      if (j) os << ' ';
      os << format_double(a(i, j));
    }
    os << '\n';
  }
}

Matrix read_matrix_text(std::istream& is) {
  long long rows = 0;
  long long cols = 0;
  if (!(is >> rows >> cols) || rows < 1 || cols < 1) {
    throw ParseError("matrix header must be 'M N' with positive sizes");
  }
  Matrix a(rows, cols);
  std::string token;
  for (long long i = 0; i < rows; ++i) {
    for (long long j = 0; j < cols; ++j) {
      if (!(is >> token)) throw ParseError("matrix file ended early");
      a(i, j) = parse_double(token);
    }
  }
  if (is >> token) throw ParseError("trailing data after matrix: '" + token + "'");
  return a;
}

void write_vector_text(std::ostream& os, const Vector& v) {
  write_matrix_text(os, Matrix(v));
}

Vector read_vector_text(std::istream& is) {
  const Matrix a = read_matrix_text(is);
  if (a.cols() != 1) throw ParseError("vector file must have exactly one column");
  return a.col(0);
}

Matrix read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return read_matrix_text(in);
}

Vector read_vector_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  return read_vector_text(in);
}

void write_matrix_file(const std::string& path, const Matrix& a) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_matrix_text(out, a);
}

void write_vector_file(const std::string& path, const Vector& v) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_vector_text(out, v);
}

}  // namespace hflow
