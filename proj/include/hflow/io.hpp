#pragma once

#include <iosfwd>
#include <string>

#include "hflow/core.hpp"

namespace hflow {

// Shortest decimal string that parses back to the same double.
// Non-finite values print as nan, inf, -inf.
std::string format_double(double value);

double parse_double(const std::string& token);

// Plain-text dense matrix: first line "M N", then M rows of N
// space-separated decimals. Vectors use the same layout with N = 1.
void write_matrix_text(std::ostream& os, const Matrix& a);
Matrix read_matrix_text(std::istream& is);

void write_vector_text(std::ostream& os, const Vector& v);
Vector read_vector_text(std::istream& is);

Matrix read_matrix_file(const std::string& path);
Vector read_vector_file(const std::string& path);
void write_matrix_file(const std::string& path, const Matrix& a);
void write_vector_file(const std::string& path, const Vector& v);

}  // namespace hflow
