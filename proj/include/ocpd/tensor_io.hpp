#pragma once

#include "ocpd/tensor.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>

namespace ocpd {

/// Sidecar path for a tensor CSV: same stem, ".json" extension.
std::filesystem::path sidecar_path(const std::filesystem::path& csv_path);

/// Writes `i,j,k,value` rows (0-based, values as %.17g) plus the {"I","J","K"} sidecar.
void write_tensor(const DenseTensor3& t, const std::filesystem::path& csv_path);

/// Reads a tensor written by write_tensor. Duplicate or missing cells are rejected.
DenseTensor3 read_tensor(const std::filesystem::path& csv_path);

/// Stream variants; the dims come from the caller.
void write_tensor_csv(const DenseTensor3& t, std::ostream& out);
DenseTensor3 read_tensor_csv(std::istream& in, std::size_t I, std::size_t J, std::size_t K);

/// One factor matrix as CSV: header `row,c0,c1,...`.
void write_matrix_csv(const Matrix& m, const std::filesystem::path& path);
Matrix read_matrix_csv(const std::filesystem::path& path);

/// Exports A, B, C as `<prefix>_A.csv`, `<prefix>_B.csv`, `<prefix>_C.csv`.
void write_factors(const KruskalFactors& f, const std::filesystem::path& prefix);

/// Shortest round-trip decimal representation.
std::string format_double(double v);

} // namespace ocpd
