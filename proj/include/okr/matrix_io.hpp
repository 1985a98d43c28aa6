#pragma once

#include <string>

#include "okr/kernel.hpp"

namespace okr {

enum class MatrixFormat { Csv, Binary };

/// CSV: a "rows,cols" header line then one line per row (%.17g).
/// Binary: magic "OKRM", uint64 rows, uint64 cols (little endian), then
/// row-major doubles.
void write_matrix(const std::string& path, const MatrixRef& M, MatrixFormat format = MatrixFormat::Csv);

/// Reads either format, detected from the first four bytes.
MatrixXd read_matrix(const std::string& path);

}  // namespace okr
