#pragma once

#include <string>

#include "okr/kernel.hpp"

namespace okr {

/// Mean of the squared entries of prediction - target.
double mse(const MatrixRef& prediction, const MatrixRef& target);

/// Row of the largest entry in column j; ties go to the lowest row.
Index argmax_row(const MatrixRef& M, Index j);

/// Fraction of columns whose argmax agrees between prediction and target.
double argmax_accuracy(const MatrixRef& prediction, const MatrixRef& target);

/// Shortest round-trip text (%.17g); NaN becomes the empty string.
std::string format_double(double v);

}  // namespace okr
