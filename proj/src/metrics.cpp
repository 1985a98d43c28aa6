#include "okr/metrics.hpp"

#include <cmath>
#include <cstdio>

#include "okr/error.hpp"

namespace okr {

double mse(const MatrixRef& prediction, const MatrixRef& target) {
    if (prediction.rows() != target.rows() || prediction.cols() != target.cols())
        throw DimensionError("mse: shape mismatch");
    if (prediction.size() == 0) return 0.0;
    return (prediction - target).squaredNorm() / static_cast<double>(prediction.size());
}

Index argmax_row(const MatrixRef& M, Index j) {
    Index best = 0;
    for (Index i = 1; i < M.rows(); ++i)
        if (M(i, j) > M(best, j)) best = i;
    return best;
}

double argmax_accuracy(const MatrixRef& prediction, const MatrixRef& target) {
    if (prediction.rows() != target.rows() || prediction.cols() != target.cols())
        throw DimensionError("accuracy: shape mismatch");
    if (prediction.cols() == 0) return 0.0;
    Index hits = 0;
    for (Index j = 0; j < prediction.cols(); ++j)
        if (argmax_row(prediction, j) == argmax_row(target, j)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(prediction.cols());
}

std::string format_double(double v) {
    if (std::isnan(v)) return {};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace okr
