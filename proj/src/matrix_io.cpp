#include "okr/matrix_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>

#include "okr/error.hpp"
#include "okr/metrics.hpp"

namespace okr {

namespace {

constexpr char kMagic[4] = {'O', 'K', 'R', 'M'};

static_assert(std::endian::native == std::endian::little, "binary matrix files assume a little-endian host");

}  // namespace

void write_matrix(const std::string& path, const MatrixRef& M, MatrixFormat format) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    if (format == MatrixFormat::Binary) {
        const std::uint64_t dims[2] = {static_cast<std::uint64_t>(M.rows()), static_cast<std::uint64_t>(M.cols())};
        out.write(kMagic, 4);
        out.write(reinterpret_cast<const char*>(dims), sizeof dims);
        for (Index i = 0; i < M.rows(); ++i)
            for (Index j = 0; j < M.cols(); ++j) {
                const double v = M(i, j);
                out.write(reinterpret_cast<const char*>(&v), sizeof v);
            }
    } else {
        out << M.rows() << ',' << M.cols() << '\n';
        for (Index i = 0; i < M.rows(); ++i) {
            for (Index j = 0; j < M.cols(); ++j) out << (j ? "," : "") << format_double(M(i, j));
            out << '\n';
        }
    }
    if (!out) throw IoError("write to '" + path + "' failed");
}

MatrixXd read_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    char head[4] = {};
    in.read(head, 4);
    if (in.gcount() == 4 && std::memcmp(head, kMagic, 4) == 0) {
        std::uint64_t dims[2];
        if (!in.read(reinterpret_cast<char*>(dims), sizeof dims)) throw IoError("'" + path + "': truncated header");
        MatrixXd M(static_cast<Index>(dims[0]), static_cast<Index>(dims[1]));
        for (Index i = 0; i < M.rows(); ++i)
            for (Index j = 0; j < M.cols(); ++j)
                if (!in.read(reinterpret_cast<char*>(&M(i, j)), sizeof(double)))
                    throw IoError("'" + path + "': truncated data");
        return M;
    }
    in.clear();
    in.seekg(0);
    std::string line;
    long rows = -1, cols = -1;
    char comma = 0;
    if (!std::getline(in, line) || !(std::istringstream(line) >> rows >> comma >> cols) || comma != ',' || rows < 0 ||
        cols < 0)
        throw IoError("'" + path + "': expected a 'rows,cols' header");
    MatrixXd M(rows, cols);
    for (long i = 0; i < rows; ++i) {
        if (!std::getline(in, line)) throw IoError("'" + path + "': missing row " + std::to_string(i));
        std::stringstream ss(line);
        std::string cell;
        long j = 0;
        for (; std::getline(ss, cell, ','); ++j) {
            if (j >= cols) throw IoError("'" + path + "': too many columns in row " + std::to_string(i));
            try {
                M(i, j) = std::stod(cell);
            } catch (const std::exception&) {
                throw IoError("'" + path + "': bad number '" + cell + "'");
            }
        }
        if (j != cols) throw IoError("'" + path + "': row " + std::to_string(i) + " has " + std::to_string(j) +
                                     " columns, expected " + std::to_string(cols));
    }
    return M;
}

}  // namespace okr
