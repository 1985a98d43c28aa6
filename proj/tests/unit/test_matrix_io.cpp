#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <limits>

#include "helpers.hpp"
#include "okr/error.hpp"
#include "okr/matrix_io.hpp"

using namespace okr;
using namespace okr::testing;

namespace {

std::string temp_path(const char* name) { return (std::filesystem::temp_directory_path() / name).string(); }

}  // namespace

TEST_SUITE("matrix_io") {

TEST_CASE("CSV and binary round trips are exact") {
    Rng rng(1);
    MatrixXd M = rng.normal_matrix(4, 7);
    M(0, 0) = 1e-300;
    M(1, 1) = -std::numeric_limits<double>::max();
    M(2, 2) = 0.1;
    for (MatrixFormat f : {MatrixFormat::Csv, MatrixFormat::Binary}) {
        const std::string path = temp_path(f == MatrixFormat::Csv ? "okr_m.csv" : "okr_m.bin");
        write_matrix(path, M, f);
        CHECK(read_matrix(path) == M);
        std::filesystem::remove(path);
    }
}

TEST_CASE("empty matrices") {
    const std::string path = temp_path("okr_empty.csv");
    write_matrix(path, MatrixXd(3, 0));
    const MatrixXd back = read_matrix(path);
    CHECK(back.rows() == 3);
    CHECK(back.cols() == 0);
    std::filesystem::remove(path);
}

TEST_CASE("CSV layout") {
    const std::string path = temp_path("okr_layout.csv");
    MatrixXd M(2, 2);
    M << 1, 0.5, -2, 3;
    write_matrix(path, M);
    std::ifstream in(path);
    std::string a, b, c;
    std::getline(in, a);
    std::getline(in, b);
    std::getline(in, c);
    CHECK(a == "2,2");
    CHECK(b == "1,0.5");
    CHECK(c == "-2,3");
    std::filesystem::remove(path);
}

TEST_CASE("malformed input") {
    const std::string path = temp_path("okr_bad.csv");
    {
        std::ofstream out(path);
        out << "2,2\n1,2\n3\n";
    }
    CHECK_THROWS_AS(read_matrix(path), IoError);
    {
        std::ofstream out(path);
        out << "1,1\nabc\n";
    }
    CHECK_THROWS_AS(read_matrix(path), IoError);
    {
        std::ofstream out(path, std::ios::binary);
        out << "OKRM";
    }
    CHECK_THROWS_AS(read_matrix(path), IoError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(read_matrix(path), IoError);
}

}
