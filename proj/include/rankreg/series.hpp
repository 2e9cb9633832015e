#pragma once

#include <iosfwd>
#include <string>

#include "rankreg/linalg.hpp"

namespace rankreg {

// One multivariate time-series block, variables in rows, time in columns.
struct SeriesMatrix {
    Matrix values; // dim x T

    SeriesMatrix() = default;
    explicit SeriesMatrix(Matrix v) : values(std::move(v)) {}
    SeriesMatrix(int dim, int len) : values(Matrix::Zero(dim, len)) {}

    int dim() const { return static_cast<int>(values.rows()); }
    int length() const { return static_cast<int>(values.cols()); }

    // Throws InvalidSpec on non-finite entries or an empty time axis.
    void validate(const char* who) const;
};

// CSV layout: one row per variable, leading cell "var_<i>", values for
// t = 1..T left to right. Numbers are written with 17 significant digits
// so a rewrite of the same data is byte-identical.
void write_csv(std::ostream& os, const SeriesMatrix& series);
void write_csv_file(const std::string& path, const SeriesMatrix& series);
SeriesMatrix read_csv(std::istream& is);
SeriesMatrix read_csv_file(const std::string& path);

// Shared numeric formatting for all CSV writers.
std::string format_double(double x);

} // namespace rankreg
