#include "rankreg/series.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <vector>

namespace rankreg {

void SeriesMatrix::validate(const char* who) const {
    if (length() < 1)
        throw Error(ErrorCode::InvalidSpec, std::string(who) + ": empty time axis");
    if (!values.allFinite())
        throw Error(ErrorCode::InvalidSpec, std::string(who) + ": non-finite values");
}

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

void write_csv(std::ostream& os, const SeriesMatrix& series) {
    for (int i = 0; i < series.dim(); ++i) {
        os << "var_" << (i + 1);
        for (int t = 0; t < series.length(); ++t)
            os << ',' << format_double(series.values(i, t));
        os << '\n';
    }
}

void write_csv_file(const std::string& path, const SeriesMatrix& series) {
    std::ofstream os(path);
    if (!os) throw Error(ErrorCode::IoError, "cannot open " + path);
    write_csv(os, series);
}

SeriesMatrix read_csv(std::istream& is) {
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ','); // var_<i> label
        std::vector<double> row;
        while (std::getline(ss, cell, ','))
            row.push_back(std::stod(cell));
        if (!rows.empty() && row.size() != rows.front().size())
            throw Error(ErrorCode::IoError, "ragged CSV rows");
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw Error(ErrorCode::IoError, "empty CSV");
    SeriesMatrix out(static_cast<int>(rows.size()), static_cast<int>(rows.front().size()));
    for (size_t i = 0; i < rows.size(); ++i)
        for (size_t t = 0; t < rows[i].size(); ++t)
            out.values(static_cast<int>(i), static_cast<int>(t)) = rows[i][t];
    return out;
}

SeriesMatrix read_csv_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw Error(ErrorCode::IoError, "cannot open " + path);
    return read_csv(is);
}

} // namespace rankreg
