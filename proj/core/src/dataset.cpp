#include "osheda/dataset.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "osheda/errors.hpp"

namespace osheda {

namespace {

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            cells.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(ch);
        }
    }
    cells.push_back(cur);
    return cells;
}

double parse_cell(const std::string& cell, std::size_t line_no) {
    const char* begin = cell.c_str();
    char* end = nullptr;
    errno = 0;
    double v = std::strtod(begin, &end);
    while (end && *end == ' ') ++end;
    if (end == begin || (end && *end != '\0') || errno == ERANGE)
        throw ParseError("non-numeric cell '" + cell + "'", line_no);
    if (!std::isfinite(v)) throw ParseError("non-finite cell '" + cell + "'", line_no);
    return v;
}

int parse_label(const std::string& cell, std::size_t line_no) {
    double v = parse_cell(cell, line_no);
    double r = std::nearbyint(v);
    if (v != r) throw ParseError("label cell '" + cell + "' is not an integer", line_no);
    return static_cast<int>(r);
}

void format_double(std::string& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

} // namespace

FeatureDataset load_csv(const std::string& path, bool has_labels, Domain domain,
                        const std::string& name) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("cannot open '" + path + "'");

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t cols = 0, n = 0, line_no = 0;
    bool any_unlabeled = false, any_labeled = false;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') continue;
        auto cells = split_commas(line);
        if (has_labels && cells.size() < 2)
            throw ParseError("expected at least one feature and a label column", line_no);
        const std::size_t row_cols = cells.size() - (has_labels ? 1 : 0);
        if (n == 0) {
            cols = row_cols;
        } else if (row_cols != cols) {
            throw ParseError("ragged row: expected " + std::to_string(cols) + " features, got " +
                                 std::to_string(row_cols),
                             line_no);
        }
        for (std::size_t c = 0; c < row_cols; ++c)
            values.push_back(parse_cell(cells[c], line_no));
        if (has_labels) {
            int y = parse_label(cells.back(), line_no);
            if (y == -1) {
                any_unlabeled = true;
                if (any_labeled) throw ParseError("mix of -1 and real labels", line_no);
            } else if (y < 0) {
                throw ParseError("negative label " + std::to_string(y), line_no);
            } else {
                any_labeled = true;
                if (any_unlabeled) throw ParseError("mix of -1 and real labels", line_no);
            }
            labels.push_back(y);
        }
        ++n;
    }
    if (n == 0) throw ParseError("no data rows in '" + path + "'", line_no);

    FeatureDataset ds;
    ds.features = Matrix(n, cols);
    std::copy(values.begin(), values.end(), ds.features.data().begin());
    if (has_labels && any_labeled) ds.labels = std::move(labels);
    ds.domain = domain;
    ds.name = name.empty() ? path : name;
    return ds;
}

void save_csv(const FeatureDataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInputError("cannot write '" + path + "'");
    std::string buf;
    for (std::size_t r = 0; r < dataset.size(); ++r) {
        buf.clear();
        auto row = dataset.features.row(r);
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) buf += ',';
            format_double(buf, row[c]);
        }
        if (dataset.labels) {
            buf += ',';
            buf += std::to_string((*dataset.labels)[r]);
        }
        buf += '\n';
        out << buf;
    }
}

std::vector<int> load_label_column(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("cannot open '" + path + "'");
    std::vector<int> labels;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        labels.push_back(parse_label(line, line_no));
    }
    if (labels.empty()) throw ParseError("no labels in '" + path + "'", line_no);
    return labels;
}

void save_label_column(const std::vector<int>& labels, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInputError("cannot write '" + path + "'");
    for (int y : labels) out << y << '\n';
}

} // namespace osheda
