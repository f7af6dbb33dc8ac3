#include "osheda/matrix.hpp"

#include <cmath>

#include "osheda/errors.hpp"

namespace osheda {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    Matrix m;
    m.rows_ = rows.size();
    m.cols_ = rows.size() ? rows.begin()->size() : 0;
    m.data_.reserve(m.rows_ * m.cols_);
    for (const auto& r : rows) {
        if (r.size() != m.cols_)
            throw ShapeError("from_rows: ragged initializer");
        m.data_.insert(m.data_.end(), r.begin(), r.end());
    }
    return m;
}

bool Matrix::all_finite() const noexcept {
    for (double v : data_)
        if (!std::isfinite(v)) return false;
    return true;
}

Matrix Matrix::take_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        auto src = row(indices[i]);
        auto dst = out.row(i);
        for (std::size_t c = 0; c < cols_; ++c) dst[c] = src[c];
    }
    return out;
}

Matrix Matrix::vcat(const Matrix& top, const Matrix& bottom) {
    if (top.empty()) return bottom;
    if (bottom.empty()) return top;
    if (top.cols() != bottom.cols())
        throw ShapeError("vcat: column mismatch");
    Matrix out(top.rows() + bottom.rows(), top.cols());
    std::copy(top.data_.begin(), top.data_.end(), out.data_.begin());
    std::copy(bottom.data_.begin(), bottom.data_.end(),
              out.data_.begin() + static_cast<std::ptrdiff_t>(top.data_.size()));
    return out;
}

} // namespace osheda
