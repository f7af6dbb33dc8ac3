#include "osheda/pseudo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "osheda/errors.hpp"

namespace osheda {

namespace {

// Number of rows to mark unknown: floor((1-lambda)*n), with a small epsilon
// so that decimal lambdas (0.1, 0.7, ...) whose binary representation sits
// a few ulps high do not lose a row to the floor.
std::size_t unknown_count(double lambda, std::size_t n) {
    return static_cast<std::size_t>(
        std::floor((1.0 - lambda) * static_cast<double>(n) + 1e-9));
}

PseudoLabels label_from_known(const Matrix& known, double lambda, int unknown_index) {
    if (!(lambda > 0.0 && lambda <= 1.0))
        throw ConfigError("pseudo-labeling requires lambda in (0, 1]");
    if (known.rows() == 0) throw InvalidInputError("pseudo-labeling: empty batch");
    const std::size_t n = known.rows(), k = known.cols();

    PseudoLabels out;
    out.labels.resize(n);
    out.max_known_logit.resize(n);
    for (std::size_t r = 0; r < n; ++r) {
        auto row = known.row(r);
        std::size_t best = 0;
        for (std::size_t c = 1; c < k; ++c)
            if (row[c] > row[best]) best = c;
        out.labels[r] = static_cast<int>(best);
        out.max_known_logit[r] = row[best];
    }

    const std::size_t m = unknown_count(lambda, n);
    if (m > 0) {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return out.max_known_logit[a] < out.max_known_logit[b];
        });
        for (std::size_t i = 0; i < m && i < n; ++i) out.labels[order[i]] = unknown_index;
    }
    return out;
}

} // namespace

PseudoLabels assign_pseudo_labels(const Matrix& logits, double lambda, int unknown_index) {
    if (unknown_index < 1 || logits.cols() != static_cast<std::size_t>(unknown_index) + 1)
        throw ShapeError("assign_pseudo_labels: logits must have unknown_index+1 columns");
    // Drop the unknown column; the rule only looks at known-class logits.
    Matrix known(logits.rows(), logits.cols() - 1);
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        auto src = logits.row(r);
        auto dst = known.row(r);
        for (std::size_t c = 0; c + 1 < logits.cols(); ++c) dst[c] = src[c];
    }
    return label_from_known(known, lambda, unknown_index);
}

PseudoLabels assign_pseudo_labels_known_only(const Matrix& known_logits, double lambda,
                                             int unknown_index) {
    if (known_logits.cols() != static_cast<std::size_t>(unknown_index))
        throw ShapeError("assign_pseudo_labels_known_only: logits must have unknown_index columns");
    return label_from_known(known_logits, lambda, unknown_index);
}

std::vector<int> predict_labels(const Matrix& logits) {
    std::vector<int> out(logits.rows());
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        auto row = logits.row(r);
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.cols(); ++c)
            if (row[c] > row[best]) best = c;
        out[r] = static_cast<int>(best);
    }
    return out;
}

} // namespace osheda
