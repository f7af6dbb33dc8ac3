#include "osheda/lambda_estimate.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "osheda/errors.hpp"

namespace osheda {

namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

// k-th smallest of `values` (1-based k), destructive.
double kth_smallest(std::vector<double>& values, std::size_t k) {
    std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(k - 1),
                     values.end());
    return values[k - 1];
}

// Ascending-sorted empirical quantile: value at index ceil(q*n)-1.
double quantile(const std::vector<double>& sorted, double q) {
    if (sorted.empty()) throw InvalidInputError("quantile of empty sample");
    const double pos = std::ceil(q * static_cast<double>(sorted.size())) - 1.0;
    const std::size_t idx =
        static_cast<std::size_t>(std::clamp(pos, 0.0, static_cast<double>(sorted.size() - 1)));
    return sorted[idx];
}

} // namespace

double estimate_lambda(const FeatureDataset& target_labeled,
                       const FeatureDataset& target_unlabeled, std::size_t k) {
    if (target_labeled.dim() != target_unlabeled.dim())
        throw ShapeError("estimate_lambda: feature dimensions differ");
    if (!target_labeled.labels)
        throw InvalidInputError("estimate_lambda: labeled set has no labels");
    const std::size_t n_l = target_labeled.size();
    const std::size_t n_u = target_unlabeled.size();
    if (k < 1 || k >= n_l)
        throw ConfigError("estimate_lambda: k must satisfy 1 <= k < labeled count");

    // Distance from each unlabeled point to its k-th nearest labeled point.
    std::vector<double> unlabeled_knn(n_u);
    std::vector<double> buf(n_l);
    for (std::size_t i = 0; i < n_u; ++i) {
        auto x = target_unlabeled.features.row(i);
        for (std::size_t j = 0; j < n_l; ++j)
            buf[j] = sq_dist(x, target_labeled.features.row(j));
        unlabeled_knn[i] = std::sqrt(kth_smallest(buf, k));
    }
    std::sort(unlabeled_knn.begin(), unlabeled_knn.end());

    // Leave-one-out k-NN radius inside the labeled set.
    std::vector<double> loo(n_l);
    std::vector<double> buf2(n_l - 1);
    for (std::size_t i = 0; i < n_l; ++i) {
        auto x = target_labeled.features.row(i);
        std::size_t m = 0;
        for (std::size_t j = 0; j < n_l; ++j) {
            if (j == i) continue;
            buf2[m++] = sq_dist(x, target_labeled.features.row(j));
        }
        loo[i] = std::sqrt(kth_smallest(buf2, k));
    }
    std::sort(loo.begin(), loo.end());
    const double radius = quantile(loo, 0.95);

    // Largest q whose quantile of unlabeled distances stays within radius.
    double lo = 0.0, hi = 1.0;
    if (quantile(unlabeled_knn, 1.0) <= radius) {
        lo = 1.0;
    } else {
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (quantile(unlabeled_knn, mid) <= radius)
                lo = mid;
            else
                hi = mid;
        }
    }
    return std::clamp(lo, 0.05, 1.0);
}

} // namespace osheda
