#include "osheda/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "osheda/errors.hpp"

namespace osheda {

namespace {

// Mean CE against a single fixed class for every row (the "relabel to unk"
// case); shares the softmax core with cross_entropy.
double cross_entropy_fixed(const Matrix& logits, int label, Matrix* grad) {
    std::vector<int> labels(logits.rows(), label);
    return cross_entropy(logits, labels, grad);
}

// mu = mean of selected rows; returns number of rows selected.
std::size_t centroid(const Matrix& reprs, const std::vector<std::size_t>& rows,
                     std::vector<double>& mu) {
    mu.assign(reprs.cols(), 0.0);
    for (std::size_t r : rows) {
        auto row = reprs.row(r);
        for (std::size_t c = 0; c < reprs.cols(); ++c) mu[c] += row[c];
    }
    if (!rows.empty())
        for (double& v : mu) v /= static_cast<double>(rows.size());
    return rows.size();
}

// Adds the gradient of ||mu_a - mu_b||^2 to the selected rows of the two
// gradient matrices: +2 diff / n_a on side a, -2 diff / n_b on side b.
void add_centroid_grad(const std::vector<double>& diff,
                       const std::vector<std::size_t>& rows_a, Matrix* grad_a,
                       const std::vector<std::size_t>& rows_b, Matrix* grad_b) {
    if (grad_a && !rows_a.empty()) {
        const double scale = 2.0 / static_cast<double>(rows_a.size());
        for (std::size_t r : rows_a) {
            auto g = grad_a->row(r);
            for (std::size_t c = 0; c < diff.size(); ++c) g[c] += scale * diff[c];
        }
    }
    if (grad_b && !rows_b.empty()) {
        const double scale = -2.0 / static_cast<double>(rows_b.size());
        for (std::size_t r : rows_b) {
            auto g = grad_b->row(r);
            for (std::size_t c = 0; c < diff.size(); ++c) g[c] += scale * diff[c];
        }
    }
}

double squared_norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

std::vector<std::size_t> all_rows(const Matrix& m) {
    std::vector<std::size_t> idx(m.rows());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    return idx;
}

} // namespace

double cross_entropy(const Matrix& logits, const std::vector<int>& labels, Matrix* grad) {
    if (logits.rows() == 0) throw InvalidInputError("cross_entropy: empty batch");
    if (labels.size() != logits.rows())
        throw ShapeError("cross_entropy: labels/rows mismatch");
    const std::size_t n = logits.rows(), k = logits.cols();
    for (int y : labels)
        if (y < 0 || static_cast<std::size_t>(y) >= k)
            throw InvalidInputError("cross_entropy: label " + std::to_string(y) +
                                    " out of range for " + std::to_string(k) + " classes");
    if (grad) *grad = Matrix(n, k);
    double total = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        auto row = logits.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double v : row) z += std::exp(v - mx);
        const double logz = std::log(z);
        total += logz - (row[static_cast<std::size_t>(labels[r])] - mx);
        if (grad) {
            auto g = grad->row(r);
            for (std::size_t c = 0; c < k; ++c)
                g[c] = std::exp(row[c] - mx) / z / static_cast<double>(n);
            g[static_cast<std::size_t>(labels[r])] -= 1.0 / static_cast<double>(n);
        }
    }
    return total / static_cast<double>(n);
}

double classification_loss(const Matrix& source_logits, const std::vector<int>& source_labels,
                           const Matrix& target_logits, const std::vector<int>& target_labels,
                           double lambda, Matrix* grad_source, Matrix* grad_target) {
    if (source_logits.rows() == 0 || target_logits.rows() == 0)
        throw InvalidInputError("classification_loss: empty batch");
    const double ce_s = cross_entropy(source_logits, source_labels, grad_source);
    const double ce_t = cross_entropy(target_logits, target_labels, grad_target);
    if (grad_source)
        for (double& v : grad_source->data()) v *= lambda;
    return lambda * ce_s + ce_t;
}

double alignment_loss(const Matrix& source_reprs, const std::vector<int>& source_labels,
                      const Matrix& target_reprs, const std::vector<int>& target_labels,
                      std::size_t n_known, Matrix* grad_source, Matrix* grad_target) {
    if (source_reprs.rows() == 0 && target_reprs.rows() == 0)
        throw InvalidInputError("alignment_loss: both batches empty");
    if (source_labels.size() != source_reprs.rows() ||
        target_labels.size() != target_reprs.rows())
        throw ShapeError("alignment_loss: labels/rows mismatch");
    if (grad_source) *grad_source = Matrix(source_reprs.rows(), source_reprs.cols());
    if (grad_target) *grad_target = Matrix(target_reprs.rows(), target_reprs.cols());

    std::vector<std::size_t> src_rows = all_rows(source_reprs);
    std::vector<std::size_t> tgt_known;
    for (std::size_t r = 0; r < target_reprs.rows(); ++r)
        if (target_labels[r] >= 0 && static_cast<std::size_t>(target_labels[r]) < n_known)
            tgt_known.push_back(r);

    double loss = 0.0;
    std::vector<double> mu_s, mu_t, diff;
    if (!src_rows.empty() && !tgt_known.empty()) {
        centroid(source_reprs, src_rows, mu_s);
        centroid(target_reprs, tgt_known, mu_t);
        diff.resize(mu_s.size());
        for (std::size_t c = 0; c < diff.size(); ++c) diff[c] = mu_s[c] - mu_t[c];
        loss += squared_norm(diff);
        add_centroid_grad(diff, src_rows, grad_source, tgt_known, grad_target);
    }
    for (std::size_t m = 0; m < n_known; ++m) {
        std::vector<std::size_t> sm, tm;
        for (std::size_t r = 0; r < source_reprs.rows(); ++r)
            if (static_cast<std::size_t>(source_labels[r]) == m) sm.push_back(r);
        for (std::size_t r : tgt_known)
            if (static_cast<std::size_t>(target_labels[r]) == m) tm.push_back(r);
        if (sm.empty() || tm.empty()) continue; // undefined centroid: skip class term
        centroid(source_reprs, sm, mu_s);
        centroid(target_reprs, tm, mu_t);
        diff.resize(mu_s.size());
        for (std::size_t c = 0; c < diff.size(); ++c) diff[c] = mu_s[c] - mu_t[c];
        loss += squared_norm(diff);
        add_centroid_grad(diff, sm, grad_source, tm, grad_target);
    }
    return loss;
}

double segregation_loss(const Matrix& known_reprs, const Matrix& unknown_reprs,
                        Matrix* grad_known, Matrix* grad_unknown) {
    if (grad_known) *grad_known = Matrix(known_reprs.rows(), known_reprs.cols());
    if (grad_unknown) *grad_unknown = Matrix(unknown_reprs.rows(), unknown_reprs.cols());
    if (known_reprs.rows() == 0 || unknown_reprs.rows() == 0) return 0.0;

    std::vector<std::size_t> krows = all_rows(known_reprs);
    std::vector<std::size_t> urows = all_rows(unknown_reprs);
    std::vector<double> mu_k, mu_u;
    centroid(known_reprs, krows, mu_k);
    centroid(unknown_reprs, urows, mu_u);
    std::vector<double> diff(mu_k.size());
    for (std::size_t c = 0; c < diff.size(); ++c) diff[c] = mu_k[c] - mu_u[c];
    add_centroid_grad(diff, krows, grad_known, urows, grad_unknown);
    return squared_norm(diff);
}

double open_set_risk(const Matrix& target_logits, const Matrix& source_logits,
                     double lambda, int unknown_index, Matrix* grad_target,
                     Matrix* grad_source) {
    if (target_logits.rows() == 0)
        throw InvalidInputError("open_set_risk: empty target batch");
    if (source_logits.rows() == 0)
        throw InvalidInputError("open_set_risk: empty source batch");
    Matrix gt, gs;
    const double ce_t = cross_entropy_fixed(target_logits, unknown_index,
                                            grad_target ? &gt : nullptr);
    const double ce_s = cross_entropy_fixed(source_logits, unknown_index,
                                            grad_source ? &gs : nullptr);
    const double raw = ce_t - lambda * ce_s;
    if (grad_target) *grad_target = Matrix(target_logits.rows(), target_logits.cols());
    if (grad_source) *grad_source = Matrix(source_logits.rows(), source_logits.cols());
    if (raw <= 0.0) return 0.0;
    if (grad_target) *grad_target = std::move(gt);
    if (grad_source) {
        for (double& v : gs.data()) v *= -lambda;
        *grad_source = std::move(gs);
    }
    return raw;
}

LossBreakdown combine_losses(double classification, double alignment, double segregation,
                             double open_set, const LossToggles& toggles) {
    LossBreakdown b;
    b.classification = classification;
    b.alignment = toggles.align ? alignment : 0.0;
    b.segregation = toggles.segregate ? segregation : 0.0;
    b.open_set = toggles.osd ? open_set : 0.0;
    b.total = b.classification + b.alignment - b.segregation + b.open_set;
    return b;
}

} // namespace osheda
