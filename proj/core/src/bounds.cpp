#include "osheda/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "osheda/errors.hpp"
#include "osheda/losses.hpp"
#include "osheda/pseudo.hpp"
#include "osheda/rng.hpp"

namespace osheda {

namespace {

constexpr double kLn2 = 0.6931471805599453094;

// Lexicographic row order makes the codebook invariant to the argument
// order of estimate_js (the union is treated as a multiset).
std::vector<std::size_t> lexicographic_order(const Matrix& m) {
    std::vector<std::size_t> idx(m.rows());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        auto ra = m.row(a), rb = m.row(b);
        return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
    });
    return idx;
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

// Lloyd's algorithm on the sorted union; deterministic in (data, seed).
Matrix fit_codebook(const Matrix& data, std::size_t k, std::uint64_t seed) {
    const std::size_t n = data.rows();
    std::vector<std::size_t> pick(n);
    std::iota(pick.begin(), pick.end(), 0);
    Rng rng(seed);
    rng.shuffle(pick);

    const std::size_t centers = std::min(k, n);
    Matrix code(centers, data.cols());
    for (std::size_t c = 0; c < centers; ++c) {
        auto src = data.row(pick[c]);
        auto dst = code.row(c);
        std::copy(src.begin(), src.end(), dst.begin());
    }

    std::vector<std::size_t> assign(n, 0), prev(n, n);
    for (int iter = 0; iter < 50; ++iter) {
        for (std::size_t i = 0; i < n; ++i) {
            double best = sq_dist(data.row(i), code.row(0));
            std::size_t arg = 0;
            for (std::size_t c = 1; c < centers; ++c) {
                const double d = sq_dist(data.row(i), code.row(c));
                if (d < best) {
                    best = d;
                    arg = c;
                }
            }
            assign[i] = arg;
        }
        if (assign == prev) break;
        prev = assign;
        Matrix sums(centers, data.cols());
        std::vector<std::size_t> counts(centers, 0);
        for (std::size_t i = 0; i < n; ++i) {
            auto s = sums.row(assign[i]);
            auto x = data.row(i);
            for (std::size_t c = 0; c < data.cols(); ++c) s[c] += x[c];
            counts[assign[i]]++;
        }
        for (std::size_t c = 0; c < centers; ++c) {
            if (counts[c] == 0) continue; // keep the stale center
            auto dst = code.row(c);
            auto s = sums.row(c);
            for (std::size_t d = 0; d < data.cols(); ++d)
                dst[d] = s[d] / static_cast<double>(counts[c]);
        }
    }
    return code;
}

std::size_t nearest_center(const Matrix& code, std::span<const double> x) {
    double best = sq_dist(x, code.row(0));
    std::size_t arg = 0;
    for (std::size_t c = 1; c < code.rows(); ++c) {
        const double d = sq_dist(x, code.row(c));
        if (d < best) {
            best = d;
            arg = c;
        }
    }
    return arg;
}

// Smoothed histogram: pseudo-count 1/n_cells per cell (one pseudo
// observation spread uniformly), denominator n+1.
std::vector<double> smoothed_histogram(const std::vector<std::size_t>& cells,
                                       std::size_t n_cells) {
    std::vector<double> h(n_cells, 0.0);
    for (std::size_t c : cells) h[c] += 1.0;
    const double denom = static_cast<double>(cells.size()) + 1.0;
    const double pseudo = 1.0 / static_cast<double>(n_cells);
    for (double& v : h) v = (v + pseudo) / denom;
    return h;
}

Matrix map_features(const TrainedModel& model, const Matrix& x, bool source_side) {
    if (source_side) {
        if (!model.f_source)
            throw InvalidInputError("bounds audit requires a model with a source mapping");
        return forward(*model.f_source, x);
    }
    return forward(model.f_target, x);
}

std::vector<std::size_t> rows_where(const std::vector<int>& truth, const LabelSpace& space,
                                    bool known) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool is_known = truth[i] < static_cast<int>(space.n_known);
        if (is_known == known) idx.push_back(i);
    }
    return idx;
}

std::vector<int> gather_ints(const std::vector<int>& v, const std::vector<std::size_t>& idx) {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = v[idx[i]];
    return out;
}

struct AuditContext {
    Matrix repr_source;
    Matrix repr_target; // unlabeled pool
    std::vector<std::size_t> known_rows, unknown_rows;
    std::vector<int> collapsed_truth;
};

AuditContext make_context(const TrainedModel& model, const SyntheticBundle& bundle) {
    AuditContext ctx;
    ctx.repr_source = map_features(model, bundle.source.features, true);
    ctx.repr_target = map_features(model, bundle.target_unlabeled.features, false);
    ctx.known_rows = rows_where(bundle.target_unlabeled_truth, model.label_space, true);
    ctx.unknown_rows = rows_where(bundle.target_unlabeled_truth, model.label_space, false);
    ctx.collapsed_truth.reserve(bundle.target_unlabeled_truth.size());
    for (int y : bundle.target_unlabeled_truth)
        ctx.collapsed_truth.push_back(model.label_space.collapse(y));
    return ctx;
}

} // namespace

double empirical_error(const TrainedModel& model, const Matrix& features,
                       const std::vector<int>& truth, AuditLoss loss, double c,
                       Domain domain) {
    if (truth.size() != features.rows())
        throw InvalidInputError("empirical_error: truth/features mismatch");
    if (features.rows() == 0) throw InvalidInputError("empirical_error: empty sample");
    const LabelSpace& space = model.label_space;

    if (loss == AuditLoss::zero_one) {
        const std::vector<int> preds = model_predict(model, features, domain);
        std::size_t wrong = 0;
        for (std::size_t i = 0; i < truth.size(); ++i)
            if (space.collapse(preds[i]) != space.collapse(truth[i])) ++wrong;
        return static_cast<double>(wrong) / static_cast<double>(truth.size());
    }

    // clipped cross-entropy, truncated at c per row
    const Matrix logits = model_logits(model, features, domain);
    double total = 0.0;
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const int y = space.collapse(truth[r]);
        if (y < 0 || static_cast<std::size_t>(y) >= logits.cols())
            throw InvalidInputError("empirical_error: truth label outside model outputs");
        auto row = logits.row(r);
        const double mx = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double v : row) z += std::exp(v - mx);
        const double ce = std::log(z) - (row[static_cast<std::size_t>(y)] - mx);
        total += std::min(ce, c);
    }
    return total / static_cast<double>(logits.rows());
}

std::vector<int> relabel_to_unknown(const std::vector<int>& truth, const LabelSpace& space) {
    return std::vector<int>(truth.size(), space.unknown_index());
}

double open_set_difference(const TrainedModel& model, const Matrix& target_features,
                           const Matrix& source_features, double lambda, AuditLoss loss,
                           double c) {
    const std::vector<int> t_unk(target_features.rows(), model.label_space.unknown_index());
    const std::vector<int> s_unk(source_features.rows(), model.label_space.unknown_index());
    return empirical_error(model, target_features, t_unk, loss, c) -
           lambda * empirical_error(model, source_features, s_unk, loss, c, Domain::source);
}

double discrete_js(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ShapeError("discrete_js: size mismatch");
    double kl_p = 0.0, kl_q = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double m = 0.5 * (p[i] + q[i]);
        if (p[i] > 0.0) kl_p += p[i] * std::log(p[i] / m);
        if (q[i] > 0.0) kl_q += q[i] * std::log(q[i] / m);
    }
    const double js = 0.5 * kl_p + 0.5 * kl_q;
    return std::clamp(js, 0.0, kLn2 + 1e-12);
}

double estimate_js(const Matrix& samples_a, const Matrix& samples_b,
                   std::size_t codebook_size, std::uint64_t seed) {
    if (codebook_size < 2) throw ConfigError("estimate_js: codebook_size must be >= 2");
    if (samples_a.rows() == 0 || samples_b.rows() == 0)
        throw InvalidInputError("estimate_js: empty sample");
    if (samples_a.cols() != samples_b.cols())
        throw ShapeError("estimate_js: dimension mismatch");

    const Matrix raw_union = Matrix::vcat(samples_a, samples_b);
    const auto order = lexicographic_order(raw_union);
    const Matrix data = raw_union.take_rows(order);
    const Matrix code = fit_codebook(data, codebook_size, seed);

    std::vector<std::size_t> cells_a(samples_a.rows()), cells_b(samples_b.rows());
    for (std::size_t i = 0; i < samples_a.rows(); ++i)
        cells_a[i] = nearest_center(code, samples_a.row(i));
    for (std::size_t i = 0; i < samples_b.rows(); ++i)
        cells_b[i] = nearest_center(code, samples_b.row(i));

    const auto p = smoothed_histogram(cells_a, code.rows());
    const auto q = smoothed_histogram(cells_b, code.rows());
    return discrete_js(p, q);
}

double estimate_js_joint(const Matrix& samples_a, const std::vector<int>& labels_a,
                         const Matrix& samples_b, const std::vector<int>& labels_b,
                         std::size_t codebook_size, std::uint64_t seed) {
    if (labels_a.size() != samples_a.rows() || labels_b.size() != samples_b.rows())
        throw InvalidInputError("estimate_js_joint: labels missing");
    if (codebook_size < 2) throw ConfigError("estimate_js_joint: codebook_size must be >= 2");
    if (samples_a.rows() == 0 || samples_b.rows() == 0)
        throw InvalidInputError("estimate_js_joint: empty sample");
    if (samples_a.cols() != samples_b.cols())
        throw ShapeError("estimate_js_joint: dimension mismatch");

    // Distinct labels actually present; a single shared label collapses the
    // product space back onto the marginal cells.
    std::vector<int> label_set(labels_a);
    label_set.insert(label_set.end(), labels_b.begin(), labels_b.end());
    std::sort(label_set.begin(), label_set.end());
    label_set.erase(std::unique(label_set.begin(), label_set.end()), label_set.end());
    auto label_slot = [&](int y) {
        return static_cast<std::size_t>(
            std::lower_bound(label_set.begin(), label_set.end(), y) - label_set.begin());
    };

    const Matrix raw_union = Matrix::vcat(samples_a, samples_b);
    const auto order = lexicographic_order(raw_union);
    const Matrix data = raw_union.take_rows(order);
    const Matrix code = fit_codebook(data, codebook_size, seed);
    const std::size_t n_cells = code.rows() * label_set.size();

    std::vector<std::size_t> cells_a(samples_a.rows()), cells_b(samples_b.rows());
    for (std::size_t i = 0; i < samples_a.rows(); ++i)
        cells_a[i] = nearest_center(code, samples_a.row(i)) * label_set.size() +
                     label_slot(labels_a[i]);
    for (std::size_t i = 0; i < samples_b.rows(); ++i)
        cells_b[i] = nearest_center(code, samples_b.row(i)) * label_set.size() +
                     label_slot(labels_b[i]);

    const auto p = smoothed_histogram(cells_a, n_cells);
    const auto q = smoothed_histogram(cells_b, n_cells);
    return discrete_js(p, q);
}

double pseudo_label_noise(const std::vector<int>& pseudo_labels,
                          const Matrix& known_posteriors, int unknown_index) {
    if (pseudo_labels.size() != known_posteriors.rows())
        throw InvalidInputError("pseudo_label_noise: rows mismatch");
    if (pseudo_labels.empty()) throw InvalidInputError("pseudo_label_noise: empty sample");
    const std::size_t n_known = known_posteriors.cols();
    const std::size_t k = n_known + 1;
    std::vector<double> onehot(k, 0.0), posterior(k, 0.0);
    double total = 0.0;
    for (std::size_t i = 0; i < pseudo_labels.size(); ++i) {
        std::fill(onehot.begin(), onehot.end(), 0.0);
        std::fill(posterior.begin(), posterior.end(), 0.0);
        const int g = pseudo_labels[i];
        if (g < 0 || static_cast<std::size_t>(g) > n_known ||
            (g != unknown_index && static_cast<std::size_t>(g) >= n_known))
            throw InvalidInputError("pseudo_label_noise: label out of range");
        onehot[static_cast<std::size_t>(g)] = 1.0;
        auto row = known_posteriors.row(i);
        for (std::size_t c = 0; c < n_known; ++c) posterior[c] = row[c];
        total += discrete_js(onehot, posterior);
    }
    return total / static_cast<double>(pseudo_labels.size());
}

double pseudo_label_noise(const TrainedModel& model, const SyntheticBundle& bundle) {
    if (bundle.known_posteriors.rows() != bundle.target_unlabeled.size())
        throw UnsupportedInputError(
            "pseudo-label noise needs generator posteriors (synthetic data only)");
    const Matrix logits = model_logits(model, bundle.target_unlabeled.features);
    std::vector<int> labels;
    if (model.method == Method::rl_osheda) {
        labels = assign_pseudo_labels(logits, model.config.lambda,
                                      model.label_space.unknown_index())
                     .labels;
    } else {
        labels = assign_pseudo_labels_known_only(logits, model.config.lambda,
                                                 model.label_space.unknown_index())
                     .labels;
    }
    const auto known_rows = rows_where(bundle.target_unlabeled_truth, model.label_space, true);
    if (known_rows.empty())
        throw InvalidInputError("pseudo_label_noise: no known-class rows in the pool");
    const std::vector<int> g = gather_ints(labels, known_rows);
    const Matrix posts = bundle.known_posteriors.take_rows(
        std::span<const std::size_t>(known_rows));
    return pseudo_label_noise(g, posts, model.label_space.unknown_index());
}

BoundReport audit_upper_bound(const TrainedModel& model, const SyntheticBundle& bundle,
                              std::size_t codebook_size, std::uint64_t seed, double tolerance,
                              AuditLoss loss, double c) {
    const AuditContext ctx = make_context(model, bundle);
    BoundReport r;
    r.lambda = bundle.lambda_true;
    r.loss_bound_c = (loss == AuditLoss::zero_one) ? 1.0 : c;

    r.target_error = empirical_error(model, bundle.target_unlabeled.features,
                                     ctx.collapsed_truth, loss, c);
    r.source_error = empirical_error(model, bundle.source.features, *bundle.source.labels,
                                     loss, c, Domain::source);
    r.open_set_difference = open_set_difference(model, bundle.target_unlabeled.features,
                                                bundle.source.features, r.lambda, loss, c);

    const Matrix repr_tk =
        ctx.repr_target.take_rows(std::span<const std::size_t>(ctx.known_rows));
    const std::vector<int> truth_k = gather_ints(ctx.collapsed_truth, ctx.known_rows);
    if (repr_tk.rows() > 0) {
        r.js_marginal = estimate_js(ctx.repr_source, repr_tk, codebook_size, seed);
        r.js_joint = estimate_js_joint(ctx.repr_source, *bundle.source.labels, repr_tk,
                                       truth_k, codebook_size, seed);
        const Matrix logits = model_logits(model, bundle.target_unlabeled.features);
        const std::vector<int> g =
            assign_pseudo_labels(logits, model.config.lambda,
                                 model.label_space.unknown_index())
                .labels;
        r.js_joint_pseudo = estimate_js_joint(ctx.repr_source, *bundle.source.labels, repr_tk,
                                              gather_ints(g, ctx.known_rows), codebook_size,
                                              seed);
    }

    r.lhs = r.target_error;
    r.rhs_upper = r.lambda * r.source_error + r.open_set_difference +
                  std::sqrt(2.0) * r.lambda * r.loss_bound_c *
                      (std::sqrt(r.js_marginal) + std::sqrt(r.js_joint));
    r.holds_upper = r.lhs <= r.rhs_upper + tolerance;
    return r;
}

BoundReport audit_lower_bound(const TrainedModel& model, const SyntheticBundle& bundle,
                              std::size_t codebook_size, std::uint64_t seed, double tolerance,
                              AuditLoss loss, double c) {
    const AuditContext ctx = make_context(model, bundle);
    BoundReport r;
    r.lambda = bundle.lambda_true;
    r.loss_bound_c = (loss == AuditLoss::zero_one) ? 1.0 : c;

    r.target_error = empirical_error(model, bundle.target_unlabeled.features,
                                     ctx.collapsed_truth, loss, c);
    const Matrix x_tk = bundle.target_unlabeled.features.take_rows(
        std::span<const std::size_t>(ctx.known_rows));
    const std::vector<int> truth_k = gather_ints(ctx.collapsed_truth, ctx.known_rows);
    r.target_known_error =
        ctx.known_rows.empty() ? 0.0 : empirical_error(model, x_tk, truth_k, loss, c);

    const std::vector<int> s_unk =
        relabel_to_unknown(*bundle.source.labels, model.label_space);
    r.source_unknown_error =
        empirical_error(model, bundle.source.features, s_unk, loss, c, Domain::source);

    if (!ctx.unknown_rows.empty()) {
        const Matrix repr_tu =
            ctx.repr_target.take_rows(std::span<const std::size_t>(ctx.unknown_rows));
        r.js_unknown_marginal = estimate_js(ctx.repr_source, repr_tu, codebook_size, seed);
    }

    r.lhs = r.target_error;
    r.rhs_lower = r.lambda * r.target_known_error +
                  (1.0 - r.lambda) * r.source_unknown_error -
                  std::sqrt(2.0) * (1.0 - r.lambda) * r.loss_bound_c *
                      std::sqrt(r.js_unknown_marginal);
    r.holds_lower = r.lhs >= r.rhs_lower - tolerance;
    return r;
}

std::string bound_report_to_json(const BoundReport& r) {
    nlohmann::json j;
    j["target_error"] = r.target_error;
    j["source_error"] = r.source_error;
    j["open_set_difference"] = r.open_set_difference;
    j["target_known_error"] = r.target_known_error;
    j["source_unknown_error"] = r.source_unknown_error;
    j["js_marginal"] = r.js_marginal;
    j["js_joint"] = r.js_joint;
    j["js_joint_pseudo"] = r.js_joint_pseudo;
    j["js_unknown_marginal"] = r.js_unknown_marginal;
    j["lambda"] = r.lambda;
    j["C"] = r.loss_bound_c;
    j["lhs"] = r.lhs;
    j["rhs_upper"] = r.rhs_upper;
    j["rhs_lower"] = r.rhs_lower;
    j["holds_upper"] = r.holds_upper;
    j["holds_lower"] = r.holds_lower;
    return j.dump(2);
}

} // namespace osheda
