#include "osheda/synthetic.hpp"

#include <cmath>
#include <numeric>

#include "osheda/errors.hpp"
#include "osheda/rng.hpp"

namespace osheda {

namespace {

struct LatentModel {
    std::vector<std::vector<double>> means; // known classes first, then novel
    double sigma;
};

std::vector<double> draw_mean(Rng& rng, std::size_t dim) {
    std::vector<double> m(dim);
    for (double& v : m) v = rng.normal();
    return m;
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

LatentModel draw_latent_model(const SyntheticConfig& cfg, Rng& rng) {
    LatentModel model;
    model.sigma = cfg.noise_std;
    const std::size_t total = cfg.n_known + cfg.n_novel;
    const double min_sep = 2.0 * cfg.noise_std;
    for (std::size_t c = 0; c < total; ++c) {
        bool placed = false;
        for (int attempt = 0; attempt < 100000; ++attempt) {
            auto cand = draw_mean(rng, cfg.latent_dim);
            bool ok = true;
            for (const auto& m : model.means)
                if (dist(cand, m) < min_sep) { ok = false; break; }
            if (ok) {
                model.means.push_back(std::move(cand));
                placed = true;
                break;
            }
        }
        if (!placed)
            throw ConfigError("cannot place class means with the requested separation; "
                              "reduce noise_std or class count");
    }
    return model;
}

Matrix draw_projection(Rng& rng, std::size_t rows, std::size_t latent) {
    Matrix a(rows, latent);
    const double scale = 1.0 / std::sqrt(static_cast<double>(latent));
    for (double& v : a.data()) v = rng.normal() * scale;
    return a;
}

std::vector<double> draw_latent(Rng& rng, const LatentModel& model, std::size_t cls) {
    std::vector<double> z = model.means[cls];
    for (double& v : z) v += model.sigma * rng.normal();
    return z;
}

void project_linear(const Matrix& a, const std::vector<double>& z, double noise, Rng& rng,
                    std::span<double> out) {
    for (std::size_t r = 0; r < a.rows(); ++r) {
        double s = 0.0;
        auto row = a.row(r);
        for (std::size_t c = 0; c < z.size(); ++c) s += row[c] * z[c];
        out[r] = s + noise * rng.normal();
    }
}

void project_warped(const Matrix& a, const std::vector<double>& z, double noise, Rng& rng,
                    std::span<double> out) {
    for (std::size_t r = 0; r < a.rows(); ++r) {
        double s = 0.0;
        auto row = a.row(r);
        for (std::size_t c = 0; c < z.size(); ++c) s += row[c] * z[c];
        out[r] = std::tanh(s) + noise * rng.normal();
    }
}

// Bayes posterior over known classes given a latent point, renormalized.
// Mixing weights are uniform within the known set, so they cancel.
void known_posterior(const LatentModel& model, std::size_t n_known,
                     const std::vector<double>& z, std::span<double> out) {
    double best = -1.0;
    std::vector<double> sq(n_known);
    for (std::size_t c = 0; c < n_known; ++c) {
        double s = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i)
            s += (z[i] - model.means[c][i]) * (z[i] - model.means[c][i]);
        sq[c] = s;
        if (best < 0.0 || s < best) best = s;
    }
    double total = 0.0;
    const double inv2s2 = 1.0 / (2.0 * model.sigma * model.sigma);
    for (std::size_t c = 0; c < n_known; ++c) {
        out[c] = std::exp(-(sq[c] - best) * inv2s2);
        total += out[c];
    }
    for (std::size_t c = 0; c < n_known; ++c) out[c] /= total;
}

} // namespace

void SyntheticConfig::validate() const {
    if (latent_dim < 1 || d_source < 1 || d_target < 1)
        throw ConfigError("synthetic: dimensions must be >= 1");
    if (n_known < 2) throw ConfigError("synthetic: n_known must be >= 2");
    if (n_novel < 1) throw ConfigError("synthetic: n_novel must be >= 1");
    if (!(lambda_true > 0.0 && lambda_true <= 1.0))
        throw ConfigError("synthetic: lambda_true must be in (0, 1]");
    if (n_source < 1 || n_target_unlabeled < 1)
        throw ConfigError("synthetic: dataset sizes must be >= 1");
    if (n_target_labeled_per_class < 1)
        throw ConfigError("synthetic: need at least one labeled target row per class");
    if (!(noise_std > 0.0)) throw ConfigError("synthetic: noise_std must be positive");
}

SyntheticBundle generate_synthetic(const SyntheticConfig& cfg) {
    cfg.validate();
    Rng rng(derive_seed(cfg.seed, 0x5d47));

    const LatentModel model = draw_latent_model(cfg, rng);
    const Matrix a_s = draw_projection(rng, cfg.d_source, cfg.latent_dim);
    const Matrix a_t = draw_projection(rng, cfg.d_target, cfg.latent_dim);

    SyntheticBundle out;
    out.label_space.n_known = cfg.n_known;
    out.lambda_true = cfg.lambda_true;

    // Source: known classes only, uniform class draw.
    out.source.features = Matrix(cfg.n_source, cfg.d_source);
    out.source.labels.emplace(cfg.n_source);
    out.source.domain = Domain::source;
    out.source.name = "synthetic-source";
    for (std::size_t i = 0; i < cfg.n_source; ++i) {
        const std::size_t cls = rng.uniform_index(cfg.n_known);
        (*out.source.labels)[i] = static_cast<int>(cls);
        auto z = draw_latent(rng, model, cls);
        project_linear(a_s, z, cfg.noise_std, rng, out.source.features.row(i));
    }

    // Labeled target: exactly n_target_labeled_per_class per known class.
    const std::size_t n_tl = cfg.n_known * cfg.n_target_labeled_per_class;
    out.target_labeled.features = Matrix(n_tl, cfg.d_target);
    out.target_labeled.labels.emplace(n_tl);
    out.target_labeled.domain = Domain::target;
    out.target_labeled.name = "synthetic-target-labeled";
    for (std::size_t c = 0, i = 0; c < cfg.n_known; ++c) {
        for (std::size_t j = 0; j < cfg.n_target_labeled_per_class; ++j, ++i) {
            (*out.target_labeled.labels)[i] = static_cast<int>(c);
            auto z = draw_latent(rng, model, c);
            project_warped(a_t, z, cfg.noise_std, rng, out.target_labeled.features.row(i));
        }
    }

    // Unlabeled target: round(lambda * n) known rows, the rest novel,
    // generated in blocks and then shuffled.
    const std::size_t n_tu = cfg.n_target_unlabeled;
    const std::size_t n_known_rows = static_cast<std::size_t>(
        std::llround(cfg.lambda_true * static_cast<double>(n_tu)));
    Matrix features(n_tu, cfg.d_target);
    std::vector<int> truth(n_tu);
    Matrix posteriors(n_tu, cfg.n_known);
    for (std::size_t i = 0; i < n_tu; ++i) {
        std::size_t cls;
        if (i < n_known_rows) {
            cls = rng.uniform_index(cfg.n_known);
        } else {
            cls = cfg.n_known + rng.uniform_index(cfg.n_novel);
        }
        truth[i] = static_cast<int>(cls);
        auto z = draw_latent(rng, model, cls);
        project_warped(a_t, z, cfg.noise_std, rng, features.row(i));
        known_posterior(model, cfg.n_known, z, posteriors.row(i));
    }
    std::vector<std::size_t> perm(n_tu);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    out.target_unlabeled.features = features.take_rows(perm);
    out.target_unlabeled.domain = Domain::target;
    out.target_unlabeled.name = "synthetic-target-unlabeled";
    out.target_unlabeled_truth.resize(n_tu);
    out.known_posteriors = posteriors.take_rows(perm);
    for (std::size_t i = 0; i < n_tu; ++i) out.target_unlabeled_truth[i] = truth[perm[i]];

    return out;
}

} // namespace osheda
