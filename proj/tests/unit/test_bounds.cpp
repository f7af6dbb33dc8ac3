#include <doctest.h>

#include <cmath>

#include "osheda/bounds.hpp"
#include "osheda/errors.hpp"
#include "osheda/rng.hpp"
#include "osheda/synthetic.hpp"
#include "osheda/trainer.hpp"

using namespace osheda;

namespace {

constexpr double kLn2 = 0.6931471805599453;

SyntheticConfig audit_task(std::uint64_t seed, double lambda = 0.7) {
    SyntheticConfig cfg;
    cfg.latent_dim = 3;
    cfg.d_source = 5;
    cfg.d_target = 6;
    cfg.n_known = 3;
    cfg.n_novel = 1;
    cfg.lambda_true = lambda;
    cfg.n_source = 150;
    cfg.n_target_labeled_per_class = 5;
    cfg.n_target_unlabeled = 200;
    cfg.noise_std = 0.3;
    cfg.seed = seed;
    return cfg;
}

TrainedModel untrained_model(const SyntheticBundle& b, std::uint64_t seed) {
    TrainedModel m;
    m.method = Method::rl_osheda;
    m.label_space = b.label_space;
    m.config.lambda = b.lambda_true;
    m.config.repr_dim = 6;
    m.config.seed = seed;
    m.f_source = build_representation_mapping(b.source.dim(), 6);
    m.f_target = build_representation_mapping(b.target_labeled.dim(), 6);
    m.classifier = build_classifier(6, b.label_space.n_total());
    Rng rng(derive_seed(seed, 1));
    initialize_params(*m.f_source, rng);
    initialize_params(m.f_target, rng);
    initialize_params(m.classifier, rng);
    return m;
}

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = scale * rng.normal();
    return m;
}

} // namespace

TEST_CASE("empirical_error basic cases") {
    const SyntheticBundle b = generate_synthetic(audit_task(3));
    const TrainedModel m = untrained_model(b, 3);

    // Perfect and uniformly wrong predictions via doctored truth vectors.
    const std::vector<int> preds = model_predict(m, b.target_unlabeled.features);
    CHECK(empirical_error(m, b.target_unlabeled.features, preds, AuditLoss::zero_one) == 0.0);
    std::vector<int> wrong(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i)
        wrong[i] = (preds[i] + 1) % static_cast<int>(m.label_space.n_total());
    CHECK(empirical_error(m, b.target_unlabeled.features, wrong, AuditLoss::zero_one) == 1.0);
}

TEST_CASE("clipped cross-entropy error saturates at the bound") {
    // Uniform logits over 5 classes: CE = ln 5 > 1, clipped to C = 1.
    TrainedModel m;
    m.method = Method::rl_osheda;
    m.label_space.n_known = 4;
    Network f;
    f.layers = {{LayerKind::affine, 5, 5}};
    allocate_params(f); // zero weights: logits all zero = uniform softmax
    m.f_target = f;
    m.classifier = f;
    m.f_source = f;
    const Matrix x(4, 5, 0.3);
    const std::vector<int> y = {0, 1, 2, 3};
    CHECK(empirical_error(m, x, y, AuditLoss::clipped_ce, 1.0) == doctest::Approx(1.0));
    CHECK(empirical_error(m, x, y, AuditLoss::clipped_ce, 10.0) ==
          doctest::Approx(std::log(5.0)));
}

TEST_CASE("relabel_to_unknown") {
    LabelSpace space{3};
    const std::vector<int> mixed = {0, 1, 2, 3, 1};
    const std::vector<int> relabeled = relabel_to_unknown(mixed, space);
    for (int y : relabeled) CHECK(y == 3);
    CHECK(relabel_to_unknown(relabeled, space) == relabeled); // idempotent
}

TEST_CASE("open_set_difference is affine in lambda") {
    const SyntheticBundle b = generate_synthetic(audit_task(4));
    const TrainedModel m = untrained_model(b, 4);
    const auto osd = [&](double lam) {
        return open_set_difference(m, b.target_unlabeled.features, b.source.features, lam,
                                   AuditLoss::zero_one);
    };
    const double at0 = osd(0.0), at1 = osd(1.0), at_half = osd(0.5);
    CHECK(at_half == doctest::Approx(0.5 * (at0 + at1)).epsilon(1e-12));

    // lambda = 0 reduces to the target-as-unknown error alone.
    const std::vector<int> t_unk(b.target_unlabeled.size(),
                                 m.label_space.unknown_index());
    CHECK(at0 == doctest::Approx(empirical_error(m, b.target_unlabeled.features, t_unk,
                                                 AuditLoss::zero_one)));
}

TEST_CASE("discrete_js hand values") {
    // P = (1,0), Q = (0.5,0.5).
    const std::vector<double> p = {1.0, 0.0}, q = {0.5, 0.5};
    CHECK(discrete_js(p, q) == doctest::Approx(0.21576155433883565).epsilon(1e-10));
    CHECK(discrete_js(p, p) == 0.0);
    // Disjoint supports reach ln 2.
    const std::vector<double> a = {1.0, 0.0}, bb = {0.0, 1.0};
    CHECK(discrete_js(a, bb) == doctest::Approx(kLn2).epsilon(1e-12));
}

TEST_CASE("estimate_js properties") {
    Rng rng(31);
    for (int rep = 0; rep < 10; ++rep) {
        const std::size_t d = 1 + rng.uniform_index(3);
        const Matrix a = random_matrix(rng, 30 + rng.uniform_index(40), d);
        const Matrix b = random_matrix(rng, 30 + rng.uniform_index(40), d);
        const double ab = estimate_js(a, b, 8, 5);
        const double ba = estimate_js(b, a, 8, 5);
        CHECK(ab == ba); // exact symmetry via the shared order-normalized codebook
        CHECK(ab >= 0.0);
        CHECK(ab <= kLn2 + 1e-12);
        CHECK(estimate_js(a, a, 8, 5) <= 1e-6);
    }

    // Well-separated clusters occupy disjoint cells: JS near ln 2.
    Rng rng2(32);
    Matrix left = random_matrix(rng2, 60, 2, 0.1);
    Matrix right = random_matrix(rng2, 60, 2, 0.1);
    for (std::size_t r = 0; r < right.rows(); ++r) right.at(r, 0) += 50.0;
    CHECK(estimate_js(left, right, 8, 5) > kLn2 - 0.1);

    CHECK_THROWS_AS(estimate_js(left, right, 1, 5), ConfigError);
    CHECK_THROWS_AS(estimate_js(left, Matrix(), 8, 5), InvalidInputError);
}

TEST_CASE("estimate_js_joint collapses and separates") {
    Rng rng(33);
    const Matrix a = random_matrix(rng, 50, 2);
    const Matrix b = random_matrix(rng, 50, 2);

    // Identical samples and labels: zero.
    std::vector<int> ya(50, 1);
    CHECK(estimate_js_joint(a, ya, a, ya, 8, 7) <= 1e-6);

    // Constant equal labels on both sides collapse onto the marginal value.
    std::vector<int> yb(50, 1);
    CHECK(estimate_js_joint(a, ya, b, yb, 8, 7) ==
          doctest::Approx(estimate_js(a, b, 8, 7)).epsilon(1e-12));

    // Identical marginals with disjoint labels: ln 2 up to the smoothing
    // floor spread across the product cells.
    std::vector<int> y0(50, 0), y1(50, 1);
    CHECK(estimate_js_joint(a, y0, a, y1, 8, 7) > kLn2 - 0.1);
}

TEST_CASE("pseudo_label_noise hand cases") {
    // Matched one-hot posterior and label: zero noise.
    Matrix posterior = Matrix::from_rows({{1.0, 0.0}, {0.0, 1.0}});
    CHECK(pseudo_label_noise({0, 1}, posterior, 2) == doctest::Approx(0.0));

    // Wrong one-hot against one-hot posterior: ln 2 per misassigned row.
    CHECK(pseudo_label_noise({1, 1}, posterior, 2) == doctest::Approx(0.5 * kLn2));
    CHECK(pseudo_label_noise({1, 0}, posterior, 2) == doctest::Approx(kLn2));

    // A pseudo-unknown against a known posterior also scores ln 2.
    CHECK(pseudo_label_noise({2, 1}, posterior, 2) == doctest::Approx(0.5 * kLn2));
}

TEST_CASE("pseudo_label_noise requires generator posteriors") {
    const SyntheticBundle b = generate_synthetic(audit_task(5));
    const TrainedModel m = untrained_model(b, 5);
    SyntheticBundle stripped = b;
    stripped.known_posteriors = Matrix();
    CHECK_THROWS_AS(pseudo_label_noise(m, stripped), UnsupportedInputError);
    CHECK(pseudo_label_noise(m, b) >= 0.0);
}

TEST_CASE("audits hold on untrained models") {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const SyntheticBundle b = generate_synthetic(audit_task(40 + seed));
        const TrainedModel m = untrained_model(b, seed);
        const BoundReport up = audit_upper_bound(m, b, 16, seed);
        CHECK(up.holds_upper);
        CHECK(up.lhs == up.target_error);
        const BoundReport low = audit_lower_bound(m, b, 16, seed);
        CHECK(low.holds_lower);
    }
}

TEST_CASE("closed-set identity at lambda = 1") {
    const SyntheticBundle b = generate_synthetic(audit_task(50, 1.0));
    const TrainedModel m = untrained_model(b, 50);
    const BoundReport low = audit_lower_bound(m, b, 16, 3);
    // All target rows are known: lhs equals the target-known error exactly
    // and the unknown-marginal term vanishes.
    CHECK(low.lhs == doctest::Approx(low.rhs_lower).epsilon(1e-12));
    CHECK(low.js_unknown_marginal == 0.0);
    CHECK(low.holds_lower);
}

TEST_CASE("audit determinism from a serialized state") {
    const SyntheticBundle b = generate_synthetic(audit_task(60));
    const TrainedModel m = untrained_model(b, 60);
    const BoundReport r1 = audit_upper_bound(m, b, 16, 9);
    const BoundReport r2 = audit_upper_bound(m, b, 16, 9);
    CHECK(r1.rhs_upper == r2.rhs_upper);
    CHECK(r1.js_marginal == r2.js_marginal);
    CHECK(r1.js_joint == r2.js_joint);
}
