#include <doctest.h>

#include <cmath>

#include "osheda/errors.hpp"
#include "osheda/pseudo.hpp"
#include "osheda/rng.hpp"

using namespace osheda;

namespace {

Matrix random_logits(Rng& rng, std::size_t n, std::size_t k) {
    Matrix m(n, k);
    for (double& v : m.data()) v = 3.0 * rng.normal();
    return m;
}

} // namespace

TEST_CASE("pseudo-label examples") {
    Rng rng(1);
    const Matrix logits = random_logits(rng, 10, 4); // 3 known + unk

    // lambda = 1: nothing reassigned, labels are known-column argmaxes.
    const PseudoLabels closed = assign_pseudo_labels(logits, 1.0, 3);
    for (std::size_t r = 0; r < 10; ++r) {
        CHECK(closed.labels[r] < 3);
        std::size_t best = 0;
        for (std::size_t c = 1; c < 3; ++c)
            if (logits.at(r, c) > logits.at(r, best)) best = c;
        CHECK(closed.labels[r] == static_cast<int>(best));
    }

    // n = 10, lambda = 0.7: exactly 3 unknowns.
    const PseudoLabels open = assign_pseudo_labels(logits, 0.7, 3);
    CHECK(std::count(open.labels.begin(), open.labels.end(), 3) == 3);

    // Tie on the max logit resolves by row index: row 0 goes unknown.
    const Matrix tie = Matrix::from_rows({{5.0, 1.0, 0.0}, {1.0, 5.0, 0.0}});
    const PseudoLabels tied = assign_pseudo_labels(tie, 0.5, 2);
    CHECK(tied.labels[0] == 2);
    CHECK(tied.labels[1] == 1);

    CHECK_THROWS_AS(assign_pseudo_labels(tie, 0.0, 2), ConfigError);
    CHECK_THROWS_AS(assign_pseudo_labels(tie, 1.5, 2), ConfigError);
}

TEST_CASE("predict examples") {
    CHECK(predict_labels(Matrix::from_rows({{0.0, 0.0, 1.0}})) == std::vector<int>{2});
    CHECK(predict_labels(Matrix::from_rows({{0.5, 0.5, 0.5}})) == std::vector<int>{0});

    // A dominating unknown column wins the unrestricted argmax.
    const Matrix unk_heavy = Matrix::from_rows({{1.0, 2.0, 9.0}, {0.0, -1.0, 3.0}});
    CHECK(predict_labels(unk_heavy) == std::vector<int>{2, 2});
}

TEST_CASE("pseudo-label rule properties") {
    Rng rng(2);
    for (int rep = 0; rep < 2000; ++rep) {
        const std::size_t n = 1 + rng.uniform_index(12);
        const std::size_t known = 2 + rng.uniform_index(4);
        const int unk = static_cast<int>(known);
        const Matrix logits = random_logits(rng, n, known + 1);
        const int lam_tenths = 1 + static_cast<int>(rng.uniform_index(9));
        const double lambda = lam_tenths / 10.0;

        const PseudoLabels pl = assign_pseudo_labels(logits, lambda, unk);

        // Exact unknown count: floor((1-lambda)*n) in exact rational arithmetic.
        const std::size_t expect_unknown =
            (static_cast<std::size_t>(10 - lam_tenths) * n) / 10;
        CHECK(static_cast<std::size_t>(
                  std::count(pl.labels.begin(), pl.labels.end(), unk)) == expect_unknown);

        // Non-unknown rows carry the known-restricted argmax.
        for (std::size_t r = 0; r < n; ++r) {
            if (pl.labels[r] == unk) continue;
            std::size_t best = 0;
            for (std::size_t c = 1; c < known; ++c)
                if (logits.at(r, c) > logits.at(r, best)) best = c;
            CHECK(pl.labels[r] == static_cast<int>(best));
        }

        // A uniform shift of the whole batch leaves the output unchanged.
        Matrix shifted = logits;
        const double c = 5.0 * rng.normal();
        for (double& v : shifted.data()) v += c;
        CHECK(assign_pseudo_labels(shifted, lambda, unk).labels == pl.labels);

        // predict is shift invariant per row.
        const auto preds = predict_labels(logits);
        CHECK(predict_labels(shifted) == preds);
    }
}

TEST_CASE("lambda = 1 pseudo-labels equal known-restricted predictions") {
    Rng rng(3);
    for (int rep = 0; rep < 200; ++rep) {
        const std::size_t n = 1 + rng.uniform_index(8);
        const std::size_t known = 2 + rng.uniform_index(3);
        const Matrix logits = random_logits(rng, n, known + 1);
        Matrix restricted(n, known);
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = 0; c < known; ++c) restricted.at(r, c) = logits.at(r, c);
        CHECK(assign_pseudo_labels(logits, 1.0, static_cast<int>(known)).labels ==
              predict_labels(restricted));
    }
}
