#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>

#include "osheda/dataset.hpp"
#include "osheda/errors.hpp"
#include "osheda/lambda_estimate.hpp"
#include "osheda/rng.hpp"
#include "osheda/synthetic.hpp"

using namespace osheda;

namespace {

struct TempFile {
    std::string path;
    explicit TempFile(const std::string& contents) {
        static int counter = 0;
        path = "osheda_test_" + std::to_string(counter++) + ".csv";
        std::ofstream out(path, std::ios::binary);
        out << contents;
    }
    ~TempFile() { std::remove(path.c_str()); }
};

} // namespace

TEST_CASE("load_csv basics") {
    TempFile f("1.0,2.0,0\n3.0,4.0,1\n5.0,6.0,0\n");
    const FeatureDataset ds = load_csv(f.path, true);
    CHECK(ds.size() == 3);
    CHECK(ds.dim() == 2);
    REQUIRE(ds.labels.has_value());
    CHECK(*ds.labels == std::vector<int>{0, 1, 0});
    CHECK(ds.features.at(2, 1) == doctest::Approx(6.0));
}

TEST_CASE("load_csv skips '#' header lines") {
    TempFile f("# x,y,label\n1,2,0\n3,4,1\n");
    const FeatureDataset ds = load_csv(f.path, true);
    CHECK(ds.size() == 2);
}

TEST_CASE("load_csv degenerate and malformed inputs") {
    TempFile empty("");
    CHECK_THROWS_AS(load_csv(empty.path, true), ParseError);

    TempFile all_unlabeled("1,2,-1\n3,4,-1\n");
    const FeatureDataset ds = load_csv(all_unlabeled.path, true);
    CHECK_FALSE(ds.labels.has_value());
    CHECK(ds.size() == 2);

    TempFile mixed("1,2,0\n3,4,-1\n");
    CHECK_THROWS_AS(load_csv(mixed.path, true), ParseError);

    TempFile ragged("1,2,0\n3,0\n");
    CHECK_THROWS_AS(load_csv(ragged.path, true), ParseError);

    TempFile garbage("1,two,0\n");
    CHECK_THROWS_AS(load_csv(garbage.path, true), ParseError);

    // Error reports the offending line.
    TempFile bad_line3("1,2,0\n3,4,1\n5,x,0\n");
    try {
        load_csv(bad_line3.path, true);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
}

TEST_CASE("csv round trip preserves every byte of the numbers") {
    Rng rng(17);
    FeatureDataset ds;
    ds.features = Matrix(8, 3);
    for (double& v : ds.features.data()) v = rng.normal() * std::exp(4.0 * rng.uniform());
    ds.labels = std::vector<int>{0, 1, 2, 0, 1, 2, 0, 1};
    TempFile f("");
    save_csv(ds, f.path);
    const FeatureDataset back = load_csv(f.path, true);
    CHECK(back.features == ds.features);
    CHECK(*back.labels == *ds.labels);
}

TEST_CASE("generate_synthetic contracts") {
    SyntheticConfig cfg;
    cfg.latent_dim = 4;
    cfg.d_source = 6;
    cfg.d_target = 7;
    cfg.n_known = 3;
    cfg.n_novel = 2;
    cfg.lambda_true = 0.6;
    cfg.n_source = 200;
    cfg.n_target_labeled_per_class = 4;
    cfg.n_target_unlabeled = 300;
    cfg.noise_std = 0.3;
    cfg.seed = 9;

    const SyntheticBundle b = generate_synthetic(cfg);
    CHECK(b.source.size() == 200);
    CHECK(b.source.dim() == 6);
    CHECK(b.target_labeled.size() == 12);
    CHECK(b.target_unlabeled.size() == 300);
    CHECK(b.label_space.n_known == 3);
    CHECK(b.label_space.unknown_index() == 3);

    // Source never contains a label >= n_known.
    for (int y : *b.source.labels) CHECK(y < 3);

    // Labeled target: exact per-class counts.
    std::vector<int> counts(3, 0);
    for (int y : *b.target_labeled.labels) counts[static_cast<std::size_t>(y)]++;
    for (int c : counts) CHECK(c == 4);

    // Determinism: same config, bit-identical outputs.
    const SyntheticBundle b2 = generate_synthetic(cfg);
    CHECK(b2.source.features == b.source.features);
    CHECK(b2.target_unlabeled.features == b.target_unlabeled.features);
    CHECK(b2.target_unlabeled_truth == b.target_unlabeled_truth);
    CHECK(b2.known_posteriors == b.known_posteriors);

    // Different seed, different data.
    cfg.seed = 10;
    CHECK(generate_synthetic(cfg).source.features != b.source.features);

    // Posterior rows are distributions.
    for (std::size_t r = 0; r < b.known_posteriors.rows(); ++r) {
        double s = 0.0;
        for (double v : b.known_posteriors.row(r)) {
            CHECK(v >= 0.0);
            s += v;
        }
        CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("generate_synthetic closed-set limit has no novel truth") {
    SyntheticConfig cfg;
    cfg.n_known = 2;
    cfg.n_novel = 1;
    cfg.lambda_true = 1.0;
    cfg.n_source = 50;
    cfg.n_target_unlabeled = 80;
    cfg.d_source = 5;
    cfg.d_target = 5;
    cfg.latent_dim = 3;
    cfg.seed = 4;
    const SyntheticBundle b = generate_synthetic(cfg);
    for (int y : b.target_unlabeled_truth) CHECK(y < 2);
}

TEST_CASE("generate_synthetic reference config hits the requested known fraction") {
    SyntheticConfig cfg; // defaults are the reference task
    cfg.lambda_true = 2.0 / 3.0;
    cfg.seed = 123;
    const SyntheticBundle b = generate_synthetic(cfg);
    std::size_t known = 0;
    for (int y : b.target_unlabeled_truth)
        if (y < static_cast<int>(cfg.n_known)) ++known;
    const double frac = static_cast<double>(known) / static_cast<double>(cfg.n_target_unlabeled);
    CHECK(std::abs(frac - 2.0 / 3.0) <= 0.001);
}

TEST_CASE("estimate_lambda clamps") {
    Rng rng(21);
    // 20 distinct sites, 4 coincident points each: with k = 3 every
    // k-NN distance inside the labeled set is exactly zero.
    FeatureDataset labeled;
    labeled.features = Matrix(80, 2);
    for (std::size_t site = 0; site < 20; ++site) {
        const double x = rng.normal(), y = rng.normal();
        for (std::size_t copy = 0; copy < 4; ++copy) {
            labeled.features.at(site * 4 + copy, 0) = x;
            labeled.features.at(site * 4 + copy, 1) = y;
        }
    }
    labeled.labels = std::vector<int>(80, 0);

    // Unlabeled identical to labeled: everything within the known radius.
    FeatureDataset same;
    same.features = labeled.features;
    CHECK(estimate_lambda(labeled, same, 3) == doctest::Approx(1.0));

    // Unlabeled far away: nothing within the radius, lower clamp.
    FeatureDataset far;
    far.features = Matrix(40, 2);
    for (std::size_t r = 0; r < 40; ++r) {
        far.features.at(r, 0) = 100.0 + rng.normal();
        far.features.at(r, 1) = 100.0 + rng.normal();
    }
    CHECK(estimate_lambda(labeled, far, 3) == doctest::Approx(0.05));

    CHECK_THROWS_AS(estimate_lambda(labeled, far, 80), ConfigError);
}

TEST_CASE("estimate_lambda tracks the generator prior") {
    // Scaled-down version of the acceptance sweep: lambda 0.5, 3 seeds.
    double err_sum = 0.0;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        SyntheticConfig cfg;
        cfg.lambda_true = 0.5;
        cfg.n_target_labeled_per_class = 25;
        cfg.n_target_unlabeled = 600;
        cfg.n_source = 100;
        cfg.seed = seed;
        const SyntheticBundle b = generate_synthetic(cfg);
        err_sum += std::abs(estimate_lambda(b.target_labeled, b.target_unlabeled, 3) - 0.5);
    }
    CHECK(err_sum / 3.0 <= 0.1);
}
