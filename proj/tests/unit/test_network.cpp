#include <doctest.h>

#include <cmath>

#include "gradcheck.hpp"
#include "osheda/errors.hpp"
#include "osheda/network.hpp"

using namespace osheda;
using osheda::testing::check_input_grads;
using osheda::testing::check_param_grads;

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data()) v = scale * rng.normal();
    return m;
}

Network single_layer(LayerKind kind, std::size_t in, std::size_t out) {
    Network net;
    net.layers = {{kind, in, out, 0.2}};
    allocate_params(net);
    return net;
}

} // namespace

TEST_CASE("representation mapping architecture") {
    const Network big = build_representation_mapping(2048, 256);
    REQUIRE(big.layers.size() == 5);
    CHECK(big.layers[0].out_dim == 1152);
    CHECK(big.layers[2].out_dim == 256);
    CHECK(big.layers[4].kind == LayerKind::l2_normalize);

    const Network sym = build_representation_mapping(256, 256);
    CHECK(sym.layers[0].out_dim == 256);

    const Network small = build_representation_mapping(20, 8);
    CHECK(small.layers.size() == 5);
    CHECK(small.layers[0].out_dim == 14);

    CHECK_THROWS_AS(build_representation_mapping(0, 8), ConfigError);
}

TEST_CASE("classifier architecture") {
    const Network h = build_classifier(256, 7);
    REQUIRE(h.layers.size() == 2);
    CHECK(h.layers[0].out_dim == 7);
    CHECK(h.layers[1].kind == LayerKind::leaky_relu);
    CHECK(h.layers[1].slope == doctest::Approx(0.2));

    CHECK_NOTHROW(build_classifier(256, 2));
    CHECK_THROWS_AS(build_classifier(256, 1), ConfigError);

    // All-zero input: bias goes through the leaky relu.
    Network h2 = build_classifier(3, 2);
    h2.params[0].bias = {1.0, -1.0};
    const Matrix out = forward(h2, Matrix(1, 3));
    CHECK(out.at(0, 0) == doctest::Approx(1.0));
    CHECK(out.at(0, 1) == doctest::Approx(-0.2));
}

TEST_CASE("forward examples") {
    // Identity affine with zero bias reproduces the input.
    Network id = single_layer(LayerKind::affine, 2, 2);
    id.params[0].weight.at(0, 0) = 1.0;
    id.params[0].weight.at(1, 1) = 1.0;
    const Matrix x = Matrix::from_rows({{3.0, -1.5}, {0.25, 2.0}});
    CHECK(forward(id, x) == x);

    Network norm = single_layer(LayerKind::l2_normalize, 2, 2);
    const Matrix y = forward(norm, Matrix::from_rows({{3.0, 4.0}}));
    CHECK(y.at(0, 0) == doctest::Approx(0.6).epsilon(1e-9));
    CHECK(y.at(0, 1) == doctest::Approx(0.8).epsilon(1e-9));

    Network lrelu = single_layer(LayerKind::leaky_relu, 2, 2);
    const Matrix z = forward(lrelu, Matrix::from_rows({{-1.0, 2.0}}));
    CHECK(z.at(0, 0) == doctest::Approx(-0.2));
    CHECK(z.at(0, 1) == doctest::Approx(2.0));

    CHECK_THROWS_AS(forward(lrelu, Matrix(1, 3)), ShapeError);
}

TEST_CASE("l2_normalize rows have unit norm for non-degenerate inputs") {
    Network norm = single_layer(LayerKind::l2_normalize, 4, 4);
    Rng rng(7);
    for (int rep = 0; rep < 200; ++rep) {
        Matrix x = random_matrix(rng, 3, 4);
        // Rescale some rows down to the smallest norm the additive guard
        // still maps within the 1e-6 tolerance.
        if (rep % 3 == 0) {
            for (std::size_t r = 0; r < x.rows(); ++r) {
                auto row = x.row(r);
                double sq = 0.0;
                for (double v : row) sq += v * v;
                const double target = (r == 0) ? 2e-6 : 1e-3;
                const double scale = target / std::sqrt(sq);
                for (double& v : row) v *= scale;
            }
        }
        const Matrix y = forward(norm, x);
        for (std::size_t r = 0; r < y.rows(); ++r) {
            double sq = 0.0;
            for (double v : y.row(r)) sq += v * v;
            CHECK(std::abs(std::sqrt(sq) - 1.0) <= 1e-6);
        }
    }
    // Zero row is guarded, not NaN.
    const Matrix y0 = forward(norm, Matrix(1, 4));
    CHECK(y0.all_finite());
}

TEST_CASE("forward is deterministic") {
    Rng rng(11);
    Network net = build_representation_mapping(5, 3);
    initialize_params(net, rng);
    const Matrix x = random_matrix(rng, 4, 5);
    CHECK(forward(net, x) == forward(net, x));
}

TEST_CASE("backward hand case: sum-of-outputs loss through identity affine") {
    // loss = sum(Y) with Y = X W^T + b, W = I: dW = sum_r x_r outer 1,
    // i.e. each weight-row gradient equals the column sums of X.
    Network id = single_layer(LayerKind::affine, 2, 2);
    id.params[0].weight.at(0, 0) = 1.0;
    id.params[0].weight.at(1, 1) = 1.0;
    const Matrix x = Matrix::from_rows({{1.0, 2.0}, {3.0, 4.0}});
    ForwardTrace trace;
    forward(id, x, &trace);
    const Matrix upstream(2, 2, 1.0);
    const Matrix dx = backward(id, trace, upstream);
    CHECK(id.grads[0].weight.at(0, 0) == doctest::Approx(4.0)); // col 0 sum
    CHECK(id.grads[0].weight.at(0, 1) == doctest::Approx(6.0)); // col 1 sum
    CHECK(id.grads[0].weight.at(1, 0) == doctest::Approx(4.0));
    CHECK(id.grads[0].weight.at(1, 1) == doctest::Approx(6.0));
    CHECK(id.grads[0].bias[0] == doctest::Approx(2.0));
    // dX = upstream * W = all ones through the identity.
    CHECK(dx.at(0, 0) == doctest::Approx(1.0));
    CHECK(dx.at(1, 1) == doctest::Approx(1.0));
}

TEST_CASE("backward: zero upstream means zero parameter grads") {
    Rng rng(3);
    Network net = build_representation_mapping(4, 3);
    initialize_params(net, rng);
    ForwardTrace trace;
    forward(net, random_matrix(rng, 2, 4), &trace);
    backward(net, trace, Matrix(2, 3));
    for (const auto& g : flatten_grads(net)) CHECK(g == 0.0);
}

TEST_CASE("backward without forward is a state error") {
    Network net = build_representation_mapping(4, 3);
    ForwardTrace empty;
    CHECK_THROWS_AS(backward(net, empty, Matrix(2, 3)), StateError);
}

TEST_CASE("sgd_step examples") {
    Network net = single_layer(LayerKind::affine, 1, 1);
    net.params[0].weight.at(0, 0) = 1.0;
    net.grads[0].weight.at(0, 0) = 2.0;
    sgd_step(net, 0.1);
    CHECK(net.params[0].weight.at(0, 0) == doctest::Approx(0.8));
    CHECK(net.grads[0].weight.at(0, 0) == 0.0);

    // gamma = 0 leaves parameters unchanged.
    net.grads[0].weight.at(0, 0) = 5.0;
    sgd_step(net, 0.0);
    CHECK(net.params[0].weight.at(0, 0) == doctest::Approx(0.8));

    // Two steps with zero grads are a no-op.
    sgd_step(net, 0.5);
    sgd_step(net, 0.5);
    CHECK(net.params[0].weight.at(0, 0) == doctest::Approx(0.8));

    net.grads[0].weight.at(0, 0) = std::nan("");
    CHECK_THROWS_AS(sgd_step(net, 0.1), NumericError);
}

TEST_CASE("sgd_step linearity: step(gamma, g) == step(1, gamma*g)") {
    Rng rng(5);
    Network a = build_representation_mapping(3, 2);
    initialize_params(a, rng);
    Network b = a;
    const double gamma = 0.37;
    std::vector<double> g(flatten_params(a).size());
    for (double& v : g) v = rng.normal();

    auto set_grads = [](Network& net, const std::vector<double>& flat) {
        std::size_t pos = 0;
        for (auto& lp : net.grads) {
            for (double& w : lp.weight.data()) w = flat[pos++];
            for (double& bx : lp.bias) bx = flat[pos++];
        }
    };
    set_grads(a, g);
    sgd_step(a, gamma);
    std::vector<double> scaled(g);
    for (double& v : scaled) v *= gamma;
    set_grads(b, scaled);
    sgd_step(b, 1.0);
    const auto pa = flatten_params(a), pb = flatten_params(b);
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pa[i] == doctest::Approx(pb[i]).epsilon(1e-15));
}

TEST_CASE("finite differences agree per layer kind") {
    Rng rng(23);
    for (const LayerKind kind :
         {LayerKind::affine, LayerKind::leaky_relu, LayerKind::l2_normalize}) {
        const std::size_t in = 4;
        const std::size_t out = kind == LayerKind::affine ? 3 : in;
        Network net = single_layer(kind, in, out);
        initialize_params(net, rng);

        Matrix x = random_matrix(rng, 3, in);
        Matrix weights = random_matrix(rng, 3, out); // random linear functional

        auto loss_value = [&]() {
            const Matrix y = forward(net, x);
            double s = 0.0;
            for (std::size_t i = 0; i < y.data().size(); ++i)
                s += y.data()[i] * weights.data()[i];
            return s;
        };

        zero_grads(net);
        ForwardTrace trace;
        forward(net, x, &trace);
        const Matrix dx = backward(net, trace, weights);

        const auto param_res =
            check_param_grads({&net}, {flatten_grads(net)}, loss_value);
        CHECK(param_res.max_rel_err <= 1e-4);
        const auto input_res = check_input_grads(x, dx, loss_value);
        CHECK(input_res.max_rel_err <= 1e-4);
    }
}
