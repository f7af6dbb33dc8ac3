#include "osheda/network.hpp"

#include <cmath>
#include <string>

#include "osheda/errors.hpp"

namespace osheda {

namespace {

constexpr double kNormGuard = 1e-12; // added to row norms in l2_normalize

void check_chain(const Network& net) {
    for (std::size_t i = 0; i + 1 < net.layers.size(); ++i) {
        if (net.layers[i].out_dim != net.layers[i + 1].in_dim)
            throw ConfigError("layer dimension chain broken at layer " + std::to_string(i));
    }
    for (const auto& l : net.layers) {
        if (l.in_dim == 0 || l.out_dim == 0)
            throw ConfigError("zero layer dimension");
        if (l.kind != LayerKind::affine && l.in_dim != l.out_dim)
            throw ConfigError("elementwise layer must preserve dimension");
    }
}

// out = x (n x in) times W^T (in x out) + bias
Matrix affine_forward(const Matrix& x, const LayerParams& p) {
    const std::size_t n = x.rows(), in = x.cols(), out = p.weight.rows();
    Matrix y(n, out);
    for (std::size_t r = 0; r < n; ++r) {
        auto xr = x.row(r);
        auto yr = y.row(r);
        for (std::size_t o = 0; o < out; ++o) yr[o] = p.bias[o];
        for (std::size_t i = 0; i < in; ++i) {
            const double xv = xr[i];
            if (xv == 0.0) continue;
            for (std::size_t o = 0; o < out; ++o) yr[o] += xv * p.weight.at(o, i);
        }
    }
    return y;
}

} // namespace

Network build_representation_mapping(std::size_t input_dim, std::size_t repr_dim) {
    if (input_dim < 1 || repr_dim < 1)
        throw ConfigError("representation mapping dimensions must be >= 1");
    const std::size_t hidden = (input_dim + repr_dim + 1) / 2; // ceil
    Network net;
    net.layers = {
        {LayerKind::affine, input_dim, hidden},
        {LayerKind::leaky_relu, hidden, hidden, 0.2},
        {LayerKind::affine, hidden, repr_dim},
        {LayerKind::leaky_relu, repr_dim, repr_dim, 0.2},
        {LayerKind::l2_normalize, repr_dim, repr_dim},
    };
    allocate_params(net);
    return net;
}

Network build_classifier(std::size_t repr_dim, std::size_t n_classes) {
    if (repr_dim < 1) throw ConfigError("classifier input dimension must be >= 1");
    if (n_classes < 2) throw ConfigError("classifier needs at least 2 classes");
    Network net;
    net.layers = {
        {LayerKind::affine, repr_dim, n_classes},
        {LayerKind::leaky_relu, n_classes, n_classes, 0.2},
    };
    allocate_params(net);
    return net;
}

void allocate_params(Network& net) {
    check_chain(net);
    net.params.clear();
    net.grads.clear();
    for (const auto& l : net.layers) {
        LayerParams p;
        if (l.kind == LayerKind::affine) {
            p.weight = Matrix(l.out_dim, l.in_dim);
            p.bias.assign(l.out_dim, 0.0);
        }
        net.params.push_back(p);
        net.grads.push_back(std::move(p));
    }
}

void initialize_params(Network& net, Rng& rng) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (net.layers[i].kind != LayerKind::affine) continue;
        auto& p = net.params[i];
        const double bound =
            std::sqrt(6.0 / static_cast<double>(net.layers[i].in_dim + net.layers[i].out_dim));
        for (double& w : p.weight.data()) w = rng.uniform(-bound, bound);
        for (double& b : p.bias) b = 0.0;
    }
}

Matrix forward(const Network& net, const Matrix& batch, ForwardTrace* trace) {
    if (net.layers.empty()) throw StateError("forward on empty network");
    if (batch.cols() != net.input_dim())
        throw ShapeError("forward: batch has " + std::to_string(batch.cols()) +
                         " columns, network expects " + std::to_string(net.input_dim()));
    if (trace) {
        trace->inputs.clear();
        trace->inputs.reserve(net.layers.size());
    }
    Matrix x = batch;
    for (std::size_t li = 0; li < net.layers.size(); ++li) {
        const auto& spec = net.layers[li];
        if (trace) trace->inputs.push_back(x);
        switch (spec.kind) {
        case LayerKind::affine:
            x = affine_forward(x, net.params[li]);
            break;
        case LayerKind::leaky_relu: {
            for (double& v : x.data())
                if (v < 0.0) v *= spec.slope;
            break;
        }
        case LayerKind::l2_normalize: {
            for (std::size_t r = 0; r < x.rows(); ++r) {
                auto row = x.row(r);
                double sq = 0.0;
                for (double v : row) sq += v * v;
                const double inv = 1.0 / (std::sqrt(sq) + kNormGuard);
                for (double& v : row) v *= inv;
            }
            break;
        }
        }
    }
    return x;
}

Matrix backward(Network& net, const ForwardTrace& trace, const Matrix& upstream) {
    if (trace.inputs.size() != net.layers.size())
        throw StateError("backward: trace does not match network (missing forward?)");
    if (upstream.rows() != trace.inputs.front().rows() ||
        upstream.cols() != net.output_dim())
        throw ShapeError("backward: upstream gradient shape mismatch");

    Matrix grad = upstream;
    for (std::size_t k = net.layers.size(); k-- > 0;) {
        const auto& spec = net.layers[k];
        const Matrix& input = trace.inputs[k];
        if (input.cols() != spec.in_dim || input.rows() != grad.rows())
            throw StateError("backward: trace shapes inconsistent at layer " + std::to_string(k));
        switch (spec.kind) {
        case LayerKind::affine: {
            const auto& p = net.params[k];
            auto& g = net.grads[k];
            const std::size_t n = input.rows(), in = spec.in_dim, out = spec.out_dim;
            // dW += grad^T * input ; db += column sums of grad
            for (std::size_t r = 0; r < n; ++r) {
                auto gr = grad.row(r);
                auto xr = input.row(r);
                for (std::size_t o = 0; o < out; ++o) {
                    const double gv = gr[o];
                    if (gv == 0.0) continue;
                    g.bias[o] += gv;
                    auto wrow = g.weight.row(o);
                    for (std::size_t i = 0; i < in; ++i) wrow[i] += gv * xr[i];
                }
            }
            // dX = grad * W
            Matrix dx(n, in);
            for (std::size_t r = 0; r < n; ++r) {
                auto gr = grad.row(r);
                auto dr = dx.row(r);
                for (std::size_t o = 0; o < out; ++o) {
                    const double gv = gr[o];
                    if (gv == 0.0) continue;
                    auto wrow = p.weight.row(o);
                    for (std::size_t i = 0; i < in; ++i) dr[i] += gv * wrow[i];
                }
            }
            grad = std::move(dx);
            break;
        }
        case LayerKind::leaky_relu: {
            for (std::size_t idx = 0; idx < grad.data().size(); ++idx) {
                if (input.data()[idx] < 0.0) grad.data()[idx] *= spec.slope;
            }
            break;
        }
        case LayerKind::l2_normalize: {
            // y = z / s with s = ||z|| + guard;
            // dL/dz = g/s - z (g.z) / (||z|| s^2), the exact Jacobian of the
            // guarded forward. The second term vanishes as ||z|| -> 0.
            const std::size_t n = input.rows(), d = spec.in_dim;
            Matrix dx(n, d);
            for (std::size_t r = 0; r < n; ++r) {
                auto z = input.row(r);
                auto g = grad.row(r);
                auto out = dx.row(r);
                double sq = 0.0, dot = 0.0;
                for (std::size_t c = 0; c < d; ++c) {
                    sq += z[c] * z[c];
                    dot += g[c] * z[c];
                }
                const double norm = std::sqrt(sq);
                const double s = norm + kNormGuard;
                const double coeff = (norm > 0.0) ? dot / (norm * s * s) : 0.0;
                for (std::size_t c = 0; c < d; ++c) out[c] = g[c] / s - coeff * z[c];
            }
            grad = std::move(dx);
            break;
        }
        }
    }
    return grad;
}

void sgd_step(Network& net, double learning_rate) {
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        auto& g = net.grads[i];
        if (!g.weight.all_finite())
            throw NumericError("non-finite weight gradient in layer " + std::to_string(i),
                               static_cast<long>(i));
        for (double b : g.bias)
            if (!std::isfinite(b))
                throw NumericError("non-finite bias gradient in layer " + std::to_string(i),
                                   static_cast<long>(i));
    }
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        auto& p = net.params[i];
        auto& g = net.grads[i];
        for (std::size_t k = 0; k < p.weight.data().size(); ++k)
            p.weight.data()[k] -= learning_rate * g.weight.data()[k];
        for (std::size_t k = 0; k < p.bias.size(); ++k)
            p.bias[k] -= learning_rate * g.bias[k];
    }
    zero_grads(net);
}

void zero_grads(Network& net) {
    for (auto& g : net.grads) {
        std::fill(g.weight.data().begin(), g.weight.data().end(), 0.0);
        std::fill(g.bias.begin(), g.bias.end(), 0.0);
    }
}

namespace {
template <typename Layers, typename Fn>
void for_each_scalar(Layers& layerparams, Fn&& fn) {
    for (auto& p : layerparams) {
        for (auto& w : p.weight.data()) fn(w);
        for (auto& b : p.bias) fn(b);
    }
}
} // namespace

std::vector<double> flatten_params(const Network& net) {
    std::vector<double> flat;
    for_each_scalar(net.params, [&](const double& v) { flat.push_back(v); });
    return flat;
}

void unflatten_params(Network& net, std::span<const double> flat) {
    std::size_t pos = 0;
    for_each_scalar(net.params, [&](double& v) {
        if (pos >= flat.size()) throw ShapeError("unflatten_params: too few values");
        v = flat[pos++];
    });
    if (pos != flat.size()) throw ShapeError("unflatten_params: too many values");
}

std::vector<double> flatten_grads(const Network& net) {
    std::vector<double> flat;
    for_each_scalar(net.grads, [&](const double& v) { flat.push_back(v); });
    return flat;
}

} // namespace osheda
