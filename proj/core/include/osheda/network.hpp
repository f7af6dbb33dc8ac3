#ifndef OSHEDA_NETWORK_HPP
#define OSHEDA_NETWORK_HPP

#include <cstdint>
#include <vector>

#include "osheda/matrix.hpp"
#include "osheda/rng.hpp"

namespace osheda {

enum class LayerKind { affine, leaky_relu, l2_normalize };

struct LayerSpec {
    LayerKind kind;
    std::size_t in_dim = 0;
    std::size_t out_dim = 0;
    double slope = 0.2; // leaky_relu only
};

/// Weight matrix (out_dim x in_dim) and bias vector; empty for
/// parameter-free layers.
struct LayerParams {
    Matrix weight;
    std::vector<double> bias;
};

/// A fixed sequential feed-forward network. Parameter gradients accumulate
/// in `grads` (shape-mirrored with `params`) across backward calls until
/// sgd_step or zero_grads resets them.
struct Network {
    std::vector<LayerSpec> layers;
    std::vector<LayerParams> params;
    std::vector<LayerParams> grads;

    std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().in_dim; }
    std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().out_dim; }
};

/// Per-batch activation cache produced by forward and consumed by backward.
/// inputs[i] is the input handed to layer i.
struct ForwardTrace {
    std::vector<Matrix> inputs;
};

/// Two affine+LeakyReLU(0.2) blocks followed by row-wise L2 normalization;
/// the hidden width is ceil((input_dim + repr_dim) / 2).
Network build_representation_mapping(std::size_t input_dim, std::size_t repr_dim);

/// Single affine layer into n_classes logits, passed through LeakyReLU(0.2).
Network build_classifier(std::size_t repr_dim, std::size_t n_classes);

/// Appends LayerParams of the right shapes (zero-valued) for every layer.
/// Called by the builders; exposed for custom layer stacks in tests.
void allocate_params(Network& net);

/// Uniform(+-sqrt(6/(fan_in+fan_out))) weights, zero biases.
void initialize_params(Network& net, Rng& rng);

/// Runs the batch through the network. If `trace` is non-null it is filled
/// with the activation cache needed by backward.
Matrix forward(const Network& net, const Matrix& batch, ForwardTrace* trace = nullptr);

/// Backpropagates `upstream` (d loss / d output) through the trace,
/// accumulating parameter gradients into net.grads; returns d loss / d input.
Matrix backward(Network& net, const ForwardTrace& trace, const Matrix& upstream);

/// p <- p - learning_rate * grad for every parameter, then zeroes grads.
/// Throws NumericError (with the layer index) if any gradient is non-finite.
void sgd_step(Network& net, double learning_rate);

void zero_grads(Network& net);

/// Flat copy-out/copy-in of all parameters, layer by layer (weights
/// row-major, then bias). Used by serialization and finite-difference tests.
std::vector<double> flatten_params(const Network& net);
void unflatten_params(Network& net, std::span<const double> flat);
std::vector<double> flatten_grads(const Network& net);

} // namespace osheda

#endif
