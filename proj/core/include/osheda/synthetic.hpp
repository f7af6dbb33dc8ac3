#ifndef OSHEDA_SYNTHETIC_HPP
#define OSHEDA_SYNTHETIC_HPP

#include <cstdint>
#include <vector>

#include "osheda/dataset.hpp"
#include "osheda/matrix.hpp"

namespace osheda {

/// Configuration of the synthetic heterogeneous open-set benchmark.
/// Classes are Gaussians in a shared latent space; the source observes a
/// linear projection, the target a tanh-warped projection of the same
/// latents, which makes the two feature spaces heterogeneous and
/// non-linearly related.
struct SyntheticConfig {
    std::size_t latent_dim = 8;
    std::size_t d_source = 20;
    std::size_t d_target = 30;
    std::size_t n_known = 4;
    std::size_t n_novel = 2;
    double lambda_true = 2.0 / 3.0; // target known-class prior
    std::size_t n_source = 2000;
    std::size_t n_target_labeled_per_class = 5;
    std::size_t n_target_unlabeled = 2000;
    double noise_std = 0.25;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Everything the generator produced. Ground truth of the unlabeled pool is
/// carried separately (evaluation only) with novel classes keeping their
/// raw indices >= n_known. known_posteriors holds, per unlabeled target
/// row, the latent-space Bayes posterior over known classes renormalized to
/// sum to one; it exists only for synthetic data and feeds the
/// pseudo-label-noise audit.
struct SyntheticBundle {
    FeatureDataset source;
    FeatureDataset target_labeled;
    FeatureDataset target_unlabeled;
    std::vector<int> target_unlabeled_truth;
    LabelSpace label_space;
    double lambda_true = 1.0;
    Matrix known_posteriors; // n_target_unlabeled x n_known
};

/// Deterministic in cfg (bit-identical for equal configs).
SyntheticBundle generate_synthetic(const SyntheticConfig& cfg);

} // namespace osheda

#endif
