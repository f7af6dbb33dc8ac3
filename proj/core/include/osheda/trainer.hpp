#ifndef OSHEDA_TRAINER_HPP
#define OSHEDA_TRAINER_HPP

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "osheda/dataset.hpp"
#include "osheda/losses.hpp"
#include "osheda/network.hpp"
#include "osheda/pseudo.hpp"

namespace osheda {

enum class Method { rl_osheda, sl, pl };

const char* method_name(Method m);
Method method_from_name(const std::string& name);

struct TrainConfig {
    double lambda = 0.5;              // known-class prior fed to losses and inference
    std::size_t stage_threshold = 0;  // 0 -> epochs/2 (documented default)
    std::size_t epochs = 40;
    std::size_t batch_source = 64;
    std::size_t batch_target_labeled = 32;
    std::size_t batch_target_unlabeled = 64;
    double learning_rate = 0.05;
    std::size_t repr_dim = 256;
    LossToggles toggles;
    bool two_stage = true; // off: full objective from the first epoch
    Method method = Method::rl_osheda;
    std::uint64_t seed = 0;

    std::size_t stage_threshold_or_default() const {
        if (stage_threshold > 0) return stage_threshold;
        return epochs / 2 > 0 ? epochs / 2 : 1;
    }
    void validate() const;
};

struct TrainedModel {
    Method method = Method::rl_osheda;
    std::optional<Network> f_source; // absent for sl/pl
    Network f_target;
    Network classifier;
    LabelSpace label_space;
    TrainConfig config;
    std::vector<LossBreakdown> loss_history; // per-epoch means
};

/// Deterministic reshuffled cycling over 0..n-1: deals `count` indices per
/// call, reshuffling whenever the deck runs out. Exposed so tests can
/// replay the exact batch schedule of a training run.
class ShuffledCycler {
public:
    ShuffledCycler(std::size_t n, std::uint64_t seed);
    std::vector<std::size_t> next(std::size_t count);

private:
    void refill();
    std::size_t n_;
    Rng rng_;
    std::vector<std::size_t> order_;
    std::size_t pos_ = 0;
};

/// One RL-OSHeDA minibatch objective evaluation through the full
/// f_s/f_t/classifier stack. In stage 2 pseudo-labels for the unlabeled
/// block come from the current classifier state unless `pseudo_override`
/// pins them (finite-difference tests need the selection frozen). When
/// `with_gradients` is set, parameter gradients of the toggled total are
/// accumulated into the three networks.
struct StepBatches {
    Matrix source_x;
    std::vector<int> source_y;
    Matrix target_labeled_x;
    std::vector<int> target_labeled_y;
    Matrix target_unlabeled_x; // zero rows allowed in stage 1
};

LossBreakdown rl_objective_step(Network& f_source, Network& f_target, Network& classifier,
                                const StepBatches& batches, double lambda,
                                const LossToggles& toggles, bool stage2,
                                const LabelSpace& space, bool with_gradients,
                                const std::vector<int>* pseudo_override = nullptr,
                                std::vector<int>* pseudo_out = nullptr);

/// Called after every epoch with the current parameter state.
using EpochObserver = std::function<void(std::size_t epoch, const TrainedModel& state)>;

/// Two-stage training: epochs below the stage threshold minimize the
/// classification term only; later epochs pseudo-label each unlabeled
/// minibatch and step on the full toggled objective.
TrainedModel train_rl_osheda(const FeatureDataset& source, const FeatureDataset& target_labeled,
                             const FeatureDataset& target_unlabeled, const TrainConfig& cfg,
                             const EpochObserver& observer = {});

/// Supervised baseline on labeled target data; the classifier has n_known
/// outputs and unknown detection happens only through the inference rule.
TrainedModel train_sl(const FeatureDataset& target_labeled, const TrainConfig& cfg);

/// Pseudo-labeling baseline: SL warmup, then labeled CE plus CE on the
/// pseudo-known subset of each unlabeled minibatch.
TrainedModel train_pl(const FeatureDataset& target_labeled,
                      const FeatureDataset& target_unlabeled, const TrainConfig& cfg);

/// Model-appropriate inference: full argmax for rl_osheda, the known-argmax
/// plus lowest-confidence-unknown rule (with config.lambda) for sl/pl.
/// Source-domain batches route through f_source instead of f_target.
std::vector<int> model_predict(const TrainedModel& model, const Matrix& features,
                               Domain domain = Domain::target);

/// Logits for a feature batch (classifier over the domain's mapping).
Matrix model_logits(const TrainedModel& model, const Matrix& features,
                    Domain domain = Domain::target);

} // namespace osheda

#endif
