#ifndef OSHEDA_BOUNDS_HPP
#define OSHEDA_BOUNDS_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "osheda/synthetic.hpp"
#include "osheda/trainer.hpp"

namespace osheda {

enum class AuditLoss { zero_one, clipped_ce };

/// Numerical audit of one generalization inequality on one model + bundle.
/// The upper audit checks
///   target error <= lambda*source error + open-set difference
///                   + sqrt(2)*lambda*C*(sqrt(js_marginal)+sqrt(js_joint)),
/// the lower audit checks
///   target error >= lambda*Er(target known) + (1-lambda)*Er(source->unk)
///                   - sqrt(2)*(1-lambda)*C*sqrt(js_unknown_marginal).
/// All target-side statistics are computed on the unlabeled target pool
/// with its generator ground truth.
struct BoundReport {
    double target_error = 0.0;          // lhs
    double source_error = 0.0;
    double open_set_difference = 0.0;
    double target_known_error = 0.0;
    double source_unknown_error = 0.0;  // source relabeled to unk
    double js_marginal = 0.0;
    double js_joint = 0.0;
    double js_joint_pseudo = 0.0;       // joint term with g(Z) labels
    double js_unknown_marginal = 0.0;
    double lambda = 1.0;
    double loss_bound_c = 1.0;
    double lhs = 0.0;
    double rhs_upper = 0.0;
    double rhs_lower = 0.0;
    bool holds_upper = false;
    bool holds_lower = false;
};

/// Mean loss of the model on (features, truth). zero_one compares the
/// model's prediction rule against the collapsed truth; clipped_ce is
/// cross-entropy truncated at c so the bounded-loss assumption holds.
/// Source-domain samples are mapped through f_source.
double empirical_error(const TrainedModel& model, const Matrix& features,
                       const std::vector<int>& truth, AuditLoss loss, double c = 1.0,
                       Domain domain = Domain::target);

/// Every truth entry replaced by the unknown index; features untouched.
std::vector<int> relabel_to_unknown(const std::vector<int>& truth, const LabelSpace& space);

/// Er(target relabeled to unk) - lambda * Er(source relabeled to unk);
/// unclamped, may be negative.
double open_set_difference(const TrainedModel& model, const Matrix& target_features,
                           const Matrix& source_features, double lambda, AuditLoss loss,
                           double c = 1.0);

/// Discrete Jensen-Shannon divergence between two probability vectors
/// (natural log, 0*log0 = 0). Range [0, ln 2].
double discrete_js(std::span<const double> p, std::span<const double> q);

/// Plug-in JS estimate: shared k-means codebook fit on the (order-
/// normalized) union, smoothed cell histograms, then discrete JS.
double estimate_js(const Matrix& samples_a, const Matrix& samples_b,
                   std::size_t codebook_size, std::uint64_t seed);

/// Product-space (cell x label) variant.
double estimate_js_joint(const Matrix& samples_a, const std::vector<int>& labels_a,
                         const Matrix& samples_b, const std::vector<int>& labels_b,
                         std::size_t codebook_size, std::uint64_t seed);

/// Mean JS between the one-hot pseudo-label distribution and the true
/// known-class posterior (rows of known_posteriors, renormalized by the
/// generator). Both are treated as distributions over the n_known+1 model
/// classes, the posterior putting zero mass on unknown.
double pseudo_label_noise(const std::vector<int>& pseudo_labels,
                          const Matrix& known_posteriors, int unknown_index);

/// Applies the pseudo-label rule to the bundle's unlabeled pool and
/// measures the noise on its known-class rows. Throws
/// UnsupportedInputError when the bundle carries no generator posteriors.
double pseudo_label_noise(const TrainedModel& model, const SyntheticBundle& bundle);

BoundReport audit_upper_bound(const TrainedModel& model, const SyntheticBundle& bundle,
                              std::size_t codebook_size, std::uint64_t seed,
                              double tolerance = 0.05, AuditLoss loss = AuditLoss::zero_one,
                              double c = 1.0);

BoundReport audit_lower_bound(const TrainedModel& model, const SyntheticBundle& bundle,
                              std::size_t codebook_size, std::uint64_t seed,
                              double tolerance = 0.05, AuditLoss loss = AuditLoss::zero_one,
                              double c = 1.0);

std::string bound_report_to_json(const BoundReport& report);

} // namespace osheda

#endif
