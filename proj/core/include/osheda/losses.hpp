#ifndef OSHEDA_LOSSES_HPP
#define OSHEDA_LOSSES_HPP

#include <vector>

#include "osheda/matrix.hpp"

namespace osheda {

/// Which objective components are active (ablation toggles).
struct LossToggles {
    bool align = true;     // representation alignment term
    bool segregate = true; // known/unknown segregation term
    bool osd = true;       // non-negative open-set risk term
};

/// Per-step (or per-epoch mean) objective components.
/// total = classification + alignment - segregation + open_set.
struct LossBreakdown {
    double classification = 0.0;
    double alignment = 0.0;
    double segregation = 0.0;
    double open_set = 0.0;
    double total = 0.0;
};

/// Mean of -log softmax(logits_row)[label] over rows, max-stabilized.
/// If grad is non-null it receives d loss / d logits (same shape).
double cross_entropy(const Matrix& logits, const std::vector<int>& labels,
                     Matrix* grad = nullptr);

/// lambda * CE(source) + CE(labeled target); both batches must be non-empty.
double classification_loss(const Matrix& source_logits, const std::vector<int>& source_labels,
                           const Matrix& target_logits, const std::vector<int>& target_labels,
                           double lambda, Matrix* grad_source = nullptr,
                           Matrix* grad_target = nullptr);

/// Squared distance between domain centroids plus per-class squared
/// centroid distances over known classes. A class term is skipped when
/// either domain contributes no instances of that class; the marginal term
/// is skipped when either side is empty. Labels >= n_known on the target
/// side are ignored (they are pseudo-unknowns).
double alignment_loss(const Matrix& source_reprs, const std::vector<int>& source_labels,
                      const Matrix& target_reprs, const std::vector<int>& target_labels,
                      std::size_t n_known, Matrix* grad_source = nullptr,
                      Matrix* grad_target = nullptr);

/// Squared distance between the known-rows centroid and the unknown-rows
/// centroid; 0 when either side is empty.
double segregation_loss(const Matrix& known_reprs, const Matrix& unknown_reprs,
                        Matrix* grad_known = nullptr, Matrix* grad_unknown = nullptr);

/// max(0, mean CE(target -> unk) - lambda * mean CE(source -> unk)).
/// Gradients are zero when the clamp is active.
double open_set_risk(const Matrix& target_logits, const Matrix& source_logits,
                     double lambda, int unknown_index, Matrix* grad_target = nullptr,
                     Matrix* grad_source = nullptr);

/// Assembles a breakdown from component values, zeroing disabled terms.
LossBreakdown combine_losses(double classification, double alignment, double segregation,
                             double open_set, const LossToggles& toggles);

} // namespace osheda

#endif
