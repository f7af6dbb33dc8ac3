#ifndef OSHEDA_PSEUDO_HPP
#define OSHEDA_PSEUDO_HPP

#include <vector>

#include "osheda/matrix.hpp"

namespace osheda {

/// Pseudo-labels for one minibatch plus the per-row maximum known-class
/// logit used to rank rows for unknown assignment.
struct PseudoLabels {
    std::vector<int> labels;
    std::vector<double> max_known_logit;
};

/// Two-step rule over a minibatch: per-row argmax restricted to known-class
/// columns, then the floor((1-lambda)*n) rows with the smallest maximum
/// known logit are reassigned to unknown_index (ties by row index).
/// `logits` must have unknown_index + 1 columns.
PseudoLabels assign_pseudo_labels(const Matrix& logits, double lambda, int unknown_index);

/// Same rule for classifiers that only emit known-class logits (the SL/PL
/// baselines): `known_logits` has unknown_index columns.
PseudoLabels assign_pseudo_labels_known_only(const Matrix& known_logits, double lambda,
                                             int unknown_index);

/// Per-row argmax over all columns, ties broken by lowest index. The
/// post-training prediction rule.
std::vector<int> predict_labels(const Matrix& logits);

} // namespace osheda

#endif
