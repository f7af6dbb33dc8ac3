#ifndef OSHEDA_LAMBDA_ESTIMATE_HPP
#define OSHEDA_LAMBDA_ESTIMATE_HPP

#include "osheda/dataset.hpp"

namespace osheda {

/// Distance-curve estimate of the known-class prior from labeled
/// (all-known) and unlabeled target data.
///
/// For each unlabeled point take the distance to its k-th nearest labeled
/// point; the estimate is the largest fraction q such that the q-quantile
/// of those distances stays within the 0.95-quantile of leave-one-out k-NN
/// distances inside the labeled set (binary search on q), clamped to
/// [0.05, 1].
double estimate_lambda(const FeatureDataset& target_labeled,
                       const FeatureDataset& target_unlabeled, std::size_t k);

} // namespace osheda

#endif
