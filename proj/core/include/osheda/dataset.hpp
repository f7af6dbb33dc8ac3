#ifndef OSHEDA_DATASET_HPP
#define OSHEDA_DATASET_HPP

#include <optional>
#include <string>
#include <vector>

#include "osheda/matrix.hpp"

namespace osheda {

enum class Domain { source, target };

/// Known-class count, total model output count and the reserved unknown
/// output. Known classes occupy indices 0..n_known-1; unknown_index ==
/// n_known. Generator truth may carry several novel class indices >=
/// n_known; they all collapse onto unknown_index at evaluation time.
struct LabelSpace {
    std::size_t n_known = 0;

    std::size_t n_total() const { return n_known + 1; }
    int unknown_index() const { return static_cast<int>(n_known); }

    int collapse(int label) const {
        return label >= static_cast<int>(n_known) ? unknown_index() : label;
    }
};

/// A feature matrix with optional integer labels and a domain tag.
/// Immutable by convention once constructed.
struct FeatureDataset {
    Matrix features;
    std::optional<std::vector<int>> labels;
    Domain domain = Domain::target;
    std::string name;

    std::size_t size() const { return features.rows(); }
    std::size_t dim() const { return features.cols(); }
};

/// Reads a comma-separated file: optional '#'-prefixed header lines,
/// decimal feature columns, and (when has_labels) a trailing integer label
/// column where -1 means unlabeled. All-(-1) label columns produce an
/// unlabeled dataset; a mix of -1 and real labels is a ParseError.
FeatureDataset load_csv(const std::string& path, bool has_labels,
                        Domain domain = Domain::target, const std::string& name = "");

/// Writes the dataset in the same format (label column appended when
/// labels are present). Deterministic: full round-trip precision.
void save_csv(const FeatureDataset& dataset, const std::string& path);

/// Single-column label file used for ground-truth dumps.
std::vector<int> load_label_column(const std::string& path);
void save_label_column(const std::vector<int>& labels, const std::string& path);

} // namespace osheda

#endif
