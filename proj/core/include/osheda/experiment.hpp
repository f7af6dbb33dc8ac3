#ifndef OSHEDA_EXPERIMENT_HPP
#define OSHEDA_EXPERIMENT_HPP

#include <string>
#include <vector>

#include "osheda/metrics.hpp"
#include "osheda/trainer.hpp"

namespace osheda {

/// One objective variant of the ablation study.
struct AblationRow {
    std::string name;
    LossToggles toggles;
    bool two_stage = true;
};

/// Named presets: full, no_align, no_segregate, no_osd, no_two_stage,
/// cls_only.
AblationRow ablation_row_from_name(const std::string& name);

/// The six standard ablation rows (full objective first).
std::vector<AblationRow> standard_ablation_rows();

/// Trains one rl_osheda model per row under a shared seed schedule
/// (base.seed), evaluates each on (eval_features, eval_truth), and returns
/// the reports in row order.
std::vector<EvalReport> run_ablation_grid(const FeatureDataset& source,
                                          const FeatureDataset& target_labeled,
                                          const FeatureDataset& target_unlabeled,
                                          const Matrix& eval_features,
                                          const std::vector<int>& eval_truth,
                                          const TrainConfig& base,
                                          const std::vector<AblationRow>& rows);

} // namespace osheda

#endif
