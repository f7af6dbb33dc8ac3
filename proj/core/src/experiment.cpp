#include "osheda/experiment.hpp"

#include "osheda/errors.hpp"

namespace osheda {

AblationRow ablation_row_from_name(const std::string& name) {
    if (name == "full") return {name, {true, true, true}, true};
    if (name == "no_align") return {name, {false, true, true}, true};
    if (name == "no_segregate") return {name, {true, false, true}, true};
    if (name == "no_osd") return {name, {true, true, false}, true};
    if (name == "no_two_stage") return {name, {true, true, true}, false};
    if (name == "cls_only") return {name, {false, false, false}, false};
    throw ConfigError("unknown ablation preset '" + name +
                      "' (expected full, no_align, no_segregate, no_osd, no_two_stage, "
                      "or cls_only)");
}

std::vector<AblationRow> standard_ablation_rows() {
    return {ablation_row_from_name("full"),         ablation_row_from_name("no_align"),
            ablation_row_from_name("no_segregate"), ablation_row_from_name("no_osd"),
            ablation_row_from_name("no_two_stage"), ablation_row_from_name("cls_only")};
}

std::vector<EvalReport> run_ablation_grid(const FeatureDataset& source,
                                          const FeatureDataset& target_labeled,
                                          const FeatureDataset& target_unlabeled,
                                          const Matrix& eval_features,
                                          const std::vector<int>& eval_truth,
                                          const TrainConfig& base,
                                          const std::vector<AblationRow>& rows) {
    std::vector<EvalReport> reports;
    reports.reserve(rows.size());
    for (const AblationRow& row : rows) {
        TrainConfig cfg = base;
        cfg.method = Method::rl_osheda;
        cfg.toggles = row.toggles;
        cfg.two_stage = row.two_stage;
        const TrainedModel model =
            train_rl_osheda(source, target_labeled, target_unlabeled, cfg);
        reports.push_back(evaluate(model, eval_features, eval_truth));
    }
    return reports;
}

} // namespace osheda
