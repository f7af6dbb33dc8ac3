#ifndef OSHEDA_METRICS_HPP
#define OSHEDA_METRICS_HPP

#include <string>
#include <vector>

#include "osheda/matrix.hpp"
#include "osheda/trainer.hpp"

namespace osheda {

/// Open-set evaluation result. os_star/unk/hos are percentages in [0,100].
/// confusion is (n_known+1) x (n_known+1), rows = true class, columns =
/// prediction. has_unknown_truth marks whether any unknown-class instance
/// was present (unk is reported as 0 otherwise).
struct EvalReport {
    double os_star = 0.0;
    double unk = 0.0;
    double hos = 0.0;
    std::vector<std::vector<std::size_t>> confusion;
    std::size_t n_eval = 0;
    std::uint64_t seed = 0;
    bool has_unknown_truth = false;
};

/// Harmonic mean on the percentage scale; 0 when both inputs are 0.
double harmonic_mean(double a, double b);

/// Evaluates a trained model: class-wise averaged accuracy over known
/// classes present in the truth (os_star), accuracy on unknown-class rows
/// (unk), and their harmonic mean (hos). Truth entries >= n_known all
/// count as the unknown class.
EvalReport evaluate(const TrainedModel& model, const Matrix& features,
                    const std::vector<int>& truth);

struct AggregateStats {
    double os_star_mean = 0.0, os_star_stderr = 0.0;
    double unk_mean = 0.0, unk_stderr = 0.0;
    double hos_mean = 0.0, hos_stderr = 0.0;
    std::size_t n_runs = 0;
};

/// Mean and standard error across seeds. hos is averaged per-run, not
/// recomputed from the averaged os_star/unk.
AggregateStats aggregate(const std::vector<EvalReport>& reports);

struct SignificanceResult {
    double friedman_chi2 = 0.0;
    double friedman_p = 1.0;
    double critical_difference = 0.0;
    std::vector<double> mean_ranks;                    // 1 = best
    std::vector<std::vector<bool>> pairwise_significant;
};

/// Friedman test (chi-square approximation) over a methods x tasks score
/// matrix (higher is better; ties get average ranks), followed by the
/// Nemenyi critical-difference test. alpha must be 0.05 or 0.10.
SignificanceResult friedman_nemenyi(const Matrix& scores, double alpha = 0.05);

/// methods-by-tasks score matrix as CSV: optional '#' comment line, header
/// row of task names, one row per method with its name in the first column.
void save_score_matrix(const std::string& path, const std::vector<std::string>& methods,
                       const std::vector<std::string>& tasks, const Matrix& scores,
                       const std::string& comment = "");

struct ScoreMatrix {
    std::vector<std::string> methods;
    std::vector<std::string> tasks;
    Matrix scores;
};
ScoreMatrix load_score_matrix(const std::string& path);

std::string eval_report_to_json(const EvalReport& report, const std::string& manifest_hash = "");
std::string significance_to_json(const SignificanceResult& result,
                                 const std::vector<std::string>& methods);

} // namespace osheda

#endif
