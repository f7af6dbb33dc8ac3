#include "osheda/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <boost/math/special_functions/gamma.hpp>
#include <json.hpp>

#include "osheda/errors.hpp"

namespace osheda {

namespace {

// Nemenyi critical values q_alpha (studentized range / sqrt(2)) for
// k = 2..20 methods, from the standard two-tailed tables.
constexpr double kNemenyiQ05[] = {
    1.959964, 2.343701, 2.569032, 2.727774, 2.849705, 2.948320, 3.030879,
    3.101730, 3.163684, 3.218654, 3.268004, 3.312739, 3.353618, 3.391230,
    3.426041, 3.458425, 3.488685, 3.517073, 3.543799};
constexpr double kNemenyiQ10[] = {
    1.644854, 2.052293, 2.291341, 2.459516, 2.588521, 2.692732, 2.779884,
    2.854606, 2.919889, 2.977768, 3.029694, 3.076733, 3.119693, 3.159199,
    3.195743, 3.229723, 3.261461, 3.291224, 3.319233};

double nemenyi_q(std::size_t k, double alpha) {
    if (k < 2 || k > 20)
        throw ConfigError("Nemenyi critical values tabulated for 2 <= k <= 20");
    if (std::abs(alpha - 0.05) < 1e-12) return kNemenyiQ05[k - 2];
    if (std::abs(alpha - 0.10) < 1e-12) return kNemenyiQ10[k - 2];
    throw ConfigError("Nemenyi table covers alpha in {0.05, 0.10}");
}

double sample_stderr(const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double var = ss / static_cast<double>(v.size() - 1);
    return std::sqrt(var / static_cast<double>(v.size()));
}

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace

double harmonic_mean(double a, double b) {
    if (a + b <= 0.0) return 0.0;
    return 2.0 * a * b / (a + b);
}

EvalReport evaluate(const TrainedModel& model, const Matrix& features,
                    const std::vector<int>& truth) {
    if (truth.size() != features.rows())
        throw InvalidInputError("evaluate: truth length does not match feature rows");
    if (features.rows() == 0) throw InvalidInputError("evaluate: empty evaluation set");

    const LabelSpace& space = model.label_space;
    const std::size_t k = space.n_total();
    const int unk = space.unknown_index();

    const std::vector<int> preds = model_predict(model, features);

    EvalReport report;
    report.n_eval = features.rows();
    report.seed = model.config.seed;
    report.confusion.assign(k, std::vector<std::size_t>(k, 0));

    std::vector<std::size_t> per_class_total(k, 0), per_class_correct(k, 0);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const int t = space.collapse(truth[i]);
        const int p = space.collapse(preds[i]);
        report.confusion[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)]++;
        per_class_total[static_cast<std::size_t>(t)]++;
        if (t == p) per_class_correct[static_cast<std::size_t>(t)]++;
    }

    // Class-wise averaged accuracy over known classes present in the truth.
    double acc_sum = 0.0;
    std::size_t present = 0;
    for (std::size_t c = 0; c < space.n_known; ++c) {
        if (per_class_total[c] == 0) continue;
        acc_sum += static_cast<double>(per_class_correct[c]) /
                   static_cast<double>(per_class_total[c]);
        ++present;
    }
    report.os_star = present ? 100.0 * acc_sum / static_cast<double>(present) : 0.0;

    const std::size_t unk_total = per_class_total[static_cast<std::size_t>(unk)];
    report.has_unknown_truth = unk_total > 0;
    report.unk = unk_total ? 100.0 *
                                 static_cast<double>(
                                     per_class_correct[static_cast<std::size_t>(unk)]) /
                                 static_cast<double>(unk_total)
                           : 0.0;
    report.hos = harmonic_mean(report.os_star, report.unk);
    return report;
}

AggregateStats aggregate(const std::vector<EvalReport>& reports) {
    if (reports.empty()) throw InvalidInputError("aggregate: no reports");
    std::vector<double> os, unk, hos;
    for (const auto& r : reports) {
        os.push_back(r.os_star);
        unk.push_back(r.unk);
        hos.push_back(r.hos);
    }
    AggregateStats s;
    s.n_runs = reports.size();
    s.os_star_mean = mean_of(os);
    s.unk_mean = mean_of(unk);
    s.hos_mean = mean_of(hos);
    s.os_star_stderr = sample_stderr(os);
    s.unk_stderr = sample_stderr(unk);
    s.hos_stderr = sample_stderr(hos);
    return s;
}

SignificanceResult friedman_nemenyi(const Matrix& scores, double alpha) {
    const std::size_t k = scores.rows(); // methods
    const std::size_t n = scores.cols(); // tasks
    if (k < 2 || n < 2)
        throw InvalidInputError("friedman_nemenyi: need at least 2 methods and 2 tasks");

    // Per-task ranks, higher score = rank 1; ties share the average rank.
    Matrix ranks(k, n);
    std::vector<std::size_t> order(k);
    for (std::size_t t = 0; t < n; ++t) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return scores.at(a, t) > scores.at(b, t);
        });
        std::size_t i = 0;
        while (i < k) {
            std::size_t j = i;
            while (j + 1 < k && scores.at(order[j + 1], t) == scores.at(order[i], t)) ++j;
            const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
            for (std::size_t m = i; m <= j; ++m) ranks.at(order[m], t) = avg_rank;
            i = j + 1;
        }
    }

    SignificanceResult res;
    res.mean_ranks.resize(k);
    for (std::size_t m = 0; m < k; ++m) {
        double s = 0.0;
        for (std::size_t t = 0; t < n; ++t) s += ranks.at(m, t);
        res.mean_ranks[m] = s / static_cast<double>(n);
    }

    const double kd = static_cast<double>(k), nd = static_cast<double>(n);
    double sum_r2 = 0.0;
    for (double r : res.mean_ranks) sum_r2 += r * r;
    res.friedman_chi2 =
        12.0 * nd / (kd * (kd + 1.0)) * (sum_r2 - kd * (kd + 1.0) * (kd + 1.0) / 4.0);
    if (res.friedman_chi2 < 0.0) res.friedman_chi2 = 0.0; // tie round-off
    res.friedman_p = boost::math::gamma_q((kd - 1.0) / 2.0, res.friedman_chi2 / 2.0);

    res.critical_difference = nemenyi_q(k, alpha) * std::sqrt(kd * (kd + 1.0) / (6.0 * nd));
    res.pairwise_significant.assign(k, std::vector<bool>(k, false));
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j)
            res.pairwise_significant[i][j] =
                i != j &&
                std::abs(res.mean_ranks[i] - res.mean_ranks[j]) > res.critical_difference;
    return res;
}

void save_score_matrix(const std::string& path, const std::vector<std::string>& methods,
                       const std::vector<std::string>& tasks, const Matrix& scores,
                       const std::string& comment) {
    if (methods.size() != scores.rows() || tasks.size() != scores.cols())
        throw ShapeError("save_score_matrix: name/shape mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInputError("cannot write '" + path + "'");
    if (!comment.empty()) out << "# " << comment << '\n';
    out << "method";
    for (const auto& t : tasks) out << ',' << t;
    out << '\n';
    char buf[32];
    for (std::size_t m = 0; m < methods.size(); ++m) {
        out << methods[m];
        for (std::size_t t = 0; t < tasks.size(); ++t) {
            std::snprintf(buf, sizeof(buf), "%.17g", scores.at(m, t));
            out << ',' << buf;
        }
        out << '\n';
    }
}

ScoreMatrix load_score_matrix(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("cannot open '" + path + "'");
    ScoreMatrix sm;
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<std::string> cells;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!header_seen) {
            header_seen = true;
            sm.tasks.assign(cells.begin() + 1, cells.end());
            continue;
        }
        if (cells.size() != sm.tasks.size() + 1)
            throw ParseError("score row width mismatch", line_no);
        sm.methods.push_back(cells[0]);
        std::vector<double> vals;
        for (std::size_t c = 1; c < cells.size(); ++c) {
            try {
                vals.push_back(std::stod(cells[c]));
            } catch (const std::exception&) {
                throw ParseError("non-numeric score '" + cells[c] + "'", line_no);
            }
        }
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw ParseError("empty score matrix", line_no);
    sm.scores = Matrix(rows.size(), sm.tasks.size());
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < sm.tasks.size(); ++c) sm.scores.at(r, c) = rows[r][c];
    return sm;
}

std::string eval_report_to_json(const EvalReport& report, const std::string& manifest_hash) {
    nlohmann::json j;
    j["os_star"] = report.os_star;
    j["unk"] = report.unk;
    j["hos"] = report.hos;
    j["confusion"] = report.confusion;
    j["n_eval"] = report.n_eval;
    j["seed"] = report.seed;
    j["has_unknown_truth"] = report.has_unknown_truth;
    if (!manifest_hash.empty()) j["manifest_hash"] = manifest_hash;
    return j.dump(2);
}

std::string significance_to_json(const SignificanceResult& result,
                                 const std::vector<std::string>& methods) {
    nlohmann::json j;
    j["friedman_chi2"] = result.friedman_chi2;
    j["friedman_p"] = result.friedman_p;
    j["critical_difference"] = result.critical_difference;
    j["methods"] = methods;
    j["mean_ranks"] = result.mean_ranks;
    j["pairwise_significant"] = result.pairwise_significant;
    return j.dump(2);
}

} // namespace osheda
