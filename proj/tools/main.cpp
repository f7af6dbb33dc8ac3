// Command-line front end: dataset generation, training, evaluation, the
// method/ablation benchmark harness, bound audits, and prior estimation.
//
// Exit codes: 0 success, 2 input/config error, 3 numeric failure.

#include <atomic>
#include <filesystem>
#include <optional>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "osheda/bounds.hpp"
#include "osheda/dataset.hpp"
#include "osheda/errors.hpp"
#include "osheda/experiment.hpp"
#include "osheda/lambda_estimate.hpp"
#include "osheda/manifest.hpp"
#include "osheda/metrics.hpp"
#include "osheda/model_io.hpp"
#include "osheda/run_config.hpp"
#include "osheda/synthetic.hpp"
#include "osheda/trainer.hpp"

namespace fs = std::filesystem;
using namespace osheda;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitNumeric = 3;

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInputError("cannot write '" + path.string() + "'");
    out << text;
    if (text.empty() || text.back() != '\n') out << '\n';
}

SyntheticConfig synthetic_from_config(const RunConfig& cfg) {
    if (!cfg.has("synthetic.n_known"))
        throw ConfigError("config has no synthetic.* section");
    SyntheticConfig s;
    s.latent_dim = cfg.get_uint("synthetic.latent_dim", 8);
    s.d_source = cfg.get_uint("synthetic.d_source", 20);
    s.d_target = cfg.get_uint("synthetic.d_target", 30);
    s.n_known = cfg.get_uint("synthetic.n_known");
    s.n_novel = cfg.get_uint("synthetic.n_novel", 1);
    s.lambda_true = cfg.get_double("synthetic.lambda_true", 2.0 / 3.0);
    s.n_source = cfg.get_uint("synthetic.n_source", 2000);
    s.n_target_labeled_per_class = cfg.get_uint("synthetic.n_target_labeled_per_class", 5);
    s.n_target_unlabeled = cfg.get_uint("synthetic.n_target_unlabeled", 2000);
    s.noise_std = cfg.get_double("synthetic.noise_std", 0.25);
    s.seed = cfg.get_uint("synthetic.seed", 0);
    s.validate();
    return s;
}

TrainConfig train_from_config(const RunConfig& cfg, double fallback_lambda) {
    TrainConfig t;
    t.lambda = cfg.get_double("train.lambda", fallback_lambda);
    t.stage_threshold = cfg.get_uint("train.stage_threshold", 0);
    t.epochs = cfg.get_uint("train.epochs", 40);
    t.batch_source = cfg.get_uint("train.batch_source", 64);
    t.batch_target_labeled = cfg.get_uint("train.batch_target_labeled", 32);
    t.batch_target_unlabeled = cfg.get_uint("train.batch_target_unlabeled", 64);
    t.learning_rate = cfg.get_double("train.learning_rate", 0.05);
    t.repr_dim = cfg.get_uint("train.repr_dim", 256);
    t.toggles.align = cfg.get_bool("train.align", true);
    t.toggles.segregate = cfg.get_bool("train.segregate", true);
    t.toggles.osd = cfg.get_bool("train.osd", true);
    t.two_stage = cfg.get_bool("train.two_stage", true);
    t.method = method_from_name(cfg.get_string("train.method", "rl_osheda"));
    t.seed = cfg.get_uint("train.seed", 0);
    t.validate();
    return t;
}

fs::path resolve_out_dir(const RunConfig& cfg, const std::string& out_flag) {
    fs::path dir = !out_flag.empty() ? fs::path(out_flag)
                                     : fs::path(cfg.get_string("out.dir", "out"));
    fs::create_directories(dir);
    return dir;
}

TrainedModel train_by_method(Method method, const SyntheticBundle& bundle,
                             const TrainConfig& tcfg) {
    switch (method) {
    case Method::rl_osheda:
        return train_rl_osheda(bundle.source, bundle.target_labeled,
                               bundle.target_unlabeled, tcfg);
    case Method::sl:
        return train_sl(bundle.target_labeled, tcfg);
    case Method::pl:
        return train_pl(bundle.target_labeled, bundle.target_unlabeled, tcfg);
    }
    throw ConfigError("unreachable method");
}

// ---------------------------------------------------------------------- //

int cmd_generate(const std::string& config_path, const std::string& out_flag,
                 const std::optional<std::uint64_t>& seed_flag) {
    const RunConfig cfg = RunConfig::from_file(config_path);
    SyntheticConfig scfg = synthetic_from_config(cfg);
    if (seed_flag) scfg.seed = *seed_flag;
    const fs::path dir = resolve_out_dir(cfg, out_flag);

    const SyntheticBundle b = generate_synthetic(scfg);
    save_csv(b.source, (dir / "source.csv").string());
    save_csv(b.target_labeled, (dir / "target_labeled.csv").string());
    save_csv(b.target_unlabeled, (dir / "target_unlabeled.csv").string());
    save_label_column(b.target_unlabeled_truth, (dir / "target_unlabeled_truth.csv").string());

    RunManifest manifest = make_manifest(
        "generate seed=" + std::to_string(scfg.seed), cfg.raw_text(), {});
    manifest.outputs = {"source.csv", "target_labeled.csv", "target_unlabeled.csv",
                        "target_unlabeled_truth.csv"};
    write_manifest(manifest, (dir / "manifest.json").string());
    std::cout << "wrote 4 dataset files to " << dir.string() << " (manifest "
              << manifest.content_hash().substr(0, 12) << ")\n";
    return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& out_flag,
              const std::optional<std::uint64_t>& seed_flag) {
    const RunConfig cfg = RunConfig::from_file(config_path);
    const fs::path dir = resolve_out_dir(cfg, out_flag);

    const Method method = method_from_name(cfg.get_string("train.method", "rl_osheda"));
    const std::string tl_path = cfg.get_string("data.target_labeled");
    const std::string tu_path = cfg.get_string("data.target_unlabeled", "");
    const std::string src_path = cfg.get_string("data.source", "");

    std::vector<std::string> inputs = {tl_path};
    FeatureDataset tl = load_csv(tl_path, true, Domain::target);
    FeatureDataset tu, src;
    if (method != Method::sl) {
        if (tu_path.empty())
            throw ConfigError("data.target_unlabeled is required for this method");
        tu = load_csv(tu_path, false, Domain::target);
        inputs.push_back(tu_path);
    }
    if (method == Method::rl_osheda) {
        if (src_path.empty())
            throw ConfigError("data.source is required for rl_osheda");
        src = load_csv(src_path, true, Domain::source);
        inputs.push_back(src_path);
    }

    double lambda = cfg.get_double("train.lambda", 0.5);
    if (cfg.get_bool("train.estimate_lambda", false)) {
        const std::size_t k = cfg.get_uint("train.lambda_k", 3);
        lambda = estimate_lambda(tl, tu, k);
        std::cout << "estimated lambda = " << lambda << " (k = " << k << ")\n";
    }
    TrainConfig tcfg = train_from_config(cfg, lambda);
    tcfg.lambda = lambda;
    tcfg.method = method;
    if (seed_flag) tcfg.seed = *seed_flag;

    RunManifest manifest = make_manifest(
        "train seed=" + std::to_string(tcfg.seed), cfg.raw_text(), inputs);
    const std::string hash = manifest.content_hash();

    TrainedModel model;
    switch (method) {
    case Method::rl_osheda: model = train_rl_osheda(src, tl, tu, tcfg); break;
    case Method::sl: model = train_sl(tl, tcfg); break;
    case Method::pl: model = train_pl(tl, tu, tcfg); break;
    }

    save_model(model, (dir / "model.json").string(), hash);
    write_text(dir / "loss_history.json", loss_history_to_json(model.loss_history, hash));
    manifest.outputs = {"model.json", "loss_history.json"};
    write_manifest(manifest, (dir / "manifest.json").string());
    std::cout << "trained " << method_name(method) << " for " << tcfg.epochs
              << " epochs; final loss " << model.loss_history.back().total << "\n";
    return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::string& truth_path, const std::string& out_flag) {
    const TrainedModel model = load_model(model_path);
    const FeatureDataset data = load_csv(data_path, false, Domain::target);
    const std::vector<int> truth = load_label_column(truth_path);

    RunManifest manifest =
        make_manifest("eval", "", {model_path, data_path, truth_path});
    const EvalReport report = evaluate(model, data.features, truth);
    nlohmann::json j = nlohmann::json::parse(
        eval_report_to_json(report, manifest.content_hash()));
    j["method"] = method_name(model.method);
    j["inference_lambda"] = model.config.lambda;
    const std::string json = j.dump(2);
    std::cout << json << "\n";
    if (!out_flag.empty()) {
        fs::create_directories(fs::path(out_flag));
        write_text(fs::path(out_flag) / "eval_report.json", json);
        manifest.outputs = {"eval_report.json"};
        write_manifest(manifest, (fs::path(out_flag) / "manifest.json").string());
    }
    return kExitOk;
}

struct BenchCell {
    std::string name;
    Method method;
    AblationRow row;
    std::size_t seed_index;
};

int cmd_bench(const std::string& config_path, const std::string& out_flag, unsigned jobs,
              bool strict, const std::optional<std::uint64_t>& seed_flag) {
    const RunConfig cfg = RunConfig::from_file(config_path);
    const fs::path dir = resolve_out_dir(cfg, out_flag);
    fs::create_directories(dir / "cells");

    const SyntheticConfig base_task = synthetic_from_config(cfg);
    const std::size_t n_seeds = cfg.get_uint("bench.seeds", 10);
    const std::uint64_t root = seed_flag ? *seed_flag : cfg.get_uint("bench.root_seed", 1);
    const double alpha = cfg.get_double("bench.alpha", 0.05);

    std::vector<std::pair<std::string, AblationRow>> rows; // name -> variant
    if (cfg.has("bench.methods")) {
        for (const auto& m : cfg.get_list("bench.methods"))
            rows.emplace_back(m, ablation_row_from_name("full"));
    }
    if (cfg.has("bench.ablations")) {
        for (const auto& a : cfg.get_list("bench.ablations"))
            rows.emplace_back("rl_osheda_" + a, ablation_row_from_name(a));
    }
    if (rows.empty()) throw ConfigError("bench needs bench.methods or bench.ablations");

    std::vector<BenchCell> cells;
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t s = 0; s < n_seeds; ++s) {
            BenchCell c;
            c.name = rows[r].first;
            c.method = rows[r].first.rfind("rl_osheda_", 0) == 0
                           ? Method::rl_osheda
                           : method_from_name(rows[r].first);
            c.row = rows[r].second;
            c.seed_index = s;
            cells.push_back(std::move(c));
        }

    RunManifest manifest =
        make_manifest("bench root_seed=" + std::to_string(root), cfg.raw_text(), {});
    const std::string hash = manifest.content_hash();

    // One synthetic bundle per seed index, shared across methods so the
    // per-seed comparisons are paired.
    std::vector<SyntheticBundle> bundles(n_seeds);
    for (std::size_t s = 0; s < n_seeds; ++s) {
        SyntheticConfig task = base_task;
        task.seed = derive_seed(root, 100 + s);
        bundles[s] = generate_synthetic(task);
    }

    std::vector<EvalReport> reports(cells.size());
    std::vector<std::string> errors(cells.size());
    std::atomic<std::size_t> next{0};
    std::mutex io_mutex;

    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= cells.size()) return;
            const BenchCell& cell = cells[i];
            try {
                const SyntheticBundle& b = bundles[cell.seed_index];
                TrainConfig tcfg = train_from_config(cfg, b.lambda_true);
                tcfg.method = cell.method;
                tcfg.toggles = cell.row.toggles;
                tcfg.two_stage = cell.row.two_stage;
                tcfg.seed = derive_seed(root, 200 + cell.seed_index);
                const TrainedModel model = train_by_method(cell.method, b, tcfg);
                reports[i] = evaluate(model, b.target_unlabeled.features,
                                      b.target_unlabeled_truth);
                const std::string cell_json = eval_report_to_json(reports[i], hash);
                std::lock_guard<std::mutex> lock(io_mutex);
                write_text(dir / "cells" /
                               (cell.name + "_seed" + std::to_string(cell.seed_index) +
                                ".json"),
                           cell_json);
            } catch (const std::exception& e) {
                std::lock_guard<std::mutex> lock(io_mutex);
                errors[i] = e.what();
            }
        }
    };
    const unsigned n_threads =
        std::max(1u, jobs == 0 ? std::thread::hardware_concurrency() : jobs);
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    bool any_failed = false;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (errors[i].empty()) continue;
        any_failed = true;
        std::cerr << "cell " << cells[i].name << " seed " << cells[i].seed_index
                  << " failed: " << errors[i] << "\n";
    }
    if (any_failed && strict) return kExitInput;

    // Aggregate table (mean +- stderr) and the per-seed score matrix.
    std::string table = "name,hos_mean,hos_stderr,os_star_mean,os_star_stderr,"
                        "unk_mean,unk_stderr,n\n";
    Matrix scores(rows.size(), n_seeds);
    std::vector<std::string> row_names, seed_names;
    for (std::size_t s = 0; s < n_seeds; ++s)
        seed_names.push_back("seed" + std::to_string(s));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        row_names.push_back(rows[r].first);
        std::vector<EvalReport> row_reports;
        for (std::size_t s = 0; s < n_seeds; ++s) {
            const std::size_t idx = r * n_seeds + s;
            if (!errors[idx].empty()) continue;
            row_reports.push_back(reports[idx]);
            scores.at(r, s) = reports[idx].hos;
        }
        if (row_reports.empty()) continue;
        const AggregateStats st = aggregate(row_reports);
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%s,%.4f,%.4f,%.4f,%.4f,%.4f,%.4f,%zu\n",
                      rows[r].first.c_str(), st.hos_mean, st.hos_stderr, st.os_star_mean,
                      st.os_star_stderr, st.unk_mean, st.unk_stderr, st.n_runs);
        table += buf;
    }
    write_text(dir / "table.csv", "# manifest: " + hash + "\n" + table);
    save_score_matrix((dir / "scores.csv").string(), row_names, seed_names, scores,
                      "manifest: " + hash);

    if (rows.size() >= 2 && n_seeds >= 2 && !any_failed) {
        const SignificanceResult sig = friedman_nemenyi(scores, alpha);
        write_text(dir / "significance.json", significance_to_json(sig, row_names));
    }

    manifest.outputs = {"table.csv", "scores.csv", "significance.json"};
    write_manifest(manifest, (dir / "manifest.json").string());
    std::cout << table;
    return kExitOk;
}

int cmd_bound_audit(const std::string& config_path, const std::string& out_flag,
                    const std::optional<std::uint64_t>& seed_flag) {
    const RunConfig cfg = RunConfig::from_file(config_path);
    const fs::path dir = resolve_out_dir(cfg, out_flag);

    const SyntheticConfig base = synthetic_from_config(cfg);
    const std::size_t n_configs = cfg.get_uint("audit.n_configs", 1);
    const std::uint64_t root = seed_flag ? *seed_flag : cfg.get_uint("audit.root_seed", 7);
    const std::size_t codebook = cfg.get_uint("audit.codebook_size", 32);
    const double tolerance = cfg.get_double("audit.tolerance", 0.05);

    RunManifest manifest = make_manifest(
        "bound-audit root_seed=" + std::to_string(root), cfg.raw_text(), {});

    nlohmann::json out = nlohmann::json::array();
    Rng rng(derive_seed(root, 0xa0d1));
    for (std::size_t i = 0; i < n_configs; ++i) {
        SyntheticConfig task = base;
        if (n_configs > 1) {
            // Randomized sweep around the base task.
            task.latent_dim = 3 + rng.uniform_index(5);
            task.d_source = 8 + rng.uniform_index(16);
            task.d_target = 8 + rng.uniform_index(22);
            task.n_known = 2 + rng.uniform_index(4);
            task.n_novel = 1 + rng.uniform_index(3);
            task.lambda_true = 0.4 + 0.5 * rng.uniform();
            task.noise_std = 0.2 + 0.2 * rng.uniform();
            task.n_source = 300;
            task.n_target_labeled_per_class = 5;
            task.n_target_unlabeled = 400;
            task.seed = derive_seed(root, 300 + i);
        }
        const SyntheticBundle b = generate_synthetic(task);

        TrainConfig tcfg = train_from_config(cfg, b.lambda_true);
        tcfg.method = Method::rl_osheda;
        tcfg.seed = derive_seed(root, 400 + i);
        if (n_configs > 1) {
            tcfg.epochs = cfg.get_uint("audit.train_epochs", 10);
            tcfg.stage_threshold = std::max<std::size_t>(1, tcfg.epochs / 2);
            tcfg.repr_dim = cfg.get_uint("audit.repr_dim", 16);
        }

        // Untrained model: same architecture, initialization only.
        TrainedModel untrained;
        untrained.method = Method::rl_osheda;
        untrained.label_space = b.label_space;
        untrained.config = tcfg;
        untrained.config.lambda = b.lambda_true;
        untrained.f_source = build_representation_mapping(b.source.dim(), tcfg.repr_dim);
        untrained.f_target =
            build_representation_mapping(b.target_labeled.dim(), tcfg.repr_dim);
        untrained.classifier = build_classifier(tcfg.repr_dim, b.label_space.n_total());
        Rng init(derive_seed(tcfg.seed, 1));
        initialize_params(*untrained.f_source, init);
        initialize_params(untrained.f_target, init);
        initialize_params(untrained.classifier, init);

        TrainedModel trained = train_rl_osheda(b.source, b.target_labeled,
                                               b.target_unlabeled, tcfg);

        const std::uint64_t js_seed = derive_seed(root, 500 + i);
        for (const auto* model : {&untrained, &trained}) {
            const BoundReport up = audit_upper_bound(*model, b, codebook, js_seed, tolerance);
            const BoundReport low =
                audit_lower_bound(*model, b, codebook, js_seed, tolerance);
            nlohmann::json entry;
            entry["config_index"] = i;
            entry["trained"] = (model == &trained);
            entry["lambda_true"] = b.lambda_true;
            entry["upper"] = nlohmann::json::parse(bound_report_to_json(up));
            entry["lower"] = nlohmann::json::parse(bound_report_to_json(low));
            entry["pseudo_noise"] = pseudo_label_noise(*model, b);
            out.push_back(std::move(entry));
        }
    }

    nlohmann::json wrapper;
    wrapper["manifest_hash"] = manifest.content_hash();
    wrapper["reports"] = std::move(out);
    write_text(dir / "bound_reports.json", wrapper.dump(2));
    manifest.outputs = {"bound_reports.json"};
    write_manifest(manifest, (dir / "manifest.json").string());

    std::size_t holds = 0, total = 0;
    for (const auto& e : wrapper["reports"]) {
        total += 2;
        if (e["upper"]["holds_upper"].get<bool>()) ++holds;
        if (e["lower"]["holds_lower"].get<bool>()) ++holds;
    }
    std::cout << "bound audit: " << holds << "/" << total << " inequalities hold\n";
    return kExitOk;
}

int cmd_estimate_lambda(const std::string& labeled_path, const std::string& unlabeled_path,
                        std::size_t k, const std::string& out_flag) {
    const FeatureDataset labeled = load_csv(labeled_path, true, Domain::target);
    const FeatureDataset unlabeled = load_csv(unlabeled_path, false, Domain::target);
    const double lambda_hat = estimate_lambda(labeled, unlabeled, k);
    nlohmann::json j;
    j["lambda_hat"] = lambda_hat;
    j["k"] = k;
    std::cout << j.dump(2) << "\n";
    if (!out_flag.empty()) {
        fs::create_directories(fs::path(out_flag));
        write_text(fs::path(out_flag) / "lambda.json", j.dump(2));
    }
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Open-set heterogeneous domain adaptation toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir, model_path, data_path, truth_path;
    std::string labeled_path, unlabeled_path;
    unsigned jobs = 0;
    bool strict = false;
    std::size_t k = 3;
    std::uint64_t seed_value = 0;
    bool seed_given = false;

    auto* gen = app.add_subcommand("generate", "Write a synthetic benchmark to disk");
    gen->add_option("--config", config_path, "Run configuration file")->required();
    gen->add_option("--out", out_dir, "Output directory (overrides out.dir)");
    gen->add_option("--seed", seed_value, "Override the config seed")
        ->each([&](const std::string&) { seed_given = true; });

    auto* train = app.add_subcommand("train", "Train a model from a config");
    train->add_option("--config", config_path)->required();
    train->add_option("--out", out_dir);
    train->add_option("--seed", seed_value, "Override the config seed")
        ->each([&](const std::string&) { seed_given = true; });

    auto* eval = app.add_subcommand("eval", "Evaluate a serialized model");
    eval->add_option("--model", model_path)->required();
    eval->add_option("--data", data_path)->required();
    eval->add_option("--truth", truth_path)->required();
    eval->add_option("--out", out_dir);

    auto* bench = app.add_subcommand("bench", "Run a methods x seeds benchmark grid");
    bench->add_option("--config", config_path)->required();
    bench->add_option("--out", out_dir);
    bench->add_option("--jobs", jobs, "Parallel cells (default: logical cores)");
    bench->add_flag("--strict", strict, "Fail the run if any cell fails");
    bench->add_option("--seed", seed_value, "Override the config root seed")
        ->each([&](const std::string&) { seed_given = true; });

    auto* audit = app.add_subcommand("bound-audit", "Audit the learning-bound inequalities");
    audit->add_option("--config", config_path)->required();
    audit->add_option("--out", out_dir);
    audit->add_option("--seed", seed_value, "Override the config root seed")
        ->each([&](const std::string&) { seed_given = true; });

    auto* el = app.add_subcommand("estimate-lambda", "Estimate the known-class prior");
    el->add_option("--labeled", labeled_path)->required();
    el->add_option("--unlabeled", unlabeled_path)->required();
    el->add_option("--k", k, "Neighbor count (default 3)");
    el->add_option("--out", out_dir);

    CLI11_PARSE(app, argc, argv);

    const std::optional<std::uint64_t> seed_flag =
        seed_given ? std::optional<std::uint64_t>(seed_value) : std::nullopt;
    try {
        if (gen->parsed()) return cmd_generate(config_path, out_dir, seed_flag);
        if (train->parsed()) return cmd_train(config_path, out_dir, seed_flag);
        if (eval->parsed()) return cmd_eval(model_path, data_path, truth_path, out_dir);
        if (bench->parsed()) return cmd_bench(config_path, out_dir, jobs, strict, seed_flag);
        if (audit->parsed()) return cmd_bound_audit(config_path, out_dir, seed_flag);
        if (el->parsed()) return cmd_estimate_lambda(labeled_path, unlabeled_path, k, out_dir);
    } catch (const NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitInput;
    }
    return kExitOk;
}
