#include "osheda/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "osheda/errors.hpp"

namespace osheda {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kSourceStream = 2;
constexpr std::uint64_t kTargetLabeledStream = 3;
constexpr std::uint64_t kTargetUnlabeledStream = 4;

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

std::size_t derive_n_known(const FeatureDataset& a, const FeatureDataset* b) {
    int max_label = -1;
    if (a.labels)
        for (int y : *a.labels) max_label = std::max(max_label, y);
    if (b && b->labels)
        for (int y : *b->labels) max_label = std::max(max_label, y);
    if (max_label < 1)
        throw InvalidInputError("training data must contain at least two known classes");
    return static_cast<std::size_t>(max_label) + 1;
}

void require_labeled(const FeatureDataset& ds, const char* what) {
    if (ds.size() == 0) throw InvalidInputError(std::string(what) + " is empty");
    if (!ds.labels) throw InvalidInputError(std::string(what) + " must be labeled");
}

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
    return m.take_rows(std::span<const std::size_t>(idx));
}

std::vector<int> gather_labels(const std::vector<int>& labels,
                               const std::vector<std::size_t>& idx) {
    std::vector<int> out(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = labels[idx[i]];
    return out;
}

Matrix slice_rows(const Matrix& m, std::size_t begin, std::size_t end) {
    Matrix out(end - begin, m.cols());
    for (std::size_t r = begin; r < end; ++r) {
        auto src = m.row(r);
        auto dst = out.row(r - begin);
        std::copy(src.begin(), src.end(), dst.begin());
    }
    return out;
}

void add_rows_into(Matrix& dst, std::size_t dst_begin, const Matrix& src) {
    for (std::size_t r = 0; r < src.rows(); ++r) {
        auto d = dst.row(dst_begin + r);
        auto s = src.row(r);
        for (std::size_t c = 0; c < src.cols(); ++c) d[c] += s[c];
    }
}

void accumulate_epoch(LossBreakdown& acc, const LossBreakdown& step) {
    acc.classification += step.classification;
    acc.alignment += step.alignment;
    acc.segregation += step.segregation;
    acc.open_set += step.open_set;
    acc.total += step.total;
}

LossBreakdown mean_epoch(const LossBreakdown& acc, std::size_t steps) {
    const double inv = 1.0 / static_cast<double>(steps);
    LossBreakdown mean{acc.classification * inv, acc.alignment * inv, acc.segregation * inv,
                       acc.open_set * inv, 0.0};
    // Recomputed from the mean components so the recorded entries satisfy
    // the objective identity exactly.
    mean.total = mean.classification + mean.alignment - mean.segregation + mean.open_set;
    return mean;
}

void check_epoch_finite(const LossBreakdown& b, std::size_t epoch) {
    if (!std::isfinite(b.total) || !std::isfinite(b.classification) ||
        !std::isfinite(b.alignment) || !std::isfinite(b.segregation) ||
        !std::isfinite(b.open_set))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch),
                           static_cast<long>(epoch));
}

} // namespace

const char* method_name(Method m) {
    switch (m) {
    case Method::rl_osheda: return "rl_osheda";
    case Method::sl: return "sl";
    case Method::pl: return "pl";
    }
    return "?";
}

Method method_from_name(const std::string& name) {
    if (name == "rl_osheda") return Method::rl_osheda;
    if (name == "sl") return Method::sl;
    if (name == "pl") return Method::pl;
    throw ConfigError("unknown method '" + name + "'");
}

void TrainConfig::validate() const {
    if (!(lambda >= 0.0 && lambda <= 1.0))
        throw ConfigError("lambda must be in [0, 1]");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    const std::size_t t = stage_threshold_or_default();
    if (t < 1 || t > epochs)
        throw ConfigError("stage threshold must satisfy 1 <= T <= epochs");
    if (batch_source < 1 || batch_target_labeled < 1 || batch_target_unlabeled < 1)
        throw ConfigError("batch sizes must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (repr_dim < 1) throw ConfigError("repr_dim must be >= 1");
}

ShuffledCycler::ShuffledCycler(std::size_t n, std::uint64_t seed) : n_(n), rng_(seed) {
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), 0);
    refill();
}

void ShuffledCycler::refill() {
    rng_.shuffle(order_);
    pos_ = 0;
}

std::vector<std::size_t> ShuffledCycler::next(std::size_t count) {
    std::vector<std::size_t> out;
    if (n_ == 0) return out;
    out.reserve(count);
    while (out.size() < count) {
        if (pos_ == n_) refill();
        out.push_back(order_[pos_++]);
    }
    return out;
}

LossBreakdown rl_objective_step(Network& f_source, Network& f_target, Network& classifier,
                                const StepBatches& batches, double lambda,
                                const LossToggles& toggles, bool stage2,
                                const LabelSpace& space, bool with_gradients,
                                const std::vector<int>* pseudo_override,
                                std::vector<int>* pseudo_out) {
    const std::size_t n_tl = batches.target_labeled_x.rows();
    const std::size_t n_tu = batches.target_unlabeled_x.rows();
    const std::size_t n_known = space.n_known;
    const int unk = space.unknown_index();

    // Forward passes (source and concatenated target stream).
    ForwardTrace tr_fs, tr_ft, tr_hs, tr_ht;
    const Matrix repr_s = forward(f_source, batches.source_x, with_gradients ? &tr_fs : nullptr);
    const Matrix logits_s = forward(classifier, repr_s, with_gradients ? &tr_hs : nullptr);
    const Matrix target_x = Matrix::vcat(batches.target_labeled_x, batches.target_unlabeled_x);
    const Matrix repr_t = forward(f_target, target_x, with_gradients ? &tr_ft : nullptr);
    const Matrix logits_t = forward(classifier, repr_t, with_gradients ? &tr_ht : nullptr);
    const Matrix logits_tl = slice_rows(logits_t, 0, n_tl);

    Matrix g_cls_s, g_cls_tl;
    const double cls =
        classification_loss(logits_s, batches.source_y, logits_tl, batches.target_labeled_y,
                            lambda, with_gradients ? &g_cls_s : nullptr,
                            with_gradients ? &g_cls_tl : nullptr);

    const LossToggles active = stage2 ? toggles : LossToggles{false, false, false};

    // Pseudo-labels for the unlabeled block, needed by align/segregate.
    std::vector<int> pseudo;
    if (stage2 && (active.align || active.segregate) && n_tu > 0) {
        if (pseudo_override) {
            pseudo = *pseudo_override;
            if (pseudo.size() != n_tu)
                throw ShapeError("pseudo_override size mismatch");
        } else {
            pseudo = assign_pseudo_labels(slice_rows(logits_t, n_tl, n_tl + n_tu), lambda, unk)
                         .labels;
        }
    }
    if (pseudo_out) *pseudo_out = pseudo;

    // Target-side labels over the concatenated batch: ground truth then pseudo.
    std::vector<int> target_labels(batches.target_labeled_y);
    target_labels.insert(target_labels.end(), pseudo.begin(), pseudo.end());

    double align_val = 0.0, seg_val = 0.0, osd_val = 0.0;
    Matrix g_align_s, g_align_t, g_seg_known, g_seg_unknown, g_osd_t, g_osd_s;
    std::vector<std::size_t> known_t_rows, unknown_t_rows;

    if (active.align || active.segregate) {
        for (std::size_t r = 0; r < target_labels.size(); ++r) {
            if (static_cast<std::size_t>(target_labels[r]) < n_known)
                known_t_rows.push_back(r);
            else
                unknown_t_rows.push_back(r);
        }
        // Rows labeled unknown beyond the pseudo block cannot occur: ground
        // truth labels are known-class by precondition.
    }
    if (active.align) {
        align_val = alignment_loss(repr_s, batches.source_y, repr_t, target_labels, n_known,
                                   with_gradients ? &g_align_s : nullptr,
                                   with_gradients ? &g_align_t : nullptr);
    }
    if (active.segregate) {
        const Matrix known_reprs = Matrix::vcat(repr_s, gather_rows(repr_t, known_t_rows));
        const Matrix unknown_reprs = gather_rows(repr_t, unknown_t_rows);
        seg_val = segregation_loss(known_reprs, unknown_reprs,
                                   with_gradients ? &g_seg_known : nullptr,
                                   with_gradients ? &g_seg_unknown : nullptr);
    }
    if (active.osd) {
        osd_val = open_set_risk(logits_t, logits_s, lambda, unk,
                                with_gradients ? &g_osd_t : nullptr,
                                with_gradients ? &g_osd_s : nullptr);
    }

    const LossBreakdown breakdown = combine_losses(cls, align_val, seg_val, osd_val, active);

    if (with_gradients) {
        // Logit-level upstream gradients.
        Matrix d_logits_s = g_cls_s;
        Matrix d_logits_t(logits_t.rows(), logits_t.cols());
        add_rows_into(d_logits_t, 0, g_cls_tl);
        if (active.osd) {
            add_rows_into(d_logits_t, 0, g_osd_t);
            add_rows_into(d_logits_s, 0, g_osd_s);
        }

        // Representation-level gradients from the classifier plus the
        // centroid terms (segregation enters the total with a minus sign).
        Matrix d_repr_s = backward(classifier, tr_hs, d_logits_s);
        Matrix d_repr_t = backward(classifier, tr_ht, d_logits_t);
        if (active.align) {
            add_rows_into(d_repr_s, 0, g_align_s);
            add_rows_into(d_repr_t, 0, g_align_t);
        }
        if (active.segregate) {
            const std::size_t n_s = repr_s.rows();
            for (std::size_t i = 0; i < n_s; ++i) {
                auto d = d_repr_s.row(i);
                auto g = g_seg_known.row(i);
                for (std::size_t c = 0; c < d.size(); ++c) d[c] -= g[c];
            }
            for (std::size_t i = 0; i < known_t_rows.size(); ++i) {
                auto d = d_repr_t.row(known_t_rows[i]);
                auto g = g_seg_known.row(n_s + i);
                for (std::size_t c = 0; c < d.size(); ++c) d[c] -= g[c];
            }
            for (std::size_t i = 0; i < unknown_t_rows.size(); ++i) {
                auto d = d_repr_t.row(unknown_t_rows[i]);
                auto g = g_seg_unknown.row(i);
                for (std::size_t c = 0; c < d.size(); ++c) d[c] -= g[c];
            }
        }
        backward(f_source, tr_fs, d_repr_s);
        backward(f_target, tr_ft, d_repr_t);
    }
    return breakdown;
}

TrainedModel train_rl_osheda(const FeatureDataset& source, const FeatureDataset& target_labeled,
                             const FeatureDataset& target_unlabeled, const TrainConfig& cfg,
                             const EpochObserver& observer) {
    cfg.validate();
    require_labeled(source, "source dataset");
    require_labeled(target_labeled, "labeled target dataset");
    if (target_unlabeled.size() == 0)
        throw InvalidInputError("unlabeled target dataset is empty");
    if (target_labeled.dim() != target_unlabeled.dim())
        throw ShapeError("labeled/unlabeled target feature dimensions differ");

    TrainedModel model;
    model.method = Method::rl_osheda;
    model.config = cfg;
    model.config.method = Method::rl_osheda;
    model.label_space.n_known = derive_n_known(source, &target_labeled);

    model.f_source = build_representation_mapping(source.dim(), cfg.repr_dim);
    model.f_target = build_representation_mapping(target_labeled.dim(), cfg.repr_dim);
    model.classifier = build_classifier(cfg.repr_dim, model.label_space.n_total());
    Rng init_rng(derive_seed(cfg.seed, kInitStream));
    initialize_params(*model.f_source, init_rng);
    initialize_params(model.f_target, init_rng);
    initialize_params(model.classifier, init_rng);

    ShuffledCycler src_cycler(source.size(), derive_seed(cfg.seed, kSourceStream));
    ShuffledCycler tl_cycler(target_labeled.size(), derive_seed(cfg.seed, kTargetLabeledStream));
    ShuffledCycler tu_cycler(target_unlabeled.size(),
                             derive_seed(cfg.seed, kTargetUnlabeledStream));

    const std::size_t steps = std::max({ceil_div(source.size(), cfg.batch_source),
                                        ceil_div(target_labeled.size(), cfg.batch_target_labeled),
                                        ceil_div(target_unlabeled.size(),
                                                 cfg.batch_target_unlabeled)});
    const std::size_t threshold = cfg.stage_threshold_or_default();

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const bool stage2 = !cfg.two_stage || epoch >= threshold;
        LossBreakdown acc;
        for (std::size_t step = 0; step < steps; ++step) {
            StepBatches b;
            const auto si = src_cycler.next(cfg.batch_source);
            const auto tli = tl_cycler.next(cfg.batch_target_labeled);
            const auto tui = tu_cycler.next(cfg.batch_target_unlabeled);
            b.source_x = gather_rows(source.features, si);
            b.source_y = gather_labels(*source.labels, si);
            b.target_labeled_x = gather_rows(target_labeled.features, tli);
            b.target_labeled_y = gather_labels(*target_labeled.labels, tli);
            b.target_unlabeled_x = gather_rows(target_unlabeled.features, tui);

            const LossBreakdown step_loss =
                rl_objective_step(*model.f_source, model.f_target, model.classifier, b,
                                  cfg.lambda, cfg.toggles, stage2, model.label_space, true);
            sgd_step(*model.f_source, cfg.learning_rate);
            sgd_step(model.f_target, cfg.learning_rate);
            sgd_step(model.classifier, cfg.learning_rate);
            accumulate_epoch(acc, step_loss);
        }
        const LossBreakdown epoch_mean = mean_epoch(acc, steps);
        check_epoch_finite(epoch_mean, epoch);
        model.loss_history.push_back(epoch_mean);
        if (observer) observer(epoch, model);
    }
    return model;
}

TrainedModel train_sl(const FeatureDataset& target_labeled, const TrainConfig& cfg) {
    cfg.validate();
    require_labeled(target_labeled, "labeled target dataset");

    TrainedModel model;
    model.method = Method::sl;
    model.config = cfg;
    model.config.method = Method::sl;
    model.label_space.n_known = derive_n_known(target_labeled, nullptr);

    model.f_target = build_representation_mapping(target_labeled.dim(), cfg.repr_dim);
    model.classifier = build_classifier(cfg.repr_dim, model.label_space.n_known);
    Rng init_rng(derive_seed(cfg.seed, kInitStream));
    initialize_params(model.f_target, init_rng);
    initialize_params(model.classifier, init_rng);

    ShuffledCycler tl_cycler(target_labeled.size(), derive_seed(cfg.seed, kTargetLabeledStream));
    const std::size_t steps = ceil_div(target_labeled.size(), cfg.batch_target_labeled);

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        LossBreakdown acc;
        for (std::size_t step = 0; step < steps; ++step) {
            const auto idx = tl_cycler.next(cfg.batch_target_labeled);
            const Matrix x = gather_rows(target_labeled.features, idx);
            const std::vector<int> y = gather_labels(*target_labeled.labels, idx);

            ForwardTrace tr_f, tr_h;
            const Matrix repr = forward(model.f_target, x, &tr_f);
            const Matrix logits = forward(model.classifier, repr, &tr_h);
            Matrix g_logits;
            const double ce = cross_entropy(logits, y, &g_logits);
            const Matrix d_repr = backward(model.classifier, tr_h, g_logits);
            backward(model.f_target, tr_f, d_repr);
            sgd_step(model.f_target, cfg.learning_rate);
            sgd_step(model.classifier, cfg.learning_rate);
            accumulate_epoch(acc, {ce, 0.0, 0.0, 0.0, ce});
        }
        const LossBreakdown epoch_mean = mean_epoch(acc, steps);
        check_epoch_finite(epoch_mean, epoch);
        model.loss_history.push_back(epoch_mean);
    }
    return model;
}

TrainedModel train_pl(const FeatureDataset& target_labeled,
                      const FeatureDataset& target_unlabeled, const TrainConfig& cfg) {
    cfg.validate();
    require_labeled(target_labeled, "labeled target dataset");
    if (target_unlabeled.size() > 0 && target_labeled.dim() != target_unlabeled.dim())
        throw ShapeError("labeled/unlabeled target feature dimensions differ");

    TrainedModel model;
    model.method = Method::pl;
    model.config = cfg;
    model.config.method = Method::pl;
    model.label_space.n_known = derive_n_known(target_labeled, nullptr);
    const int unk = model.label_space.unknown_index();

    model.f_target = build_representation_mapping(target_labeled.dim(), cfg.repr_dim);
    model.classifier = build_classifier(cfg.repr_dim, model.label_space.n_known);
    Rng init_rng(derive_seed(cfg.seed, kInitStream));
    initialize_params(model.f_target, init_rng);
    initialize_params(model.classifier, init_rng);

    ShuffledCycler tl_cycler(target_labeled.size(), derive_seed(cfg.seed, kTargetLabeledStream));
    ShuffledCycler tu_cycler(target_unlabeled.size(),
                             derive_seed(cfg.seed, kTargetUnlabeledStream));
    const std::size_t warmup_steps = ceil_div(target_labeled.size(), cfg.batch_target_labeled);
    const std::size_t mixed_steps =
        target_unlabeled.size() == 0
            ? warmup_steps
            : std::max(warmup_steps,
                       ceil_div(target_unlabeled.size(), cfg.batch_target_unlabeled));
    const std::size_t threshold = cfg.stage_threshold_or_default();

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const bool use_pseudo = epoch >= threshold && target_unlabeled.size() > 0;
        const std::size_t steps = use_pseudo ? mixed_steps : warmup_steps;
        LossBreakdown acc;
        for (std::size_t step = 0; step < steps; ++step) {
            const auto idx = tl_cycler.next(cfg.batch_target_labeled);
            const Matrix x = gather_rows(target_labeled.features, idx);
            const std::vector<int> y = gather_labels(*target_labeled.labels, idx);

            ForwardTrace tr_f, tr_h;
            const Matrix repr = forward(model.f_target, x, &tr_f);
            const Matrix logits = forward(model.classifier, repr, &tr_h);
            Matrix g_logits;
            double loss = cross_entropy(logits, y, &g_logits);
            Matrix d_repr = backward(model.classifier, tr_h, g_logits);
            backward(model.f_target, tr_f, d_repr);

            if (use_pseudo) {
                const auto uidx = tu_cycler.next(cfg.batch_target_unlabeled);
                const Matrix ux = gather_rows(target_unlabeled.features, uidx);
                ForwardTrace tr_uf, tr_uh;
                const Matrix urepr = forward(model.f_target, ux, &tr_uf);
                const Matrix ulogits = forward(model.classifier, urepr, &tr_uh);
                const PseudoLabels pl =
                    assign_pseudo_labels_known_only(ulogits, cfg.lambda, unk);
                std::vector<std::size_t> keep;
                for (std::size_t r = 0; r < pl.labels.size(); ++r)
                    if (pl.labels[r] != unk) keep.push_back(r);
                if (!keep.empty()) {
                    const Matrix klogits = gather_rows(ulogits, keep);
                    std::vector<int> klabels(keep.size());
                    for (std::size_t i = 0; i < keep.size(); ++i)
                        klabels[i] = pl.labels[keep[i]];
                    Matrix g_keep;
                    loss += cross_entropy(klogits, klabels, &g_keep);
                    Matrix g_ulogits(ulogits.rows(), ulogits.cols());
                    for (std::size_t i = 0; i < keep.size(); ++i) {
                        auto dst = g_ulogits.row(keep[i]);
                        auto src = g_keep.row(i);
                        std::copy(src.begin(), src.end(), dst.begin());
                    }
                    const Matrix d_urepr = backward(model.classifier, tr_uh, g_ulogits);
                    backward(model.f_target, tr_uf, d_urepr);
                }
            }
            sgd_step(model.f_target, cfg.learning_rate);
            sgd_step(model.classifier, cfg.learning_rate);
            accumulate_epoch(acc, {loss, 0.0, 0.0, 0.0, loss});
        }
        const LossBreakdown epoch_mean = mean_epoch(acc, steps);
        check_epoch_finite(epoch_mean, epoch);
        model.loss_history.push_back(epoch_mean);
    }
    return model;
}

Matrix model_logits(const TrainedModel& model, const Matrix& features, Domain domain) {
    if (domain == Domain::source) {
        if (!model.f_source)
            throw InvalidInputError("model has no source mapping");
        return forward(model.classifier, forward(*model.f_source, features));
    }
    const Matrix repr = forward(model.f_target, features);
    return forward(model.classifier, repr);
}

std::vector<int> model_predict(const TrainedModel& model, const Matrix& features,
                               Domain domain) {
    const Matrix logits = model_logits(model, features, domain);
    if (model.method == Method::rl_osheda) return predict_labels(logits);
    return assign_pseudo_labels_known_only(logits, model.config.lambda,
                                           model.label_space.unknown_index())
        .labels;
}

} // namespace osheda
