#include "osheda/model_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "osheda/errors.hpp"

namespace osheda {

namespace {

using nlohmann::json;

constexpr int kFormatVersion = 1;

const char* kind_name(LayerKind k) {
    switch (k) {
    case LayerKind::affine: return "affine";
    case LayerKind::leaky_relu: return "leaky_relu";
    case LayerKind::l2_normalize: return "l2_normalize";
    }
    return "?";
}

LayerKind kind_from_name(const std::string& s) {
    if (s == "affine") return LayerKind::affine;
    if (s == "leaky_relu") return LayerKind::leaky_relu;
    if (s == "l2_normalize") return LayerKind::l2_normalize;
    throw ConfigError("unknown layer kind '" + s + "'");
}

json network_to_json(const Network& net) {
    json layers = json::array();
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        const auto& spec = net.layers[i];
        json l;
        l["kind"] = kind_name(spec.kind);
        l["in_dim"] = spec.in_dim;
        l["out_dim"] = spec.out_dim;
        if (spec.kind == LayerKind::leaky_relu) l["slope"] = spec.slope;
        if (spec.kind == LayerKind::affine) {
            l["weight"] = net.params[i].weight.data();
            l["bias"] = net.params[i].bias;
        }
        layers.push_back(std::move(l));
    }
    return json{{"layers", std::move(layers)}};
}

Network network_from_json(const json& j) {
    Network net;
    for (const auto& l : j.at("layers")) {
        LayerSpec spec;
        spec.kind = kind_from_name(l.at("kind").get<std::string>());
        spec.in_dim = l.at("in_dim").get<std::size_t>();
        spec.out_dim = l.at("out_dim").get<std::size_t>();
        if (l.contains("slope")) spec.slope = l.at("slope").get<double>();
        net.layers.push_back(spec);
    }
    allocate_params(net);
    for (std::size_t i = 0; i < net.layers.size(); ++i) {
        if (net.layers[i].kind != LayerKind::affine) continue;
        const auto& l = j.at("layers").at(i);
        auto w = l.at("weight").get<std::vector<double>>();
        if (w.size() != net.params[i].weight.data().size())
            throw ConfigError("model file: weight size mismatch");
        net.params[i].weight.data() = std::move(w);
        auto b = l.at("bias").get<std::vector<double>>();
        if (b.size() != net.params[i].bias.size())
            throw ConfigError("model file: bias size mismatch");
        net.params[i].bias = std::move(b);
    }
    return net;
}

json config_to_json(const TrainConfig& cfg) {
    json j;
    j["lambda"] = cfg.lambda;
    j["stage_threshold"] = cfg.stage_threshold;
    j["epochs"] = cfg.epochs;
    j["batch_source"] = cfg.batch_source;
    j["batch_target_labeled"] = cfg.batch_target_labeled;
    j["batch_target_unlabeled"] = cfg.batch_target_unlabeled;
    j["learning_rate"] = cfg.learning_rate;
    j["repr_dim"] = cfg.repr_dim;
    j["align"] = cfg.toggles.align;
    j["segregate"] = cfg.toggles.segregate;
    j["osd"] = cfg.toggles.osd;
    j["two_stage"] = cfg.two_stage;
    j["method"] = method_name(cfg.method);
    j["seed"] = cfg.seed;
    return j;
}

TrainConfig config_from_json(const json& j) {
    TrainConfig cfg;
    cfg.lambda = j.at("lambda").get<double>();
    cfg.stage_threshold = j.at("stage_threshold").get<std::size_t>();
    cfg.epochs = j.at("epochs").get<std::size_t>();
    cfg.batch_source = j.at("batch_source").get<std::size_t>();
    cfg.batch_target_labeled = j.at("batch_target_labeled").get<std::size_t>();
    cfg.batch_target_unlabeled = j.at("batch_target_unlabeled").get<std::size_t>();
    cfg.learning_rate = j.at("learning_rate").get<double>();
    cfg.repr_dim = j.at("repr_dim").get<std::size_t>();
    cfg.toggles.align = j.at("align").get<bool>();
    cfg.toggles.segregate = j.at("segregate").get<bool>();
    cfg.toggles.osd = j.at("osd").get<bool>();
    cfg.two_stage = j.at("two_stage").get<bool>();
    cfg.method = method_from_name(j.at("method").get<std::string>());
    cfg.seed = j.at("seed").get<std::uint64_t>();
    return cfg;
}

json breakdown_to_json(const LossBreakdown& b) {
    return json{{"classification", b.classification},
                {"alignment", b.alignment},
                {"segregation", b.segregation},
                {"open_set", b.open_set},
                {"total", b.total}};
}

} // namespace

std::string model_to_json(const TrainedModel& model, const std::string& manifest_hash) {
    json j;
    j["format_version"] = kFormatVersion;
    j["method"] = method_name(model.method);
    j["n_known"] = model.label_space.n_known;
    j["config"] = config_to_json(model.config);
    if (model.f_source) j["f_source"] = network_to_json(*model.f_source);
    j["f_target"] = network_to_json(model.f_target);
    j["classifier"] = network_to_json(model.classifier);
    json hist = json::array();
    for (const auto& b : model.loss_history) hist.push_back(breakdown_to_json(b));
    j["loss_history"] = std::move(hist);
    if (!manifest_hash.empty()) j["manifest_hash"] = manifest_hash;
    return j.dump(2);
}

TrainedModel model_from_json(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("model file is not valid JSON: ") + e.what(), 0);
    }
    if (j.at("format_version").get<int>() != kFormatVersion)
        throw ConfigError("unsupported model format version");
    TrainedModel model;
    model.method = method_from_name(j.at("method").get<std::string>());
    model.label_space.n_known = j.at("n_known").get<std::size_t>();
    model.config = config_from_json(j.at("config"));
    if (j.contains("f_source")) model.f_source = network_from_json(j.at("f_source"));
    model.f_target = network_from_json(j.at("f_target"));
    model.classifier = network_from_json(j.at("classifier"));
    for (const auto& b : j.at("loss_history")) {
        LossBreakdown lb;
        lb.classification = b.at("classification").get<double>();
        lb.alignment = b.at("alignment").get<double>();
        lb.segregation = b.at("segregation").get<double>();
        lb.open_set = b.at("open_set").get<double>();
        lb.total = b.at("total").get<double>();
        model.loss_history.push_back(lb);
    }
    return model;
}

void save_model(const TrainedModel& model, const std::string& path,
                const std::string& manifest_hash) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidInputError("cannot write '" + path + "'");
    out << model_to_json(model, manifest_hash) << '\n';
}

TrainedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidInputError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return model_from_json(ss.str());
}

std::string loss_history_to_json(const std::vector<LossBreakdown>& history,
                                 const std::string& manifest_hash) {
    json j;
    json hist = json::array();
    for (const auto& b : history) hist.push_back(breakdown_to_json(b));
    j["epochs"] = std::move(hist);
    if (!manifest_hash.empty()) j["manifest_hash"] = manifest_hash;
    return j.dump(2);
}

} // namespace osheda
