#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "lcva/errors.hpp"
#include "lcva/estimators.hpp"
#include "lcva/model.hpp"

namespace lcva {

inline constexpr int kCheckpointFormatVersion = 1;

using OrderedJson = nlohmann::ordered_json;

inline OrderedJson lcva_config_to_json(const LcvaConfig& c) {
    return OrderedJson{{"feature_dim", c.feature_dim},
                       {"latent_dim", c.latent_dim},
                       {"hidden_dim", c.hidden_dim},
                       {"hidden_layers", c.hidden_layers},
                       {"learning_rate", c.learning_rate},
                       {"epochs", c.epochs},
                       {"batch_size", c.batch_size},
                       {"mc_samples", c.mc_samples},
                       {"seed", c.seed},
                       {"spillover_enabled", c.spillover_enabled}};
}

template <typename Json>
LcvaConfig lcva_config_from_json(const Json& j) {
    LcvaConfig c;
    c.feature_dim = j.at("feature_dim").template get<std::size_t>();
    c.latent_dim = j.at("latent_dim").template get<std::size_t>();
    c.hidden_dim = j.at("hidden_dim").template get<std::size_t>();
    c.hidden_layers = j.at("hidden_layers").template get<std::size_t>();
    c.learning_rate = j.at("learning_rate").template get<double>();
    c.epochs = j.at("epochs").template get<std::size_t>();
    c.batch_size = j.at("batch_size").template get<std::size_t>();
    c.mc_samples = j.at("mc_samples").template get<std::size_t>();
    c.seed = j.at("seed").template get<std::uint64_t>();
    c.spillover_enabled = j.at("spillover_enabled").template get<bool>();
    c.validate();
    return c;
}

namespace detail {

inline OrderedJson mlp_to_json(const MlpNet& net) {
    OrderedJson layers = OrderedJson::array();
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        layers.push_back(OrderedJson{{"w", net.weights[l].data()}, {"b", net.biases[l]}});
    }
    return OrderedJson{{"dims", net.layer_dims}, {"layers", layers}};
}

template <typename Json>
MlpNet mlp_from_json(const Json& j) {
    MlpNet net = make_mlp(j.at("dims").template get<std::vector<std::size_t>>());
    const auto& layers = j.at("layers");
    if (layers.size() != net.layer_count()) {
        throw ModelError("checkpoint: layer count mismatch");
    }
    for (std::size_t l = 0; l < net.layer_count(); ++l) {
        Vec w = layers[l].at("w").template get<Vec>();
        Vec b = layers[l].at("b").template get<Vec>();
        if (w.size() != net.weights[l].size() || b.size() != net.biases[l].size()) {
            throw ModelError("checkpoint: layer " + std::to_string(l) + " shape mismatch");
        }
        net.weights[l].data() = std::move(w);
        net.biases[l] = std::move(b);
    }
    return net;
}

inline OrderedJson linear_to_json(const LinearModel& m) {
    return OrderedJson{{"coefficients", m.coefficients},
                       {"intercept", m.intercept},
                       {"layout", m.layout},
                       {"ridge_used", m.ridge_used}};
}

template <typename Json>
LinearModel linear_from_json(const Json& j) {
    LinearModel m;
    m.coefficients = j.at("coefficients").template get<Vec>();
    m.intercept = j.at("intercept").template get<double>();
    m.layout = j.at("layout").template get<std::string>();
    m.ridge_used = j.at("ridge_used").template get<bool>();
    return m;
}

inline OrderedJson forest_to_json(const RegressionForest& f) {
    OrderedJson trees = OrderedJson::array();
    for (const auto& tree : f.trees) {
        OrderedJson t{{"split_feature", OrderedJson::array()},
                      {"threshold", OrderedJson::array()},
                      {"left", OrderedJson::array()},
                      {"right", OrderedJson::array()},
                      {"leaf_value", OrderedJson::array()}};
        for (const auto& node : tree) {
            t["split_feature"].push_back(node.split_feature);
            t["threshold"].push_back(node.threshold);
            t["left"].push_back(node.left);
            t["right"].push_back(node.right);
            t["leaf_value"].push_back(node.leaf_value);
        }
        trees.push_back(std::move(t));
    }
    return OrderedJson{{"config",
                        OrderedJson{{"tree_count", f.config.tree_count},
                                    {"max_depth", f.config.max_depth},
                                    {"min_leaf_size", f.config.min_leaf_size},
                                    {"seed", f.config.seed}}},
                       {"input_dim", f.input_dim},
                       {"trees", trees}};
}

template <typename Json>
RegressionForest forest_from_json(const Json& j) {
    RegressionForest f;
    const auto& c = j.at("config");
    f.config.tree_count = c.at("tree_count").template get<std::size_t>();
    f.config.max_depth = c.at("max_depth").template get<std::size_t>();
    f.config.min_leaf_size = c.at("min_leaf_size").template get<std::size_t>();
    f.config.seed = c.at("seed").template get<std::uint64_t>();
    f.input_dim = j.at("input_dim").template get<std::size_t>();
    for (const auto& t : j.at("trees")) {
        Tree tree;
        const auto& sf = t.at("split_feature");
        for (std::size_t i = 0; i < sf.size(); ++i) {
            TreeNode node;
            node.split_feature = t.at("split_feature")[i].template get<int>();
            node.threshold = t.at("threshold")[i].template get<double>();
            node.left = t.at("left")[i].template get<std::size_t>();
            node.right = t.at("right")[i].template get<std::size_t>();
            node.leaf_value = t.at("leaf_value")[i].template get<double>();
            tree.push_back(node);
        }
        f.trees.push_back(std::move(tree));
    }
    return f;
}

}  // namespace detail

// Versioned JSON checkpoint; flat parameter arrays keyed by network/layer.
// Loading then saving reproduces the file byte-for-byte (fixed key order,
// shortest round-trip number formatting).
inline OrderedJson checkpoint_to_json(const TrainedEstimator& est) {
    OrderedJson j{{"format_version", kCheckpointFormatVersion},
                  {"estimator", estimator_id(est.kind)}};
    if (const auto* vae = std::get_if<VaeModel>(&est.model)) {
        j["config"] = lcva_config_to_json(vae->config);
        j["params"] = OrderedJson{{"encoder_shared", detail::mlp_to_json(vae->params.encoder_shared)},
                                  {"encoder_head_t0", detail::mlp_to_json(vae->params.encoder_head_t0)},
                                  {"encoder_head_t1", detail::mlp_to_json(vae->params.encoder_head_t1)},
                                  {"aux_t_net", detail::mlp_to_json(vae->params.aux_t_net)},
                                  {"aux_y_net", detail::mlp_to_json(vae->params.aux_y_net)},
                                  {"dec_x_net", detail::mlp_to_json(vae->params.dec_x_net)},
                                  {"dec_t_net", detail::mlp_to_json(vae->params.dec_t_net)},
                                  {"dec_y_head_t1", detail::mlp_to_json(vae->params.dec_y_head_t1)},
                                  {"dec_y_head_t0", detail::mlp_to_json(vae->params.dec_y_head_t0)},
                                  {"sigma_y_raw", vae->params.sigma_y_raw}};
        j["trace"] = vae->trace;
    } else if (const auto* lm = std::get_if<LinearModel>(&est.model)) {
        j["params"] = detail::linear_to_json(*lm);
    } else if (const auto* two = std::get_if<Ols2Model>(&est.model)) {
        j["params"] = OrderedJson{{"f1", detail::linear_to_json(two->f1)},
                                  {"f0", detail::linear_to_json(two->f0)}};
    } else {
        j["params"] = detail::forest_to_json(std::get<RegressionForest>(est.model));
    }
    return j;
}

template <typename Json>
TrainedEstimator checkpoint_from_json(const Json& j) {
    const int version = j.at("format_version").template get<int>();
    if (version != kCheckpointFormatVersion) {
        throw ModelError("checkpoint: unsupported format_version " + std::to_string(version));
    }
    TrainedEstimator est;
    est.kind = parse_estimator(j.at("estimator").template get<std::string>());
    const auto& params = j.at("params");
    switch (est.kind) {
        case EstimatorKind::Lcva:
        case EstimatorKind::Cevae: {
            VaeModel vae;
            vae.config = lcva_config_from_json(j.at("config"));
            vae.params.encoder_shared = detail::mlp_from_json(params.at("encoder_shared"));
            vae.params.encoder_head_t0 = detail::mlp_from_json(params.at("encoder_head_t0"));
            vae.params.encoder_head_t1 = detail::mlp_from_json(params.at("encoder_head_t1"));
            vae.params.aux_t_net = detail::mlp_from_json(params.at("aux_t_net"));
            vae.params.aux_y_net = detail::mlp_from_json(params.at("aux_y_net"));
            vae.params.dec_x_net = detail::mlp_from_json(params.at("dec_x_net"));
            vae.params.dec_t_net = detail::mlp_from_json(params.at("dec_t_net"));
            vae.params.dec_y_head_t1 = detail::mlp_from_json(params.at("dec_y_head_t1"));
            vae.params.dec_y_head_t0 = detail::mlp_from_json(params.at("dec_y_head_t0"));
            vae.params.sigma_y_raw = params.at("sigma_y_raw").template get<double>();
            if (j.contains("trace")) vae.trace = j.at("trace").template get<std::vector<double>>();
            if (!params_finite(vae.params)) {
                throw ModelError("checkpoint: non-finite model parameters");
            }
            est.model = std::move(vae);
            break;
        }
        case EstimatorKind::Ols1:
            est.model = detail::linear_from_json(params);
            break;
        case EstimatorKind::Ols2:
            est.model = Ols2Model{detail::linear_from_json(params.at("f1")),
                                  detail::linear_from_json(params.at("f0"))};
            break;
        case EstimatorKind::Forest:
            est.model = detail::forest_from_json(params);
            break;
    }
    return est;
}

inline void save_checkpoint(const std::string& path, const TrainedEstimator& est) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint: " + path);
    out << checkpoint_to_json(est).dump(2) << "\n";
    if (!out) throw IoError("write failed: " + path);
}

inline TrainedEstimator load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    OrderedJson j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ParseError("checkpoint " + path + ": " + e.what());
    }
    try {
        return checkpoint_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw ModelError("checkpoint " + path + ": " + e.what());
    }
}

}  // namespace lcva
