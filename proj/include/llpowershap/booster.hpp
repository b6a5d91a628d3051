#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "json.hpp"
#include "llpowershap/common.hpp"
#include "llpowershap/tabular.hpp"

namespace llps {

struct BoosterConfig {
    int n_estimators = 250;
    int early_stopping_rounds = 25;
    double learning_rate = 0.3;
    int max_depth = 6;
    double l2_regularization = 1.0;
    double min_child_weight = 1.0;

    void validate() const {
        if (n_estimators < 1) throw DataError("n_estimators must be >= 1");
        if (early_stopping_rounds < 1) throw DataError("early_stopping_rounds must be >= 1");
        if (!(learning_rate > 0.0)) throw DataError("learning_rate must be positive");
        if (max_depth < 1) throw DataError("max_depth must be >= 1");
        if (!(l2_regularization > 0.0)) throw DataError("l2_regularization must be positive");
        if (!(min_child_weight > 0.0)) throw DataError("min_child_weight must be positive");
    }
};

// Internal nodes route left when value < threshold; leaves carry a margin
// contribution. left < 0 marks a leaf.
struct TreeNode {
    std::int32_t split_feature = -1;
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double leaf_value = 0.0;
    bool is_leaf() const { return left < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double predict(const double* row) const {
        std::int32_t cur = 0;
        while (!nodes[cur].is_leaf()) {
            const TreeNode& nd = nodes[static_cast<std::size_t>(cur)];
            cur = row[nd.split_feature] < nd.threshold ? nd.left : nd.right;
        }
        return nodes[static_cast<std::size_t>(cur)].leaf_value;
    }
};

struct TreeEnsemble {
    std::vector<Tree> trees;
    double base_score = 0.0;
    std::size_t n_features = 0;
    std::size_t best_iteration = 0;  // prediction uses trees[0..best_iteration)
    BoosterConfig config;

    double predict_row(const double* row) const {
        double margin = base_score;
        for (std::size_t t = 0; t < best_iteration; ++t) margin += trees[t].predict(row);
        return margin;
    }
};

// -[y log sigma(m) + (1-y) log(1 - sigma(m))], evaluated as a softplus so
// extreme margins neither overflow nor produce NaN.
inline double logistic_loss(double margin, int label) {
    double x = label == 1 ? -margin : margin;
    if (x > 0.0) return x + std::log1p(std::exp(-x));
    return std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

inline std::vector<double> predict_margin(const TreeEnsemble& model,
                                          const std::vector<std::vector<double>>& rows) {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) {
        if (r.size() != model.n_features)
            throw DataError("prediction row has " + std::to_string(r.size()) +
                            " columns, model expects " + std::to_string(model.n_features));
        out.push_back(model.predict_row(r.data()));
    }
    return out;
}

inline std::vector<double> predict_margin(const TreeEnsemble& model, const Dataset& data) {
    if (data.n_cols() != model.n_features)
        throw DataError("dataset has " + std::to_string(data.n_cols()) +
                        " columns, model expects " + std::to_string(model.n_features));
    std::vector<double> out(data.n_rows());
    std::vector<double> row;
    for (std::size_t i = 0; i < data.n_rows(); ++i) {
        data.fill_row(i, row);
        out[i] = model.predict_row(row.data());
    }
    return out;
}

namespace detail {

struct NodeStats {
    double grad_sum = 0.0;
    double hess_sum = 0.0;
};

struct SplitChoice {
    double gain = 0.0;
    std::int32_t feature = -1;
    double threshold = 0.0;
    NodeStats left;
};

inline double leaf_objective(double g, double h, double lambda) {
    return g * g / (h + lambda);
}

}  // namespace detail

// Second-order boosting on logistic loss with exact greedy splits over sorted
// unique values. Stops when validation log-loss fails to improve for
// early_stopping_rounds consecutive rounds; best_iteration keeps the best
// round. Ties on gain break toward the lowest feature index, then the lowest
// threshold, so training is reproducible. The seed is accepted for interface
// stability; no subsampling consumes randomness.
inline TreeEnsemble train(const Dataset& train_data, const Dataset& validation,
                          const BoosterConfig& config, std::uint64_t seed) {
    (void)seed;
    config.validate();
    if (train_data.names != validation.names)
        throw DataError("train/validation column schemas differ");
    const std::size_t n = train_data.n_rows();
    const std::size_t m = train_data.n_cols();
    if (n == 0) throw DataError("empty training data");
    std::size_t pos = static_cast<std::size_t>(
        std::count(train_data.labels.begin(), train_data.labels.end(), 1));
    if (pos == 0 || pos == n) throw DataError("single-class training labels");

    TreeEnsemble model;
    model.n_features = m;
    model.config = config;
    double prior = static_cast<double>(pos) / static_cast<double>(n);
    model.base_score = std::log(prior / (1.0 - prior));

    // One global sort per feature; node membership buckets rows per level.
    std::vector<std::vector<std::uint32_t>> sorted(m);
    for (std::size_t f = 0; f < m; ++f) {
        sorted[f].resize(n);
        for (std::size_t i = 0; i < n; ++i) sorted[f][i] = static_cast<std::uint32_t>(i);
        const std::vector<double>& col = train_data.columns[f];
        std::sort(sorted[f].begin(), sorted[f].end(),
                  [&col](std::uint32_t a, std::uint32_t b) {
                      if (col[a] != col[b]) return col[a] < col[b];
                      return a < b;
                  });
    }

    std::vector<double> margin(n, model.base_score);
    std::vector<double> val_margin(validation.n_rows(), model.base_score);
    std::vector<double> grad(n), hess(n);
    std::vector<std::int32_t> node_of_row(n);
    const double lambda = config.l2_regularization;
    const double mcw = config.min_child_weight;

    double best_val_loss = std::numeric_limits<double>::infinity();
    std::size_t best_round = 0;

    std::vector<double> row_buf;
    for (int round = 0; round < config.n_estimators; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            double p = sigmoid(margin[i]);
            grad[i] = p - static_cast<double>(train_data.labels[i]);
            hess[i] = p * (1.0 - p);
        }

        Tree tree;
        tree.nodes.push_back(TreeNode{});
        std::fill(node_of_row.begin(), node_of_row.end(), 0);

        detail::NodeStats root_stats;
        for (std::size_t i = 0; i < n; ++i) {
            root_stats.grad_sum += grad[i];
            root_stats.hess_sum += hess[i];
        }
        std::vector<std::int32_t> active = {0};
        std::vector<detail::NodeStats> active_stats = {root_stats};

        for (int depth = 0; depth < config.max_depth && !active.empty(); ++depth) {
            const std::size_t n_active = active.size();
            std::vector<std::int32_t> slot_of_node(tree.nodes.size(), -1);
            for (std::size_t s = 0; s < n_active; ++s)
                slot_of_node[static_cast<std::size_t>(active[s])] = static_cast<std::int32_t>(s);

            std::vector<detail::SplitChoice> best(n_active);
            std::vector<detail::NodeStats> run(n_active);
            std::vector<double> last_value(n_active);
            std::vector<std::uint8_t> seen(n_active);

            for (std::size_t f = 0; f < m; ++f) {
                const std::vector<double>& col = train_data.columns[f];
                for (std::size_t s = 0; s < n_active; ++s) {
                    run[s] = detail::NodeStats{};
                    seen[s] = 0;
                }
                for (std::uint32_t r : sorted[f]) {
                    std::int32_t nd = node_of_row[r];
                    std::int32_t s32 = slot_of_node[static_cast<std::size_t>(nd)];
                    if (s32 < 0) continue;
                    std::size_t s = static_cast<std::size_t>(s32);
                    double v = col[r];
                    if (seen[s] && v > last_value[s]) {
                        const detail::NodeStats& tot = active_stats[s];
                        double gl = run[s].grad_sum, hl = run[s].hess_sum;
                        double gr = tot.grad_sum - gl, hr = tot.hess_sum - hl;
                        if (hl >= mcw && hr >= mcw) {
                            double gain = 0.5 * (detail::leaf_objective(gl, hl, lambda) +
                                                 detail::leaf_objective(gr, hr, lambda) -
                                                 detail::leaf_objective(tot.grad_sum,
                                                                        tot.hess_sum, lambda));
                            if (gain > best[s].gain) {
                                best[s].gain = gain;
                                best[s].feature = static_cast<std::int32_t>(f);
                                best[s].threshold = 0.5 * (last_value[s] + v);
                                best[s].left = run[s];
                            }
                        }
                    }
                    run[s].grad_sum += grad[r];
                    run[s].hess_sum += hess[r];
                    last_value[s] = v;
                    seen[s] = 1;
                }
            }

            std::vector<std::int32_t> next_active;
            std::vector<detail::NodeStats> next_stats;
            for (std::size_t s = 0; s < n_active; ++s) {
                std::int32_t nd = active[s];
                TreeNode& node = tree.nodes[static_cast<std::size_t>(nd)];
                if (best[s].feature >= 0 && best[s].gain > 0.0) {
                    node.split_feature = best[s].feature;
                    node.threshold = best[s].threshold;
                    node.left = static_cast<std::int32_t>(tree.nodes.size());
                    node.right = node.left + 1;
                    tree.nodes.push_back(TreeNode{});
                    tree.nodes.push_back(TreeNode{});
                    next_active.push_back(node.left);
                    next_stats.push_back(best[s].left);
                    detail::NodeStats right_stats;
                    right_stats.grad_sum = active_stats[s].grad_sum - best[s].left.grad_sum;
                    right_stats.hess_sum = active_stats[s].hess_sum - best[s].left.hess_sum;
                    next_active.push_back(node.right);
                    next_stats.push_back(right_stats);
                } else {
                    node.leaf_value = -config.learning_rate * active_stats[s].grad_sum /
                                      (active_stats[s].hess_sum + lambda);
                }
            }
            for (std::size_t i = 0; i < n; ++i) {
                std::int32_t nd = node_of_row[i];
                const TreeNode& node = tree.nodes[static_cast<std::size_t>(nd)];
                if (!node.is_leaf())
                    node_of_row[i] = train_data.columns[static_cast<std::size_t>(
                                         node.split_feature)][i] < node.threshold
                                         ? node.left
                                         : node.right;
            }
            active = std::move(next_active);
            active_stats = std::move(next_stats);
        }
        // Depth cap reached: finalize whatever is still open.
        for (std::size_t s = 0; s < active.size(); ++s) {
            TreeNode& node = tree.nodes[static_cast<std::size_t>(active[s])];
            node.leaf_value = -config.learning_rate * active_stats[s].grad_sum /
                              (active_stats[s].hess_sum + lambda);
        }

        for (std::size_t i = 0; i < n; ++i)
            margin[i] += tree.nodes[static_cast<std::size_t>(node_of_row[i])].leaf_value;
        for (std::size_t i = 0; i < validation.n_rows(); ++i) {
            validation.fill_row(i, row_buf);
            val_margin[i] += tree.predict(row_buf.data());
        }
        model.trees.push_back(std::move(tree));

        double val_loss = 0.0;
        for (std::size_t i = 0; i < validation.n_rows(); ++i)
            val_loss += logistic_loss(val_margin[i], validation.labels[i]);
        val_loss /= std::max<std::size_t>(1, validation.n_rows());
        std::size_t this_round = static_cast<std::size_t>(round) + 1;
        if (val_loss < best_val_loss) {
            best_val_loss = val_loss;
            best_round = this_round;
        }
        if (this_round - best_round >= static_cast<std::size_t>(config.early_stopping_rounds))
            break;
    }
    model.best_iteration = best_round;
    return model;
}

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json model_to_json(const TreeEnsemble& model) {
    nlohmann::json j;
    j["format"] = "llpowershap.model";
    j["version"] = kModelFormatVersion;
    j["base_score"] = model.base_score;
    j["n_features"] = model.n_features;
    j["best_iteration"] = model.best_iteration;
    j["config"] = {{"n_estimators", model.config.n_estimators},
                   {"early_stopping_rounds", model.config.early_stopping_rounds},
                   {"learning_rate", model.config.learning_rate},
                   {"max_depth", model.config.max_depth},
                   {"l2_regularization", model.config.l2_regularization},
                   {"min_child_weight", model.config.min_child_weight}};
    nlohmann::json trees = nlohmann::json::array();
    for (const Tree& t : model.trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const TreeNode& nd : t.nodes) {
            if (nd.is_leaf())
                nodes.push_back({{"v", nd.leaf_value}});
            else
                nodes.push_back(
                    {{"f", nd.split_feature}, {"t", nd.threshold}, {"l", nd.left}, {"r", nd.right}});
        }
        trees.push_back({{"nodes", nodes}});
    }
    j["trees"] = std::move(trees);
    return j;
}

inline TreeEnsemble model_from_json(const nlohmann::json& j) {
    try {
        if (!j.contains("format") || j.at("format") != "llpowershap.model")
            throw DataError("not a model file");
        if (j.at("version").get<int>() != kModelFormatVersion)
            throw DataError("unsupported model version " + j.at("version").dump());
        TreeEnsemble model;
        model.base_score = j.at("base_score").get<double>();
        model.n_features = j.at("n_features").get<std::size_t>();
        model.best_iteration = j.at("best_iteration").get<std::size_t>();
        const auto& cfg = j.at("config");
        model.config.n_estimators = cfg.at("n_estimators").get<int>();
        model.config.early_stopping_rounds = cfg.at("early_stopping_rounds").get<int>();
        model.config.learning_rate = cfg.at("learning_rate").get<double>();
        model.config.max_depth = cfg.at("max_depth").get<int>();
        model.config.l2_regularization = cfg.at("l2_regularization").get<double>();
        model.config.min_child_weight = cfg.at("min_child_weight").get<double>();
        for (const auto& jt : j.at("trees")) {
            Tree t;
            for (const auto& jn : jt.at("nodes")) {
                TreeNode nd;
                if (jn.contains("v")) {
                    nd.leaf_value = jn.at("v").get<double>();
                } else {
                    nd.split_feature = jn.at("f").get<std::int32_t>();
                    nd.threshold = jn.at("t").get<double>();
                    nd.left = jn.at("l").get<std::int32_t>();
                    nd.right = jn.at("r").get<std::int32_t>();
                }
                t.nodes.push_back(nd);
            }
            if (t.nodes.empty()) throw DataError("tree with no nodes");
            t.nodes.shrink_to_fit();
            model.trees.push_back(std::move(t));
        }
        if (model.best_iteration > model.trees.size())
            throw DataError("best_iteration exceeds tree count");
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
}

inline void save_model(const TreeEnsemble& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model file: " + path);
    out << model_to_json(model).dump(2) << '\n';
    if (!out) throw DataError("failed writing model file: " + path);
}

inline TreeEnsemble load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
    return model_from_json(j);
}

}  // namespace llps
