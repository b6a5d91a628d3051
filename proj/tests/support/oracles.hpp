// Test-side oracles, independent of the attribution engine internals: random
// direct-built ensembles, hybrid-row game evaluation through the public
// prediction API, and full 2^m Shapley enumeration over all features.
#pragma once

#include <bit>
#include <cstdint>
#include <vector>

#include "llpowershap/booster.hpp"
#include "llpowershap/random.hpp"
#include "llpowershap/shapley.hpp"

namespace llps::testing {

struct TreeBuilder {
    rng::Engine& e;
    std::size_t m;
    const std::vector<std::size_t>* allowed;  // restrict split features; null = all
    Tree& t;

    std::int32_t build(int depth, int max_depth) {
        bool leaf = depth >= max_depth || (depth > 0 && rng::uniform01(e) < 0.3);
        std::int32_t idx = static_cast<std::int32_t>(t.nodes.size());
        t.nodes.push_back(TreeNode{});
        if (leaf) {
            t.nodes[static_cast<std::size_t>(idx)].leaf_value = 2.0 * rng::uniform01(e) - 1.0;
            return idx;
        }
        std::size_t f = allowed ? (*allowed)[rng::bounded(e, allowed->size())]
                                : static_cast<std::size_t>(rng::bounded(e, m));
        double thr = 2.0 * rng::uniform01(e) - 1.0;
        std::int32_t l = build(depth + 1, max_depth);
        std::int32_t r = build(depth + 1, max_depth);
        TreeNode& nd = t.nodes[static_cast<std::size_t>(idx)];
        nd.split_feature = static_cast<std::int32_t>(f);
        nd.threshold = thr;
        nd.left = l;
        nd.right = r;
        return idx;
    }
};

inline TreeEnsemble random_ensemble(std::uint64_t seed, std::size_t m, std::size_t n_trees,
                                    int max_depth,
                                    const std::vector<std::size_t>* allowed = nullptr) {
    rng::Engine e = rng::make_engine(seed);
    TreeEnsemble model;
    model.n_features = m;
    model.base_score = 2.0 * rng::uniform01(e) - 1.0;
    for (std::size_t i = 0; i < n_trees; ++i) {
        Tree t;
        TreeBuilder{e, m, allowed, t}.build(0, max_depth);
        model.trees.push_back(std::move(t));
    }
    model.best_iteration = model.trees.size();
    return model;
}

inline std::vector<double> random_row(rng::Engine& e, std::size_t m) {
    std::vector<double> r(m);
    for (double& v : r) v = 2.0 * rng::uniform01(e) - 1.0;
    return r;
}

inline double hybrid_value(const TreeEnsemble& model, const std::vector<double>& x,
                           const std::vector<double>& z, std::uint32_t mask, GameMode mode,
                           int label) {
    std::vector<double> hybrid(model.n_features);
    for (std::size_t j = 0; j < model.n_features; ++j)
        hybrid[j] = (mask >> j) & 1 ? x[j] : z[j];
    double margin = model.predict_row(hybrid.data());
    return mode == GameMode::kMargin ? margin : -logistic_loss(margin, label);
}

// Full 2^m enumeration over every feature (not just divergent ones).
inline std::vector<double> brute_force_shapley(const TreeEnsemble& model,
                                               const std::vector<double>& x,
                                               const std::vector<double>& z, GameMode mode,
                                               int label) {
    const std::size_t m = model.n_features;
    std::vector<double> v(std::size_t{1} << m);
    for (std::uint32_t mask = 0; mask < (std::uint32_t{1} << m); ++mask)
        v[mask] = hybrid_value(model, x, z, mask, mode, label);
    std::vector<double> fact(m + 1, 1.0);
    for (std::size_t i = 1; i <= m; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
    std::vector<double> phi(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        for (std::uint32_t mask = 0; mask < (std::uint32_t{1} << m); ++mask) {
            if ((mask >> j) & 1) continue;
            std::size_t s = static_cast<std::size_t>(std::popcount(mask));
            double w = fact[s] * fact[m - 1 - s] / fact[m];
            phi[j] += w * (v[mask | (std::uint32_t{1} << j)] - v[mask]);
        }
    }
    return phi;
}

// Average of per-background brute-force attributions.
inline std::vector<double> brute_force_mean(const TreeEnsemble& model,
                                            const std::vector<double>& x,
                                            const std::vector<std::vector<double>>& background,
                                            GameMode mode, int label) {
    std::vector<double> mean(model.n_features, 0.0);
    for (const auto& z : background) {
        std::vector<double> phi = brute_force_shapley(model, x, z, mode, label);
        for (std::size_t j = 0; j < mean.size(); ++j) mean[j] += phi[j];
    }
    for (double& v : mean) v /= static_cast<double>(background.size());
    return mean;
}

}  // namespace llps::testing
