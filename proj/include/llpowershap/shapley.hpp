#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "llpowershap/booster.hpp"
#include "llpowershap/common.hpp"
#include "llpowershap/parallel.hpp"
#include "llpowershap/random.hpp"
#include "llpowershap/tabular.hpp"

namespace llps {

inline constexpr std::size_t kBackgroundCap = 1024;
inline constexpr std::size_t kDefaultExactCap = 12;
inline constexpr std::size_t kDefaultPermutations = 64;

// Rows used to simulate feature absence; at most kBackgroundCap of them.
struct BackgroundSet {
    std::vector<std::vector<double>> rows;
    std::uint64_t seed = 0;

    // First min(cap, n) rows of a seeded shuffle of the training partition.
    static BackgroundSet draw(const Dataset& train, std::size_t cap, std::uint64_t seed) {
        if (train.n_rows() == 0) throw DataError("background source has no rows");
        if (cap == 0 || cap > kBackgroundCap) cap = kBackgroundCap;
        rng::Engine e = rng::make_engine(rng::mix(seed, 0xBACC, train.n_rows()));
        std::vector<std::size_t> perm = rng::permutation(train.n_rows(), e);
        BackgroundSet out;
        out.seed = seed;
        std::size_t take = std::min(cap, train.n_rows());
        out.rows.resize(take);
        for (std::size_t i = 0; i < take; ++i) train.fill_row(perm[i], out.rows[i]);
        return out;
    }
};

enum class GameMode { kMargin, kNegLogLoss };

struct ShapleyConfig {
    std::size_t exact_cap = kDefaultExactCap;      // enumerate up to this many players
    std::size_t n_permutations = kDefaultPermutations;  // even, >= 2; sampled fallback
    std::uint64_t seed = 0;
    unsigned threads = 1;

    void validate() const {
        if (exact_cap < 1 || exact_cap > 20)
            throw DataError("exact_cap must be in [1, 20]");
        if (n_permutations < 2 || n_permutations % 2 != 0)
            throw DataError("n_permutations must be even and >= 2");
    }
};

struct AttributionMatrix {
    std::vector<std::vector<double>> values;  // n_rows x n_features
    GameMode mode = GameMode::kMargin;
    std::size_t background_rows = 0;
};

// One (foreground, background) cooperative game over a trained ensemble.
// value(S) routes the hybrid row (x on S, z elsewhere) through the retained
// trees; in neg-log-loss mode the margin is scored as -loss(margin, label).
struct Game {
    GameMode mode = GameMode::kMargin;
    const TreeEnsemble* model = nullptr;
    std::vector<double> x;
    std::vector<double> z;
    int label = 0;
};

namespace shapley_detail {

inline double game_value(GameMode mode, double margin, int label) {
    return mode == GameMode::kMargin ? margin : -logistic_loss(margin, label);
}

// Shapley subset weights w[s] = s! (d-1-s)! / d! for coalition size s.
inline std::vector<double> subset_weights(std::size_t d) {
    std::vector<double> fact(d + 1, 1.0);
    for (std::size_t i = 1; i <= d; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
    std::vector<double> w(d, 0.0);
    for (std::size_t s = 0; s < d; ++s) w[s] = fact[s] * fact[d - 1 - s] / fact[d];
    return w;
}

// Per-pair compressed evaluator. For a fixed (x, z) only the tree nodes where
// the two rows route differently can change the hybrid's path; everything
// else collapses. Players are exactly those divergent features, so all other
// features are dummies of this game by construction. Buffers are reused
// across pairs; one engine per worker thread.
class PairEngine {
public:
    explicit PairEngine(const TreeEnsemble& model)
        : model_(&model),
          local_of_feature_(model.n_features, -1),
          feature_stamp_(model.n_features, 0),
          constraint_(model.n_features, 0) {}

    void compile(const double* x, const double* z) {
        ++pair_id_;
        x_ = x;
        z_ = z;
        nodes_.clear();
        leaves_.clear();
        roots_.clear();
        players_.clear();
        incidence_.clear();
        const_margin_ = model_->base_score;
        for (std::size_t t = 0; t < model_->best_iteration; ++t) {
            const Tree& tree = model_->trees[t];
            current_tree_ = static_cast<std::int32_t>(roots_.size());
            std::int32_t ref = compress(tree, 0);
            if (ref < 0)
                const_margin_ += leaf_value(ref);
            else
                roots_.push_back(ref);
        }
        build_incidence_csr();
        side_.assign(players_.size(), 0);
        tree_value_.resize(roots_.size());
    }

    const std::vector<std::size_t>& players() const { return players_; }

    std::int32_t local_of(std::size_t feature) const {
        if (feature >= feature_stamp_.size()) return -1;
        return feature_stamp_[feature] == pair_id_ ? local_of_feature_[feature] : -1;
    }

    // Evaluation primitives: reset to the all-background coalition, then
    // toggle players in and out. The running margin is maintained
    // incrementally by rerouting only the trees that contain the player.
    void begin_eval() {
        std::fill(side_.begin(), side_.end(), 0);
        margin_ = const_margin_;
        for (std::size_t t = 0; t < roots_.size(); ++t) {
            tree_value_[t] = route(roots_[t]);
            margin_ += tree_value_[t];
        }
    }

    void toggle(std::int32_t local) {
        side_[static_cast<std::size_t>(local)] ^= 1;
        const std::int32_t* begin = incidence_trees_.data() + incidence_offsets_[local];
        const std::int32_t* end = incidence_trees_.data() + incidence_offsets_[local + 1];
        for (const std::int32_t* it = begin; it != end; ++it) {
            double nv = route(roots_[static_cast<std::size_t>(*it)]);
            margin_ += nv - tree_value_[static_cast<std::size_t>(*it)];
            tree_value_[static_cast<std::size_t>(*it)] = nv;
        }
    }

    double current_margin() const { return margin_; }

    // Exact Shapley values over the pair's players via full subset
    // enumeration in Gray-code order. Low Gray bits toggle most often, so
    // they go to the players that appear in the fewest trees.
    const std::vector<double>& exact_phi(GameMode mode, int label) {
        const std::size_t d = players_.size();
        phi_.assign(d, 0.0);
        if (d == 0) return phi_;

        local_of_bit_.resize(d);
        for (std::size_t j = 0; j < d; ++j) local_of_bit_[j] = static_cast<std::int32_t>(j);
        std::sort(local_of_bit_.begin(), local_of_bit_.end(),
                  [this](std::int32_t a, std::int32_t b) {
                      std::int32_t ia = incidence_offsets_[a + 1] - incidence_offsets_[a];
                      std::int32_t ib = incidence_offsets_[b + 1] - incidence_offsets_[b];
                      if (ia != ib) return ia < ib;
                      return a < b;
                  });

        subset_value_.resize(std::size_t{1} << d);
        begin_eval();
        subset_value_[0] = game_value(mode, margin_, label);
        for (std::uint32_t k = 1; k < (std::uint32_t{1} << d); ++k) {
            std::size_t bit = static_cast<std::size_t>(std::countr_zero(k));
            toggle(local_of_bit_[bit]);
            subset_value_[k ^ (k >> 1)] = game_value(mode, margin_, label);
        }

        // phi_b = sum over masks containing b of cw[|M|] v(M), minus the
        // mask-independent term C = sum over all masks of wz[|M|] v(M), with
        // cw[s] = w[s-1] + wz[s] and wz[s] = w[s] (0 at s = d).
        weights_.assign(d + 1, 0.0);
        {
            std::vector<double>& fact = weights_scratch_;
            fact.assign(d + 1, 1.0);
            for (std::size_t i = 1; i <= d; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
            auto w = [&](std::size_t s) { return fact[s] * fact[d - 1 - s] / fact[d]; };
            for (std::size_t s = 1; s <= d; ++s)
                weights_[s] = w(s - 1) + (s < d ? w(s) : 0.0);
        }
        double baseline = 0.0;  // C term
        {
            std::vector<double>& fact = weights_scratch_;
            auto w = [&](std::size_t s) { return fact[s] * fact[d - 1 - s] / fact[d]; };
            bit_phi_.assign(d, 0.0);
            for (std::uint32_t mask = 0; mask < (std::uint32_t{1} << d); ++mask) {
                std::size_t pc = static_cast<std::size_t>(std::popcount(mask));
                double val = subset_value_[mask];
                if (pc < d) baseline += w(pc) * val;
                double t = weights_[pc] * val;
                std::uint32_t bits = mask;
                while (bits) {
                    bit_phi_[static_cast<std::size_t>(std::countr_zero(bits))] += t;
                    bits &= bits - 1;
                }
            }
        }
        for (std::size_t b = 0; b < d; ++b)
            phi_[static_cast<std::size_t>(local_of_bit_[b])] = bit_phi_[b] - baseline;
        return phi_;
    }

    // Antithetic permutation sampling: each ordering is paired with its
    // reverse, and per-walk telescoping makes the sum of the returned vector
    // exactly value(full) - value(empty).
    const std::vector<double>& sampled_phi(GameMode mode, int label, std::size_t n_perms,
                                           rng::Engine& engine) {
        const std::size_t d = players_.size();
        phi_.assign(d, 0.0);
        if (d == 0) return phi_;
        perm_.resize(d);
        for (std::size_t i = 0; i < d; ++i) perm_[i] = static_cast<std::int32_t>(i);
        begin_eval();
        for (std::size_t rep = 0; rep < n_perms / 2; ++rep) {
            rng::shuffle(perm_, engine);
            double prev = game_value(mode, margin_, label);
            for (std::size_t i = 0; i < d; ++i) {
                toggle(perm_[i]);
                double cur = game_value(mode, margin_, label);
                phi_[static_cast<std::size_t>(perm_[i])] += cur - prev;
                prev = cur;
            }
            for (std::size_t i = 0; i < d; ++i) {
                toggle(perm_[i]);
                double cur = game_value(mode, margin_, label);
                phi_[static_cast<std::size_t>(perm_[i])] += prev - cur;
                prev = cur;
            }
        }
        double inv = 1.0 / static_cast<double>(n_perms);
        for (double& p : phi_) p *= inv;
        return phi_;
    }

private:
    double leaf_value(std::int32_t ref) const {
        return leaves_[static_cast<std::size_t>(-ref - 1)];
    }

    double route(std::int32_t ref) const {
        while (ref >= 0) {
            const CNode& nd = nodes_[static_cast<std::size_t>(ref)];
            ref = side_[static_cast<std::size_t>(nd.player)] ? nd.x_child : nd.z_child;
        }
        return leaf_value(ref);
    }

    struct CNode {
        std::int32_t player;
        std::int32_t x_child;
        std::int32_t z_child;
    };

    std::int32_t compress(const Tree& tree, std::int32_t node_idx) {
        const TreeNode& nd = tree.nodes[static_cast<std::size_t>(node_idx)];
        if (nd.is_leaf()) {
            leaves_.push_back(nd.leaf_value);
            return -static_cast<std::int32_t>(leaves_.size());
        }
        const std::size_t f = static_cast<std::size_t>(nd.split_feature);
        std::int32_t xc = x_[f] < nd.threshold ? nd.left : nd.right;
        std::int32_t zc = z_[f] < nd.threshold ? nd.left : nd.right;
        std::uint8_t st = constraint_[f];
        if (st == 1) return compress(tree, xc);
        if (st == 2) return compress(tree, zc);
        if (xc == zc) return compress(tree, xc);

        std::int32_t local;
        if (feature_stamp_[f] == pair_id_) {
            local = local_of_feature_[f];
        } else {
            local = static_cast<std::int32_t>(players_.size());
            players_.push_back(f);
            local_of_feature_[f] = local;
            feature_stamp_[f] = pair_id_;
        }
        incidence_.emplace_back(local, current_tree_);
        constraint_[f] = 1;
        std::int32_t a = compress(tree, xc);
        constraint_[f] = 2;
        std::int32_t b = compress(tree, zc);
        constraint_[f] = 0;
        nodes_.push_back(CNode{local, a, b});
        return static_cast<std::int32_t>(nodes_.size()) - 1;
    }

    void build_incidence_csr() {
        // (player, tree) pairs may repeat when a feature diverges at several
        // nodes of one tree; dedupe while building the CSR lists.
        std::sort(incidence_.begin(), incidence_.end());
        incidence_.erase(std::unique(incidence_.begin(), incidence_.end()), incidence_.end());
        incidence_offsets_.assign(players_.size() + 1, 0);
        for (const auto& [player, tree] : incidence_)
            incidence_offsets_[static_cast<std::size_t>(player) + 1]++;
        for (std::size_t j = 1; j < incidence_offsets_.size(); ++j)
            incidence_offsets_[j] += incidence_offsets_[j - 1];
        incidence_trees_.resize(incidence_.size());
        std::vector<std::int32_t> cursor(incidence_offsets_.begin(),
                                         incidence_offsets_.end() - 1);
        for (const auto& [player, tree] : incidence_)
            incidence_trees_[static_cast<std::size_t>(
                cursor[static_cast<std::size_t>(player)]++)] = tree;
    }

    const TreeEnsemble* model_;
    const double* x_ = nullptr;
    const double* z_ = nullptr;
    std::uint32_t pair_id_ = 0;
    std::int32_t current_tree_ = 0;

    std::vector<CNode> nodes_;
    std::vector<double> leaves_;
    std::vector<std::int32_t> roots_;
    std::vector<std::size_t> players_;
    std::vector<std::pair<std::int32_t, std::int32_t>> incidence_;
    std::vector<std::int32_t> incidence_offsets_;
    std::vector<std::int32_t> incidence_trees_;
    double const_margin_ = 0.0;

    std::vector<std::int32_t> local_of_feature_;
    std::vector<std::uint32_t> feature_stamp_;
    std::vector<std::uint8_t> constraint_;

    std::vector<std::uint8_t> side_;
    std::vector<double> tree_value_;
    double margin_ = 0.0;
    std::vector<double> subset_value_;
    std::vector<double> phi_;
    std::vector<double> bit_phi_;
    std::vector<double> weights_;
    std::vector<double> weights_scratch_;
    std::vector<std::int32_t> local_of_bit_;
    std::vector<std::int32_t> perm_;
};

inline void check_pair_schema(const TreeEnsemble& model, const std::vector<double>& x,
                              const std::vector<double>& z) {
    if (x.size() != model.n_features || z.size() != model.n_features)
        throw DataError("row width does not match model feature count");
}

}  // namespace shapley_detail

// Features at which x and z route to different children somewhere on a
// reachable path of a retained tree. Every other feature is provably a dummy
// player of the (x, z) game.
inline std::vector<std::size_t> divergent_features(const TreeEnsemble& model,
                                                   const std::vector<double>& x,
                                                   const std::vector<double>& z) {
    shapley_detail::check_pair_schema(model, x, z);
    shapley_detail::PairEngine engine(model);
    engine.compile(x.data(), z.data());
    std::vector<std::size_t> out = engine.players();
    std::sort(out.begin(), out.end());
    return out;
}

// Exact Shapley values of the game restricted to `players` (full 2^|players|
// enumeration). Non-players receive 0. |players| is capped.
inline std::vector<double> shapley_exact(const Game& game, const std::vector<std::size_t>& players,
                                         std::size_t exact_cap = kDefaultExactCap) {
    if (game.model == nullptr) throw DataError("game has no model");
    shapley_detail::check_pair_schema(*game.model, game.x, game.z);
    if (exact_cap < 1 || exact_cap > 20) throw DataError("exact_cap must be in [1, 20]");
    if (players.size() > exact_cap)
        throw DataError("player count " + std::to_string(players.size()) +
                        " exceeds exact enumeration cap " + std::to_string(exact_cap));
    for (std::size_t g : players)
        if (g >= game.model->n_features) throw DataError("player index out of range");
    {
        std::vector<std::size_t> dedup = players;
        std::sort(dedup.begin(), dedup.end());
        if (std::adjacent_find(dedup.begin(), dedup.end()) != dedup.end())
            throw DataError("duplicate player index");
    }
    shapley_detail::PairEngine engine(*game.model);
    engine.compile(game.x.data(), game.z.data());
    const std::size_t d = players.size();
    std::vector<double> out(game.model->n_features, 0.0);
    if (d == 0) return out;

    std::vector<std::int32_t> mapped(d);
    for (std::size_t i = 0; i < d; ++i)
        mapped[i] = engine.local_of(players[i]);

    std::vector<double> values(std::size_t{1} << d);
    engine.begin_eval();
    values[0] = shapley_detail::game_value(game.mode, engine.current_margin(), game.label);
    for (std::uint32_t k = 1; k < (std::uint32_t{1} << d); ++k) {
        std::size_t bit = static_cast<std::size_t>(std::countr_zero(k));
        if (mapped[bit] >= 0) engine.toggle(mapped[bit]);
        values[k ^ (k >> 1)] =
            shapley_detail::game_value(game.mode, engine.current_margin(), game.label);
    }
    std::vector<double> w = shapley_detail::subset_weights(d);
    std::vector<double> phi(d, 0.0);
    for (std::uint32_t mask = 0; mask < (std::uint32_t{1} << d); ++mask) {
        int pc = std::popcount(mask);
        double val = values[mask];
        for (std::size_t j = 0; j < d; ++j) {
            if (mask & (std::uint32_t{1} << j))
                phi[j] += w[static_cast<std::size_t>(pc - 1)] * val;
            else
                phi[j] -= w[static_cast<std::size_t>(pc)] * val;
        }
    }
    for (std::size_t i = 0; i < d; ++i) out[players[i]] = phi[i];
    return out;
}

// Seeded antithetic permutation sampling over the given player set. The
// returned vector sums exactly to value(full) - value(empty); dummy players
// come out exactly 0.
inline std::vector<double> shapley_sampled(const Game& game,
                                           const std::vector<std::size_t>& players,
                                           std::size_t n_permutations, std::uint64_t seed) {
    if (game.model == nullptr) throw DataError("game has no model");
    shapley_detail::check_pair_schema(*game.model, game.x, game.z);
    if (n_permutations < 2 || n_permutations % 2 != 0)
        throw DataError("n_permutations must be even and >= 2");
    for (std::size_t g : players)
        if (g >= game.model->n_features) throw DataError("player index out of range");
    shapley_detail::PairEngine engine(*game.model);
    engine.compile(game.x.data(), game.z.data());
    const std::size_t d = players.size();
    std::vector<double> out(game.model->n_features, 0.0);
    if (d == 0) return out;

    std::vector<std::int32_t> mapped(d);
    for (std::size_t i = 0; i < d; ++i) mapped[i] = engine.local_of(players[i]);

    std::vector<std::size_t> perm(d);
    for (std::size_t i = 0; i < d; ++i) perm[i] = i;
    std::vector<double> phi(d, 0.0);
    rng::Engine e = rng::make_engine(rng::mix(seed, 0x5A3D, d));
    engine.begin_eval();
    for (std::size_t rep = 0; rep < n_permutations / 2; ++rep) {
        rng::shuffle(perm, e);
        double prev = shapley_detail::game_value(game.mode, engine.current_margin(), game.label);
        for (std::size_t i = 0; i < d; ++i) {
            if (mapped[perm[i]] >= 0) engine.toggle(mapped[perm[i]]);
            double cur =
                shapley_detail::game_value(game.mode, engine.current_margin(), game.label);
            phi[perm[i]] += cur - prev;
            prev = cur;
        }
        for (std::size_t i = 0; i < d; ++i) {
            if (mapped[perm[i]] >= 0) engine.toggle(mapped[perm[i]]);
            double cur =
                shapley_detail::game_value(game.mode, engine.current_margin(), game.label);
            phi[perm[i]] += prev - cur;
            prev = cur;
        }
    }
    for (std::size_t i = 0; i < d; ++i) out[players[i]] = phi[i] / static_cast<double>(n_permutations);
    return out;
}

namespace shapley_detail {

inline AttributionMatrix compute_attributions(const TreeEnsemble& model,
                                              const std::vector<std::vector<double>>& rows,
                                              const std::vector<int>* labels,
                                              const BackgroundSet& background,
                                              const ShapleyConfig& config, GameMode mode) {
    config.validate();
    if (background.rows.empty()) throw DataError("background set is empty");
    for (const auto& z : background.rows)
        if (z.size() != model.n_features)
            throw DataError("background row width does not match model feature count");
    for (const auto& x : rows)
        if (x.size() != model.n_features)
            throw DataError("foreground row width does not match model feature count");
    if (mode == GameMode::kNegLogLoss) {
        if (labels == nullptr || labels->size() != rows.size())
            throw DataError("neg-log-loss attribution requires one label per row");
        for (int y : *labels)
            if (y != 0 && y != 1) throw DataError("labels must be 0 or 1");
    }

    AttributionMatrix out;
    out.mode = mode;
    out.background_rows = background.rows.size();
    out.values.assign(rows.size(), std::vector<double>(model.n_features, 0.0));
    const double inv_b = 1.0 / static_cast<double>(background.rows.size());

    parallel_ranges(rows.size(), resolve_threads(config.threads),
                    [&](std::size_t begin, std::size_t end) {
        PairEngine engine(model);
        std::vector<double> accum(model.n_features);
        for (std::size_t i = begin; i < end; ++i) {
            std::fill(accum.begin(), accum.end(), 0.0);
            int label = labels ? (*labels)[i] : 0;
            for (std::size_t b = 0; b < background.rows.size(); ++b) {
                engine.compile(rows[i].data(), background.rows[b].data());
                const std::size_t d = engine.players().size();
                if (d == 0) continue;
                const std::vector<double>* phi;
                if (d <= config.exact_cap) {
                    phi = &engine.exact_phi(mode, label);
                } else {
                    rng::Engine e = rng::make_engine(rng::mix(config.seed, i, b));
                    phi = &engine.sampled_phi(mode, label, config.n_permutations, e);
                }
                const auto& players = engine.players();
                for (std::size_t j = 0; j < d; ++j) accum[players[j]] += (*phi)[j];
            }
            for (std::size_t f = 0; f < model.n_features; ++f)
                out.values[i][f] = accum[f] * inv_b;
        }
    });
    return out;
}

}  // namespace shapley_detail

// Margin-output attributions, averaged over the background rows. Exact
// enumeration per pair when the divergent player count fits the cap,
// antithetic sampling otherwise.
inline AttributionMatrix margin_attributions(const TreeEnsemble& model,
                                             const std::vector<std::vector<double>>& rows,
                                             const BackgroundSet& background,
                                             const ShapleyConfig& config = {}) {
    return shapley_detail::compute_attributions(model, rows, nullptr, background, config,
                                                GameMode::kMargin);
}

inline AttributionMatrix margin_attributions(const TreeEnsemble& model, const Dataset& data,
                                             const BackgroundSet& background,
                                             const ShapleyConfig& config = {}) {
    return margin_attributions(model, data.row_matrix(), background, config);
}

// Negated logistic-loss attributions: positive values mean the feature
// reduces the loss. The negation is applied inside the engine.
inline AttributionMatrix loss_attributions(const TreeEnsemble& model,
                                           const std::vector<std::vector<double>>& rows,
                                           const std::vector<int>& labels,
                                           const BackgroundSet& background,
                                           const ShapleyConfig& config = {}) {
    return shapley_detail::compute_attributions(model, rows, &labels, background, config,
                                                GameMode::kNegLogLoss);
}

inline AttributionMatrix loss_attributions(const TreeEnsemble& model, const Dataset& data,
                                           const BackgroundSet& background,
                                           const ShapleyConfig& config = {}) {
    return loss_attributions(model, data.row_matrix(), data.labels, background, config);
}

}  // namespace llps
