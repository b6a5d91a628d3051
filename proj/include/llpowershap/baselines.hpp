#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "llpowershap/booster.hpp"
#include "llpowershap/common.hpp"
#include "llpowershap/random.hpp"
#include "llpowershap/stats.hpp"
#include "llpowershap/tabular.hpp"

namespace llps::baselines {

struct ScoredFeatures {
    std::vector<double> scores;
    std::vector<double> p_values;
    std::vector<std::size_t> selected;
    std::string method;
};

// Chi-square filter over class-wise column sums. Columns with negative
// entries are shifted by |min| first; the statistic has 1 degree of freedom.
inline ScoredFeatures chi2_filter(const Dataset& data, double alpha) {
    const std::size_t n = data.n_rows();
    const std::size_t m = data.n_cols();
    if (n == 0) throw DataError("chi2_filter requires data rows");
    double n1 = static_cast<double>(std::count(data.labels.begin(), data.labels.end(), 1));
    double prior1 = n1 / static_cast<double>(n);
    double prior0 = 1.0 - prior1;
    ScoredFeatures out;
    out.method = "chi2";
    out.scores.resize(m);
    out.p_values.resize(m);
    for (std::size_t f = 0; f < m; ++f) {
        const std::vector<double>& col = data.columns[f];
        double mn = *std::min_element(col.begin(), col.end());
        double shift = mn < 0.0 ? -mn : 0.0;
        double sum0 = 0.0, sum1 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (data.labels[i] == 1)
                sum1 += col[i] + shift;
            else
                sum0 += col[i] + shift;
        }
        double total = sum0 + sum1;
        if (total <= 0.0) {
            out.scores[f] = 0.0;
            out.p_values[f] = 1.0;
            continue;
        }
        double e0 = total * prior0, e1 = total * prior1;
        double stat = 0.0;
        if (e0 > 0.0) stat += (sum0 - e0) * (sum0 - e0) / e0;
        if (e1 > 0.0) stat += (sum1 - e1) * (sum1 - e1) / e1;
        out.scores[f] = stat;
        out.p_values[f] = stats::chi2_sf_1df(stat);
    }
    for (std::size_t f = 0; f < m; ++f)
        if (out.p_values[f] < alpha) out.selected.push_back(f);
    return out;
}

// Univariate regression F statistic per feature, (1, n-2) degrees of freedom.
// Zero-variance features get p = 1.
inline ScoredFeatures f_test_filter(const Dataset& data, double alpha) {
    const std::size_t n = data.n_rows();
    const std::size_t m = data.n_cols();
    if (n <= 2) throw DataError("f_test_filter requires more than 2 rows");
    double mean_y = 0.0;
    for (int y : data.labels) mean_y += y;
    mean_y /= static_cast<double>(n);
    double ss_y = 0.0;
    for (int y : data.labels) ss_y += (y - mean_y) * (y - mean_y);
    ScoredFeatures out;
    out.method = "f_test";
    out.scores.resize(m);
    out.p_values.resize(m);
    for (std::size_t f = 0; f < m; ++f) {
        const std::vector<double>& col = data.columns[f];
        double mean_x = 0.0;
        for (double v : col) mean_x += v;
        mean_x /= static_cast<double>(n);
        double ss_x = 0.0, ss_xy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double dx = col[i] - mean_x;
            ss_x += dx * dx;
            ss_xy += dx * (data.labels[i] - mean_y);
        }
        if (ss_x <= 0.0 || ss_y <= 0.0) {
            out.scores[f] = 0.0;
            out.p_values[f] = 1.0;
            continue;
        }
        double r2 = (ss_xy * ss_xy) / (ss_x * ss_y);
        r2 = std::min(r2, 1.0);
        double df2 = static_cast<double>(n - 2);
        double stat = r2 >= 1.0 ? std::numeric_limits<double>::infinity()
                                : r2 / (1.0 - r2) * df2;
        out.scores[f] = stat;
        out.p_values[f] = stats::f_sf(stat, 1.0, df2);
    }
    for (std::size_t f = 0; f < m; ++f)
        if (out.p_values[f] < alpha) out.selected.push_back(f);
    return out;
}

struct TopPercentResult {
    bool applicable = false;  // the heuristic only applies beyond 100 features
    std::vector<std::size_t> selected;
};

// Keeps the ceil(percent/100 * m) highest-importance features, provided there
// are more than 100 to choose from. Ties at the cut go to the lower index.
inline TopPercentResult top_percent_rank(const std::vector<double>& importances,
                                         double percent = 3.0) {
    if (importances.empty()) throw DataError("top_percent_rank requires at least one feature");
    TopPercentResult out;
    const std::size_t m = importances.size();
    if (m <= 100) return out;
    out.applicable = true;
    std::size_t k = static_cast<std::size_t>(
        std::ceil(percent / 100.0 * static_cast<double>(m)));
    k = std::min(std::max<std::size_t>(k, 1), m);
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&importances](std::size_t a, std::size_t b) {
        if (importances[a] != importances[b]) return importances[a] > importances[b];
        return a < b;
    });
    out.selected.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
    std::sort(out.selected.begin(), out.selected.end());
    return out;
}

// Rank-based AUROC with midrank tie handling; equals the normalized
// Mann-Whitney U statistic.
inline double auroc(const std::vector<double>& scores, const std::vector<int>& labels) {
    if (scores.size() != labels.size()) throw DataError("auroc: scores/labels length mismatch");
    const std::size_t n = scores.size();
    double n_pos = 0.0;
    for (int y : labels) {
        if (y != 0 && y != 1) throw DataError("auroc: labels must be 0 or 1");
        n_pos += y;
    }
    double n_neg = static_cast<double>(n) - n_pos;
    if (n_pos == 0.0 || n_neg == 0.0) throw DataError("auroc requires both classes present");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
        return scores[a] < scores[b];
    });
    double rank_sum_pos = 0.0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j < n && scores[order[j]] == scores[order[i]]) ++j;
        double midrank = 0.5 * static_cast<double>(i + 1 + j);  // average of ranks i+1..j
        for (std::size_t k = i; k < j; ++k)
            if (labels[order[k]] == 1) rank_sum_pos += midrank;
        i = j;
    }
    return (rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

struct CvResult {
    double mean = 0.0;
    double sd = 0.0;
    std::vector<double> fold_scores;
};

namespace detail {

// Stratified fold ids: per class, seeded shuffle dealt round-robin.
inline std::vector<std::size_t> fold_assignment(const std::vector<int>& labels,
                                                std::size_t folds, std::uint64_t seed) {
    std::vector<std::size_t> fold_of(labels.size());
    rng::Engine e = rng::make_engine(rng::mix(seed, 0xF01D, folds));
    std::vector<std::size_t> perm = rng::permutation(labels.size(), e);
    std::size_t next[2] = {0, 0};
    for (std::size_t i : perm) {
        std::size_t c = static_cast<std::size_t>(labels[i]);
        fold_of[i] = next[c] % folds;
        ++next[c];
    }
    return fold_of;
}

}  // namespace detail

// Stratified k-fold evaluation of the columns in `selected`: trains the
// booster on the remaining folds (with a 90:10 early-stopping carve-out) and
// scores held-out AUROC per fold.
inline CvResult kfold_evaluate(const Dataset& data, const std::vector<std::size_t>& selected,
                               std::size_t folds, const BoosterConfig& config,
                               std::uint64_t seed) {
    if (folds < 2) throw DataError("kfold_evaluate requires folds >= 2");
    if (selected.empty()) throw DataError("kfold_evaluate requires a non-empty selection");
    for (std::size_t c : selected)
        if (c >= data.n_cols()) throw DataError("selected column index out of range");
    Dataset reduced = data.subset_columns(selected);
    std::vector<std::size_t> fold_of = detail::fold_assignment(reduced.labels, folds, seed);
    CvResult out;
    for (std::size_t k = 0; k < folds; ++k) {
        std::vector<std::size_t> train_idx, test_idx;
        for (std::size_t i = 0; i < reduced.n_rows(); ++i)
            (fold_of[i] == k ? test_idx : train_idx).push_back(i);
        if (train_idx.empty() || test_idx.empty())
            throw DataError("fold " + std::to_string(k) + " is empty; reduce fold count");
        Dataset fold_train = reduced.subset_rows(train_idx);
        Dataset fold_test = reduced.subset_rows(test_idx);
        auto [fit, val] = holdout_split(fold_train, 0.9, rng::mix(seed, k, 0x1D));
        TreeEnsemble model = train(fit, val, config, rng::mix(seed, k, 0x2D));
        std::vector<double> margins = predict_margin(model, fold_test);
        out.fold_scores.push_back(auroc(margins, fold_test.labels));
    }
    double sum = 0.0;
    for (double s : out.fold_scores) sum += s;
    out.mean = sum / static_cast<double>(out.fold_scores.size());
    double ss = 0.0;
    for (double s : out.fold_scores) ss += (s - out.mean) * (s - out.mean);
    out.sd = out.fold_scores.size() > 1
                 ? std::sqrt(ss / static_cast<double>(out.fold_scores.size() - 1))
                 : 0.0;
    return out;
}

}  // namespace llps::baselines
