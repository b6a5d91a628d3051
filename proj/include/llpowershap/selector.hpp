#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "llpowershap/booster.hpp"
#include "llpowershap/common.hpp"
#include "llpowershap/parallel.hpp"
#include "llpowershap/shapley.hpp"
#include "llpowershap/stats.hpp"
#include "llpowershap/tabular.hpp"

namespace llps {

inline constexpr double kDefaultAlpha = 0.01;
inline constexpr double kDefaultPower = 0.99;
inline constexpr std::size_t kInitialIterations = 20;
inline constexpr std::size_t kExtensionStep = 10;
inline constexpr std::size_t kMaxExtensionRounds = 3;

struct SelectorConfig {
    BoosterConfig booster;
    std::size_t background_cap = kBackgroundCap;
    std::size_t exact_cap = kDefaultExactCap;
    std::size_t n_permutations = kDefaultPermutations;
    unsigned threads = 1;  // iteration-level parallelism
};

// Per-iteration mean attributions: one row per iteration, one column per
// feature including the five appended noise probes.
struct IterationTable {
    std::vector<std::vector<double>> values;
    std::vector<std::string> names;
    std::size_t n_original = 0;
    std::vector<std::uint64_t> iteration_seeds;

    std::size_t iterations() const { return values.size(); }
    std::size_t n_total() const { return names.size(); }

    std::vector<double> feature_column(std::size_t j) const {
        std::vector<double> col(values.size());
        for (std::size_t i = 0; i < values.size(); ++i) col[i] = values[i][j];
        return col;
    }
};

// Per iteration, the strongest of the five probes: the null sample the
// feature columns are tested against.
inline std::vector<double> max_noise_vector(const IterationTable& table) {
    std::vector<double> out(table.iterations());
    for (std::size_t i = 0; i < table.iterations(); ++i) {
        double mx = table.values[i][table.n_original];
        for (std::size_t k = 1; k < NoiseSpec::kCount; ++k)
            mx = std::max(mx, table.values[i][table.n_original + k]);
        out[i] = mx;
    }
    return out;
}

struct FeatureReport {
    std::string name;
    double p_value = 1.0;
    std::size_t required_iterations = 0;
    double mean_attribution = 0.0;
};

struct SelectionReport {
    std::vector<FeatureReport> features;  // original features, column order
    std::vector<std::string> selected;    // ascending p-value
    double alpha = kDefaultAlpha;
    double power_target = kDefaultPower;
    std::size_t iterations_run = 0;
    std::uint64_t base_seed = 0;
    std::vector<std::uint64_t> iteration_seeds;
    bool automatic = false;
    std::size_t extension_rounds = 0;
    double wall_time_seconds = 0.0;
};

namespace selector_detail {

// One full iteration: inject probes, resplit, retrain, attribute the loss on
// the held-out partition, reduce to per-feature means.
inline std::vector<double> run_iteration(const Dataset& data, std::uint64_t iteration_seed,
                                         const SelectorConfig& config) {
    Dataset noisy = inject_noise(data, NoiseSpec{iteration_seed}, iteration_seed);
    SplitTriple parts = split(noisy, iteration_seed);
    TreeEnsemble model = train(parts.train, parts.validation, config.booster, iteration_seed);
    BackgroundSet background =
        BackgroundSet::draw(parts.train, config.background_cap, iteration_seed);
    ShapleyConfig shap;
    shap.exact_cap = config.exact_cap;
    shap.n_permutations = config.n_permutations;
    shap.seed = iteration_seed;
    shap.threads = 1;
    AttributionMatrix attr = loss_attributions(model, parts.test, background, shap);
    std::vector<double> means(noisy.n_cols(), 0.0);
    for (const auto& row : attr.values)
        for (std::size_t f = 0; f < means.size(); ++f) means[f] += row[f];
    double inv = 1.0 / static_cast<double>(std::max<std::size_t>(1, attr.values.size()));
    for (double& v : means) v *= inv;
    return means;
}

struct FeatureAnalysis {
    double p_value;
    std::size_t required_iterations;
};

// Mann-Whitney p-value plus the power-solved iteration requirement for one
// feature column against the max-noise sample. Levene at level alpha decides
// pooled versus Glass's-delta standardization; a zero-spread noise vector
// falls back to the feature's own deviation, and a fully degenerate pair is
// pinned at the cap.
inline FeatureAnalysis analyze_feature(const std::vector<double>& feature,
                                       const std::vector<double>& noise, double alpha,
                                       double power) {
    FeatureAnalysis out;
    out.p_value = stats::mann_whitney_u_greater(feature, noise).p_value;
    double var_f = stats::detail::variance_of(feature);
    double var_n = stats::detail::variance_of(noise);
    if (var_f <= 0.0 && var_n <= 0.0) {
        out.required_iterations = stats::kRequiredIterationsCap;
        return out;
    }
    double levene_p = stats::levene_test(feature, noise).p_value;
    double denom;
    if (levene_p < alpha) {
        double sd_n = std::sqrt(var_n);
        denom = sd_n > 0.0 ? sd_n : std::sqrt(var_f);
    } else {
        denom = std::sqrt(0.5 * (var_f + var_n));
    }
    if (!(denom > 0.0)) {
        out.required_iterations = stats::kRequiredIterationsCap;
        return out;
    }
    double effect = (stats::detail::mean_of(feature) - stats::detail::mean_of(noise)) / denom;
    out.required_iterations = stats::solve_required_iterations(effect, alpha, power);
    return out;
}

}  // namespace selector_detail

// Runs `iterations` independent rounds; iteration i always derives its seed
// as base_seed + i, so later extensions are prefix-stable. Iterations may run
// concurrently; the table is identical regardless of execution order.
inline IterationTable explain(const Dataset& data, std::size_t iterations,
                              const SelectorConfig& config, std::uint64_t base_seed) {
    if (iterations < 1) throw DataError("explain requires at least one iteration");
    for (std::uint8_t f : data.noise_flags)
        if (f) throw DataError("dataset already contains injected noise columns");
    IterationTable table;
    table.n_original = data.n_cols();
    table.names = data.names;
    for (const char* nm : NoiseSpec::distribution_names()) {
        std::string unique = nm;
        while (std::find(table.names.begin(), table.names.end(), unique) != table.names.end())
            unique += "_";
        table.names.push_back(unique);
    }
    table.values.assign(iterations, {});
    table.iteration_seeds.resize(iterations);
    for (std::size_t i = 0; i < iterations; ++i)
        table.iteration_seeds[i] = base_seed + static_cast<std::uint64_t>(i) + 1;
    parallel_ranges(iterations, resolve_threads(config.threads),
                    [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            table.values[i] = selector_detail::run_iteration(data, table.iteration_seeds[i], config);
    });
    return table;
}

// Appends `extra` iterations, continuing the same seed stream. Existing rows
// are untouched.
inline void explain_extend(IterationTable& table, const Dataset& data, std::size_t extra,
                           const SelectorConfig& config, std::uint64_t base_seed) {
    const std::size_t old_n = table.iterations();
    table.values.resize(old_n + extra);
    table.iteration_seeds.resize(old_n + extra);
    for (std::size_t i = old_n; i < old_n + extra; ++i)
        table.iteration_seeds[i] = base_seed + static_cast<std::uint64_t>(i) + 1;
    parallel_ranges(extra, resolve_threads(config.threads),
                    [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            std::size_t i = old_n + k;
            table.values[i] = selector_detail::run_iteration(data, table.iteration_seeds[i], config);
        }
    });
}

// P-values against the per-iteration max-noise sample; selection keeps
// features with p < alpha. Noise probes are never candidates.
inline SelectionReport core(const IterationTable& table, double alpha,
                            double power = kDefaultPower) {
    if (table.iterations() < 2) throw DataError("core requires at least 2 iterations");
    if (!(alpha > 0.0 && alpha < 1.0)) throw DataError("alpha must be in (0, 1)");
    std::vector<double> noise = max_noise_vector(table);
    SelectionReport report;
    report.alpha = alpha;
    report.power_target = power;
    report.iterations_run = table.iterations();
    report.iteration_seeds = table.iteration_seeds;
    report.features.resize(table.n_original);
    for (std::size_t j = 0; j < table.n_original; ++j) {
        std::vector<double> col = table.feature_column(j);
        selector_detail::FeatureAnalysis fa =
            selector_detail::analyze_feature(col, noise, alpha, power);
        FeatureReport& fr = report.features[j];
        fr.name = table.names[j];
        fr.p_value = fa.p_value;
        fr.required_iterations = fa.required_iterations;
        double s = 0.0;
        for (double v : col) s += v;
        fr.mean_attribution = s / static_cast<double>(col.size());
    }
    std::vector<std::size_t> order;
    for (std::size_t j = 0; j < report.features.size(); ++j)
        if (report.features[j].p_value < alpha) order.push_back(j);
    std::sort(order.begin(), order.end(), [&report](std::size_t a, std::size_t b) {
        if (report.features[a].p_value != report.features[b].p_value)
            return report.features[a].p_value < report.features[b].p_value;
        return a < b;
    });
    for (std::size_t j : order) report.selected.push_back(report.features[j].name);
    return report;
}

// Automatic mode: 20 initial iterations, then up to 3 extensions of 10 while
// any tentatively-significant feature's required iterations exceed the
// iterations run so far.
inline SelectionReport select_automatic(const Dataset& data, const SelectorConfig& config,
                                        std::uint64_t base_seed, double alpha = kDefaultAlpha,
                                        double power = kDefaultPower) {
    auto t0 = std::chrono::steady_clock::now();
    IterationTable table = explain(data, kInitialIterations, config, base_seed);
    std::size_t rounds = 0;
    while (rounds < kMaxExtensionRounds) {
        SelectionReport probe = core(table, alpha, power);
        bool needs_more = false;
        for (const FeatureReport& fr : probe.features)
            if (fr.p_value < alpha && fr.required_iterations > table.iterations())
                needs_more = true;
        if (!needs_more) break;
        explain_extend(table, data, kExtensionStep, config, base_seed);
        ++rounds;
    }
    SelectionReport report = core(table, alpha, power);
    report.automatic = true;
    report.extension_rounds = rounds;
    report.base_seed = base_seed;
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

// Fixed-iteration mode: explain + core without power-driven extension.
inline SelectionReport select_fixed(const Dataset& data, std::size_t iterations,
                                    const SelectorConfig& config, std::uint64_t base_seed,
                                    double alpha = kDefaultAlpha, double power = kDefaultPower) {
    auto t0 = std::chrono::steady_clock::now();
    IterationTable table = explain(data, iterations, config, base_seed);
    SelectionReport report = core(table, alpha, power);
    report.automatic = false;
    report.base_seed = base_seed;
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

inline constexpr int kReportFormatVersion = 1;

inline nlohmann::json report_to_json(const SelectionReport& report, bool include_timing = true) {
    nlohmann::json j;
    j["format"] = "llpowershap.selection";
    j["version"] = kReportFormatVersion;
    nlohmann::json run;
    run["alpha"] = report.alpha;
    run["power"] = report.power_target;
    run["iterations_run"] = report.iterations_run;
    run["base_seed"] = report.base_seed;
    run["iteration_seeds"] = report.iteration_seeds;
    run["automatic"] = report.automatic;
    run["extension_rounds"] = report.extension_rounds;
    if (include_timing) run["wall_time_seconds"] = report.wall_time_seconds;
    j["run"] = std::move(run);
    nlohmann::json features = nlohmann::json::array();
    for (const FeatureReport& fr : report.features)
        features.push_back({{"name", fr.name},
                            {"p_value", fr.p_value},
                            {"required_iterations", fr.required_iterations},
                            {"mean_attribution", fr.mean_attribution}});
    j["features"] = std::move(features);
    j["selected"] = report.selected;
    return j;
}

inline SelectionReport report_from_json(const nlohmann::json& j) {
    try {
        if (!j.contains("format") || j.at("format") != "llpowershap.selection")
            throw DataError("not a selection report file");
        if (j.at("version").get<int>() != kReportFormatVersion)
            throw DataError("unsupported report version " + j.at("version").dump());
        SelectionReport report;
        const auto& run = j.at("run");
        report.alpha = run.at("alpha").get<double>();
        report.power_target = run.at("power").get<double>();
        report.iterations_run = run.at("iterations_run").get<std::size_t>();
        report.base_seed = run.at("base_seed").get<std::uint64_t>();
        report.iteration_seeds = run.at("iteration_seeds").get<std::vector<std::uint64_t>>();
        report.automatic = run.at("automatic").get<bool>();
        report.extension_rounds = run.at("extension_rounds").get<std::size_t>();
        if (run.contains("wall_time_seconds"))
            report.wall_time_seconds = run.at("wall_time_seconds").get<double>();
        for (const auto& jf : j.at("features")) {
            FeatureReport fr;
            fr.name = jf.at("name").get<std::string>();
            fr.p_value = jf.at("p_value").get<double>();
            fr.required_iterations = jf.at("required_iterations").get<std::size_t>();
            fr.mean_attribution = jf.at("mean_attribution").get<double>();
            report.features.push_back(std::move(fr));
        }
        report.selected = j.at("selected").get<std::vector<std::string>>();
        return report;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed selection report: ") + e.what());
    }
}

inline void save_report(const SelectionReport& report, const std::string& path,
                        bool include_timing = true) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write report file: " + path);
    out << report_to_json(report, include_timing).dump(2) << '\n';
    if (!out) throw DataError("failed writing report file: " + path);
}

inline SelectionReport load_report(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open report file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed selection report: ") + e.what());
    }
    return report_from_json(j);
}

}  // namespace llps
