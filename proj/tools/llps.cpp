// Command-line front end: selection runs, simulation benchmarks, standalone
// attribution, and evaluation of selected feature sets.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "llpowershap/llpowershap.hpp"

namespace {

using llps::DataError;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitRuntime = 3;

std::string fmt(double v) { return llps::format_double(v, 17); }

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write file: " + path);
    out << text;
    if (!out) throw DataError("failed writing file: " + path);
}

// Shared knobs; every command echoes its effective configuration (threads
// excluded: they never change results) into its output file.
struct CommonOptions {
    unsigned threads = 0;
    std::uint64_t seed = 0;
    double alpha = llps::kDefaultAlpha;
    double power = llps::kDefaultPower;
    std::size_t background_size = llps::kBackgroundCap;
    std::size_t permutations = llps::kDefaultPermutations;
    std::size_t exact_cap = llps::kDefaultExactCap;
    llps::BoosterConfig booster;
};

void add_booster_flags(CLI::App* cmd, llps::BoosterConfig& cfg) {
    cmd->add_option("--estimators", cfg.n_estimators, "Boosting rounds")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--early-stopping", cfg.early_stopping_rounds,
                    "Early stopping patience (rounds)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--learning-rate", cfg.learning_rate, "Shrinkage per round")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--max-depth", cfg.max_depth, "Tree depth limit")->check(CLI::PositiveNumber);
    cmd->add_option("--lambda", cfg.l2_regularization, "L2 leaf regularization")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--min-child-weight", cfg.min_child_weight, "Minimum child hessian sum")
        ->check(CLI::PositiveNumber);
}

nlohmann::json booster_json(const llps::BoosterConfig& cfg) {
    return {{"n_estimators", cfg.n_estimators},
            {"early_stopping_rounds", cfg.early_stopping_rounds},
            {"learning_rate", cfg.learning_rate},
            {"max_depth", cfg.max_depth},
            {"l2_regularization", cfg.l2_regularization},
            {"min_child_weight", cfg.min_child_weight}};
}

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

struct SelectOptions {
    std::string data_path;
    std::string target;
    std::string output = "selection_report.json";
    std::string save_model_path;
    std::string mode = "auto";
    std::size_t iterations = llps::kInitialIterations;
    CommonOptions common;
};

int run_select(const SelectOptions& opt) {
    llps::Dataset data = llps::load_csv(opt.data_path, opt.target);
    llps::SelectorConfig cfg;
    cfg.booster = opt.common.booster;
    cfg.background_cap = opt.common.background_size;
    cfg.exact_cap = opt.common.exact_cap;
    cfg.n_permutations = opt.common.permutations;
    cfg.threads = llps::resolve_threads(opt.common.threads);

    llps::SelectionReport report =
        opt.mode == "auto"
            ? llps::select_automatic(data, cfg, opt.common.seed, opt.common.alpha,
                                     opt.common.power)
            : llps::select_fixed(data, opt.iterations, cfg, opt.common.seed, opt.common.alpha,
                                 opt.common.power);

    nlohmann::json j = llps::report_to_json(report);
    j["config"] = {{"data", opt.data_path},
                   {"target", opt.target},
                   {"mode", opt.mode},
                   {"alpha", opt.common.alpha},
                   {"power", opt.common.power},
                   {"seed", opt.common.seed},
                   {"background_size", opt.common.background_size},
                   {"permutations", opt.common.permutations},
                   {"exact_cap", opt.common.exact_cap},
                   {"booster", booster_json(opt.common.booster)}};
    write_text_file(opt.output, j.dump(2) + "\n");

    std::vector<const llps::FeatureReport*> ranked;
    for (const auto& fr : report.features) ranked.push_back(&fr);
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto* a, const auto* b) { return a->p_value < b->p_value; });
    std::printf("selected %zu of %zu features (alpha=%g, iterations=%zu)\n",
                report.selected.size(), report.features.size(), report.alpha,
                report.iterations_run);
    for (const auto* fr : ranked)
        if (fr->p_value < report.alpha)
            std::printf("  %-24s p=%-12g mean_attribution=%g\n", fr->name.c_str(), fr->p_value,
                        fr->mean_attribution);
    std::printf("report written to %s\n", opt.output.c_str());

    if (!opt.save_model_path.empty()) {
        // One representative model: trained on the final iteration's split.
        std::uint64_t rs = report.iteration_seeds.empty() ? opt.common.seed + 1
                                                          : report.iteration_seeds.back();
        llps::Dataset noisy = llps::inject_noise(data, llps::NoiseSpec{rs}, rs);
        llps::SplitTriple parts = llps::split(noisy, rs);
        llps::TreeEnsemble model =
            llps::train(parts.train, parts.validation, cfg.booster, rs);
        llps::save_model(model, opt.save_model_path);
        std::printf("model written to %s\n", opt.save_model_path.c_str());
    }
    return 0;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimulateOptions {
    std::vector<std::size_t> features = {20, 100, 250, 500};
    std::vector<double> informative_pct = {3, 10, 33, 50, 90};
    std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
    std::vector<std::string> methods = {"llpowershap", "chi2", "ftest", "top3pct"};
    std::size_t samples = 5000;
    double class_sep = 1.0;
    double top_percent = 3.0;
    std::size_t folds = 10;
    bool paper_fidelity = false;
    bool skip_eval = false;
    std::string output = "simulation_results.csv";
    CommonOptions common;
};

struct MethodOutcome {
    bool applicable = true;
    std::vector<std::size_t> selected;
};

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        out += c;
    }
    out += "\"";
    return out;
}

int run_simulate(const SimulateOptions& opt) {
    if (opt.methods.empty()) throw CLI::ValidationError("--methods", "method list is empty");
    for (const auto& mth : opt.methods)
        if (mth != "llpowershap" && mth != "chi2" && mth != "ftest" && mth != "top3pct")
            throw CLI::ValidationError("--methods", "unknown method: " + mth);
    for (double pct : opt.informative_pct)
        if (!(pct > 0.0 && pct <= 100.0))
            throw CLI::ValidationError("--informative-pct", "percent must be in (0, 100]");
    for (std::size_t f : opt.features)
        if (f == 0) throw CLI::ValidationError("--features", "feature count must be positive");

    std::size_t background = opt.paper_fidelity ? opt.common.background_size
                                                : std::min<std::size_t>(opt.common.background_size, 128);
    std::size_t permutations = opt.paper_fidelity ? opt.common.permutations
                                                  : std::min<std::size_t>(opt.common.permutations, 32);
    unsigned threads = llps::resolve_threads(opt.common.threads);

    nlohmann::json config_echo = {
        {"samples", opt.samples},
        {"features", opt.features},
        {"informative_pct", opt.informative_pct},
        {"seeds", opt.seeds},
        {"methods", opt.methods},
        {"class_sep", opt.class_sep},
        {"alpha", opt.common.alpha},
        {"power", opt.common.power},
        {"background_size", background},
        {"permutations", permutations},
        {"exact_cap", opt.common.exact_cap},
        {"paper_fidelity", opt.paper_fidelity},
        {"folds", opt.folds},
        {"skip_eval", opt.skip_eval},
        {"booster", booster_json(opt.common.booster)}};

    std::ostringstream csv;
    csv << "# config " << config_echo.dump() << "\n";
    csv << "method,dataset,seed,n_selected,n_informative_found,n_noise_selected,"
           "cv_auroc_mean,cv_auroc_sd,test_auroc\n";

    for (std::size_t m : opt.features) {
        for (double pct : opt.informative_pct) {
            std::size_t n_informative = std::max<std::size_t>(
                1, static_cast<std::size_t>(std::llround(pct / 100.0 * static_cast<double>(m))));
            if (n_informative > m) n_informative = m;
            std::string dataset_name = "synthetic_f" + std::to_string(m) + "_inf" +
                                       std::to_string(n_informative) + "_n" +
                                       std::to_string(opt.samples);
            for (std::uint64_t seed : opt.seeds) {
                llps::Dataset data = llps::generate_classification(opt.samples, m, n_informative,
                                                                   opt.class_sep, seed);
                const std::vector<std::size_t>& truth = *data.ground_truth_informative;
                for (const std::string& method : opt.methods) {
                    MethodOutcome outcome;
                    if (method == "llpowershap") {
                        llps::SelectorConfig cfg;
                        cfg.booster = opt.common.booster;
                        cfg.background_cap = background;
                        cfg.exact_cap = opt.common.exact_cap;
                        cfg.n_permutations = permutations;
                        cfg.threads = threads;
                        llps::SelectionReport rep = llps::select_automatic(
                            data, cfg, seed, opt.common.alpha, opt.common.power);
                        for (const std::string& nm : rep.selected) {
                            auto it = std::find(data.names.begin(), data.names.end(), nm);
                            outcome.selected.push_back(
                                static_cast<std::size_t>(it - data.names.begin()));
                        }
                        std::sort(outcome.selected.begin(), outcome.selected.end());
                    } else if (method == "chi2") {
                        outcome.selected =
                            llps::baselines::chi2_filter(data, opt.common.alpha).selected;
                    } else if (method == "ftest") {
                        outcome.selected =
                            llps::baselines::f_test_filter(data, opt.common.alpha).selected;
                    } else {  // top3pct
                        if (m <= 100) {
                            outcome.applicable = false;
                        } else {
                            auto [fit_part, rest] = llps::holdout_split(data, 0.75, seed);
                            auto [fit, val] = llps::holdout_split(fit_part, 0.9, seed + 1);
                            llps::TreeEnsemble model =
                                llps::train(fit, val, opt.common.booster, seed);
                            llps::BackgroundSet bg =
                                llps::BackgroundSet::draw(fit, background, seed);
                            llps::ShapleyConfig sc;
                            sc.exact_cap = opt.common.exact_cap;
                            sc.n_permutations = permutations;
                            sc.seed = seed;
                            sc.threads = threads;
                            // Importance rows: a seeded subsample of the training part
                            // keeps the ranking pass proportionate.
                            std::size_t rows_cap = std::min<std::size_t>(512, fit_part.n_rows());
                            llps::rng::Engine pe =
                                llps::rng::make_engine(llps::rng::mix(seed, 0x709c));
                            std::vector<std::size_t> perm =
                                llps::rng::permutation(fit_part.n_rows(), pe);
                            perm.resize(rows_cap);
                            std::sort(perm.begin(), perm.end());
                            llps::Dataset imp_rows = fit_part.subset_rows(perm);
                            llps::AttributionMatrix attr =
                                llps::margin_attributions(model, imp_rows, bg, sc);
                            std::vector<double> importances(m, 0.0);
                            for (const auto& row : attr.values)
                                for (std::size_t f = 0; f < m; ++f)
                                    importances[f] += std::fabs(row[f]);
                            llps::baselines::TopPercentResult top =
                                llps::baselines::top_percent_rank(importances, opt.top_percent);
                            outcome.applicable = top.applicable;
                            outcome.selected = top.selected;
                        }
                    }

                    csv << method << "," << dataset_name << "," << seed << ",";
                    if (!outcome.applicable) {
                        csv << "na,na,na,nan,nan,nan\n";
                        continue;
                    }
                    std::size_t found = 0;
                    for (std::size_t s : outcome.selected)
                        if (std::find(truth.begin(), truth.end(), s) != truth.end()) ++found;
                    std::size_t noise = outcome.selected.size() - found;
                    csv << outcome.selected.size() << "," << found << "," << noise << ",";
                    if (opt.skip_eval || outcome.selected.empty()) {
                        csv << "nan,nan,nan\n";
                        continue;
                    }
                    auto [train_part, test_part] = llps::holdout_split(data, 0.75, seed);
                    llps::baselines::CvResult cv = llps::baselines::kfold_evaluate(
                        train_part, outcome.selected, opt.folds, opt.common.booster, seed);
                    llps::Dataset train_sel = train_part.subset_columns(outcome.selected);
                    llps::Dataset test_sel = test_part.subset_columns(outcome.selected);
                    auto [fit, val] = llps::holdout_split(train_sel, 0.9, seed + 2);
                    llps::TreeEnsemble final_model =
                        llps::train(fit, val, opt.common.booster, seed);
                    double test_auc = llps::baselines::auroc(
                        llps::predict_margin(final_model, test_sel), test_sel.labels);
                    csv << fmt(cv.mean) << "," << fmt(cv.sd) << "," << fmt(test_auc) << "\n";
                }
            }
        }
    }
    write_text_file(opt.output, csv.str());
    std::printf("results written to %s\n", opt.output.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// explain
// ---------------------------------------------------------------------------

struct ExplainOptions {
    std::string model_path;
    std::string data_path;
    std::string target;
    std::string mode = "loss";
    std::string output = "attributions.csv";
    CommonOptions common;
};

int run_explain(const ExplainOptions& opt) {
    if (opt.mode == "loss" && opt.target.empty())
        throw CLI::ValidationError("--target", "loss mode requires a target column");
    llps::TreeEnsemble model = llps::load_model(opt.model_path);

    llps::Dataset data;
    if (!opt.target.empty()) {
        data = llps::load_csv(opt.data_path, opt.target);
    } else {
        // No target column: every CSV column is a feature. Loading requires a
        // target, so synthesize one from the header.
        std::ifstream in(opt.data_path, std::ios::binary);
        if (!in) throw DataError("cannot open file: " + opt.data_path);
        std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        llps::detail::CsvTable table = llps::detail::parse_csv_text(text);
        if (table.records.size() < 2) throw DataError("CSV has no data rows");
        data.names = table.records[0];
        data.columns.assign(data.names.size(), {});
        for (std::size_t r = 1; r < table.records.size(); ++r) {
            const auto& rec = table.records[r];
            if (rec.size() != data.names.size())
                throw DataError("row " + std::to_string(r) + " has " +
                                std::to_string(rec.size()) + " fields, expected " +
                                std::to_string(data.names.size()));
            for (std::size_t c = 0; c < rec.size(); ++c) {
                double v;
                if (!llps::detail::parse_finite_double(rec[c], v))
                    throw DataError("non-numeric cell at row " + std::to_string(r) +
                                    ", column '" + data.names[c] + "'");
                data.columns[c].push_back(v);
            }
        }
        data.labels.assign(data.columns[0].size(), 0);
        data.noise_flags.assign(data.names.size(), 0);
    }
    if (data.n_cols() != model.n_features)
        throw DataError("data has " + std::to_string(data.n_cols()) +
                        " feature columns, model expects " + std::to_string(model.n_features));

    llps::BackgroundSet bg =
        llps::BackgroundSet::draw(data, opt.common.background_size, opt.common.seed);
    llps::ShapleyConfig sc;
    sc.exact_cap = opt.common.exact_cap;
    sc.n_permutations = opt.common.permutations;
    sc.seed = opt.common.seed;
    sc.threads = llps::resolve_threads(opt.common.threads);

    llps::AttributionMatrix attr =
        opt.mode == "margin" ? llps::margin_attributions(model, data, bg, sc)
                             : llps::loss_attributions(model, data, bg, sc);

    // Audit column: value(full) - value(empty), averaged over the background;
    // each attribution row must sum to it.
    std::vector<double> bg_margins;
    for (const auto& z : bg.rows) bg_margins.push_back(model.predict_row(z.data()));
    double bg_margin_mean = 0.0;
    for (double v : bg_margins) bg_margin_mean += v;
    bg_margin_mean /= static_cast<double>(bg_margins.size());
    double bg_loss_mean[2] = {0.0, 0.0};
    for (int y = 0; y < 2; ++y) {
        for (double v : bg_margins) bg_loss_mean[y] += -llps::logistic_loss(v, y);
        bg_loss_mean[y] /= static_cast<double>(bg_margins.size());
    }

    nlohmann::json config_echo = {{"model", opt.model_path},
                                  {"data", opt.data_path},
                                  {"mode", opt.mode},
                                  {"seed", opt.common.seed},
                                  {"background_size", opt.common.background_size},
                                  {"permutations", opt.common.permutations},
                                  {"exact_cap", opt.common.exact_cap}};
    std::ostringstream csv;
    csv << "# config " << config_echo.dump() << "\n";
    for (std::size_t f = 0; f < data.names.size(); ++f) csv << csv_escape(data.names[f]) << ",";
    csv << "row_sum_audit\n";
    std::vector<double> row;
    for (std::size_t i = 0; i < attr.values.size(); ++i) {
        for (double v : attr.values[i]) csv << fmt(v) << ",";
        data.fill_row(i, row);
        double full = model.predict_row(row.data());
        double audit = opt.mode == "margin"
                           ? full - bg_margin_mean
                           : -llps::logistic_loss(full, data.labels[i]) -
                                 bg_loss_mean[data.labels[i]];
        csv << fmt(audit) << "\n";
    }
    write_text_file(opt.output, csv.str());
    std::printf("attributions written to %s (%zu rows, %s mode)\n", opt.output.c_str(),
                attr.values.size(), opt.mode.c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateOptions {
    std::string data_path;
    std::string target;
    std::string selection_path;
    std::string output = "evaluation_metrics.json";
    std::size_t folds = 10;
    CommonOptions common;
};

int run_evaluate(const EvaluateOptions& opt) {
    llps::Dataset data = llps::load_csv(opt.data_path, opt.target);
    llps::SelectionReport report = llps::load_report(opt.selection_path);
    std::vector<std::size_t> selected;
    for (const std::string& nm : report.selected) {
        auto it = std::find(data.names.begin(), data.names.end(), nm);
        if (it == data.names.end())
            throw DataError("selection references unknown column: " + nm);
        selected.push_back(static_cast<std::size_t>(it - data.names.begin()));
    }
    if (selected.empty()) throw DataError("selection report contains no features");

    auto [train_part, test_part] = llps::holdout_split(data, 0.75, opt.common.seed);
    llps::baselines::CvResult cv = llps::baselines::kfold_evaluate(
        train_part, selected, opt.folds, opt.common.booster, opt.common.seed);

    llps::Dataset train_sel = train_part.subset_columns(selected);
    llps::Dataset test_sel = test_part.subset_columns(selected);
    auto [fit, val] = llps::holdout_split(train_sel, 0.9, opt.common.seed + 1);
    llps::TreeEnsemble model = llps::train(fit, val, opt.common.booster, opt.common.seed);
    double test_auc =
        llps::baselines::auroc(llps::predict_margin(model, test_sel), test_sel.labels);

    nlohmann::json j;
    j["format"] = "llpowershap.metrics";
    j["version"] = 1;
    j["config"] = {{"data", opt.data_path},
                   {"target", opt.target},
                   {"selection", opt.selection_path},
                   {"folds", opt.folds},
                   {"seed", opt.common.seed},
                   {"booster", booster_json(opt.common.booster)}};
    j["n_selected"] = selected.size();
    j["selected"] = report.selected;
    j["cv_auroc_mean"] = cv.mean;
    j["cv_auroc_sd"] = cv.sd;
    j["fold_aurocs"] = cv.fold_scores;
    j["test_auroc"] = test_auc;
    j["train_rows"] = train_part.n_rows();
    j["test_rows"] = test_part.n_rows();
    write_text_file(opt.output, j.dump(2) + "\n");
    std::printf("cv_auroc_mean=%.6f cv_auroc_sd=%.6f test_auroc=%.6f (%zu features)\n", cv.mean,
                cv.sd, test_auc, selected.size());
    std::printf("metrics written to %s\n", opt.output.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"LLpowershap feature selection toolkit"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read defaults from a config file");

    SelectOptions sel;
    CLI::App* c_select = app.add_subcommand("select", "Run feature selection on a CSV dataset");
    c_select->add_option("--data", sel.data_path, "Input CSV")->required();
    c_select->add_option("--target", sel.target, "Target column name")->required();
    c_select->add_option("--output", sel.output, "Report JSON path");
    c_select->add_option("--save-model", sel.save_model_path,
                         "Also save the final iteration's model");
    c_select->add_option("--mode", sel.mode, "auto or fixed")
        ->check(CLI::IsMember({"auto", "fixed"}));
    c_select->add_option("--iterations", sel.iterations, "Iterations in fixed mode")
        ->check(CLI::PositiveNumber);
    c_select->add_option("--alpha", sel.common.alpha, "p-value cut-off")
        ->check(CLI::Range(1e-12, 0.999999));
    c_select->add_option("--power", sel.common.power, "Required power (auto mode)")
        ->check(CLI::Range(1e-12, 0.999999));
    c_select->add_option("--seed", sel.common.seed, "Base random seed");
    c_select->add_option("--background-size", sel.common.background_size,
                         "Background rows for attribution")
        ->check(CLI::Range(std::size_t{1}, llps::kBackgroundCap));
    c_select->add_option("--permutations", sel.common.permutations,
                         "Sampling budget above the exact cap (even)")
        ->check(CLI::PositiveNumber);
    c_select->add_option("--exact-cap", sel.common.exact_cap,
                         "Exact enumeration cap on divergent players")
        ->check(CLI::Range(std::size_t{1}, std::size_t{20}));
    c_select->add_option("--threads", sel.common.threads, "Worker threads (0 = auto)");
    add_booster_flags(c_select, sel.common.booster);

    SimulateOptions sim;
    CLI::App* c_sim = app.add_subcommand("simulate", "Run the synthetic benchmark grid");
    c_sim->add_option("--features", sim.features, "Feature counts")->delimiter(',');
    c_sim->add_option("--informative-pct", sim.informative_pct, "Informative percentages")
        ->delimiter(',');
    c_sim->add_option("--seeds", sim.seeds, "Generator seeds")->delimiter(',');
    c_sim->add_option("--methods", sim.methods,
                      "Methods: llpowershap, chi2, ftest, top3pct")
        ->delimiter(',');
    c_sim->add_option("--samples", sim.samples, "Rows per dataset")
        ->check(CLI::Range(std::size_t{10}, std::size_t{10000000}));
    c_sim->add_option("--class-sep", sim.class_sep, "Centroid scale")
        ->check(CLI::PositiveNumber);
    c_sim->add_option("--folds", sim.folds, "CV folds in evaluation")
        ->check(CLI::Range(std::size_t{2}, std::size_t{100}));
    c_sim->add_flag("--paper-fidelity", sim.paper_fidelity,
                    "Use full background/permutation budgets");
    c_sim->add_flag("--skip-eval", sim.skip_eval, "Skip the AUROC evaluation columns");
    c_sim->add_option("--output", sim.output, "Results CSV path");
    c_sim->add_option("--alpha", sim.common.alpha, "p-value cut-off")
        ->check(CLI::Range(1e-12, 0.999999));
    c_sim->add_option("--power", sim.common.power, "Required power")
        ->check(CLI::Range(1e-12, 0.999999));
    c_sim->add_option("--background-size", sim.common.background_size, "Background cap")
        ->check(CLI::Range(std::size_t{1}, llps::kBackgroundCap));
    c_sim->add_option("--permutations", sim.common.permutations, "Sampling budget (even)")
        ->check(CLI::PositiveNumber);
    c_sim->add_option("--exact-cap", sim.common.exact_cap, "Exact enumeration cap")
        ->check(CLI::Range(std::size_t{1}, std::size_t{20}));
    c_sim->add_option("--threads", sim.common.threads, "Worker threads (0 = auto)");
    add_booster_flags(c_sim, sim.common.booster);

    ExplainOptions expl;
    CLI::App* c_expl = app.add_subcommand("explain", "Attribute a saved model on a dataset");
    c_expl->add_option("--model", expl.model_path, "Model JSON")->required();
    c_expl->add_option("--data", expl.data_path, "Input CSV")->required();
    c_expl->add_option("--target", expl.target, "Target column (required for loss mode)");
    c_expl->add_option("--mode", expl.mode, "margin or loss")
        ->check(CLI::IsMember({"margin", "loss"}));
    c_expl->add_option("--output", expl.output, "Attribution CSV path");
    c_expl->add_option("--seed", expl.common.seed, "Seed for background draw and sampling");
    c_expl->add_option("--background-size", expl.common.background_size, "Background rows")
        ->check(CLI::Range(std::size_t{1}, llps::kBackgroundCap));
    c_expl->add_option("--permutations", expl.common.permutations, "Sampling budget (even)")
        ->check(CLI::PositiveNumber);
    c_expl->add_option("--exact-cap", expl.common.exact_cap, "Exact enumeration cap")
        ->check(CLI::Range(std::size_t{1}, std::size_t{20}));
    c_expl->add_option("--threads", expl.common.threads, "Worker threads (0 = auto)");

    EvaluateOptions ev;
    CLI::App* c_eval = app.add_subcommand("evaluate", "Score a selected feature set");
    c_eval->add_option("--data", ev.data_path, "Input CSV")->required();
    c_eval->add_option("--target", ev.target, "Target column name")->required();
    c_eval->add_option("--selection", ev.selection_path, "Selection report JSON")->required();
    c_eval->add_option("--output", ev.output, "Metrics JSON path");
    c_eval->add_option("--folds", ev.folds, "CV folds")
        ->check(CLI::Range(std::size_t{2}, std::size_t{100}));
    c_eval->add_option("--seed", ev.common.seed, "Split seed");
    c_eval->add_option("--threads", ev.common.threads, "Worker threads (0 = auto)");
    add_booster_flags(c_eval, ev.common.booster);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (app.got_subcommand(c_select)) return run_select(sel);
        if (app.got_subcommand(c_sim)) return run_simulate(sim);
        if (app.got_subcommand(c_expl)) return run_explain(expl);
        if (app.got_subcommand(c_eval)) return run_evaluate(ev);
        std::fprintf(stderr, "no subcommand given\n");
        return kExitUsage;
    } catch (const CLI::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitUsage;
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitData;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return kExitRuntime;
    }
}
