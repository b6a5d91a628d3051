#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "llpowershap/booster.hpp"
#include "llpowershap/tabular.hpp"

using namespace llps;
namespace fs = std::filesystem;

namespace {

fs::path temp_path(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / "llps_booster_tests";
    fs::create_directories(dir);
    return dir / name;
}

// Linearly separable two-feature data.
Dataset separable_data(std::size_t n, std::uint64_t seed) {
    rng::Engine e = rng::make_engine(seed);
    Dataset d;
    d.names = {"x0", "x1"};
    d.noise_flags = {0, 0};
    d.columns.assign(2, std::vector<double>(n));
    d.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        double a = rng::normal(e), b = rng::normal(e);
        d.columns[0][i] = a;
        d.columns[1][i] = b;
        d.labels[i] = a + b > 0.0 ? 1 : 0;
    }
    return d;
}

Dataset noise_data(std::size_t n, std::size_t m, std::uint64_t seed) {
    rng::Engine e = rng::make_engine(seed);
    Dataset d;
    d.columns.assign(m, std::vector<double>(n));
    d.labels.resize(n);
    for (std::size_t c = 0; c < m; ++c) {
        d.names.push_back("n" + std::to_string(c));
        d.noise_flags.push_back(0);
        for (std::size_t i = 0; i < n; ++i) d.columns[c][i] = rng::normal(e);
    }
    for (std::size_t i = 0; i < n; ++i) d.labels[i] = static_cast<int>(e() & 1);
    return d;
}

double dataset_loss(const TreeEnsemble& model, const Dataset& d, std::size_t upto_trees) {
    TreeEnsemble clipped = model;
    clipped.best_iteration = upto_trees;
    std::vector<double> margins = predict_margin(clipped, d);
    double s = 0.0;
    for (std::size_t i = 0; i < d.n_rows(); ++i) s += logistic_loss(margins[i], d.labels[i]);
    return s / static_cast<double>(d.n_rows());
}

}  // namespace

TEST_CASE("logistic_loss: pinned values and saturation") {
    CHECK(logistic_loss(0.0, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(logistic_loss(0.0, 0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(logistic_loss(-3.0, 0) == doctest::Approx(0.048587).epsilon(1e-5));
    CHECK(logistic_loss(-3.0, 0) ==
          doctest::Approx(std::log1p(std::exp(-3.0))).epsilon(1e-14));

    CHECK(logistic_loss(40.0, 1) < 1e-15);
    CHECK(std::isfinite(logistic_loss(40.0, 1)));
    CHECK(std::isfinite(logistic_loss(-1000.0, 1)));
    CHECK(logistic_loss(-1000.0, 1) == doctest::Approx(1000.0));
    CHECK(std::isfinite(logistic_loss(1000.0, 0)));
}

TEST_CASE("train: separable data converges and stops early") {
    Dataset d = separable_data(1500, 4);
    SplitTriple parts = split(d, 1);
    BoosterConfig cfg;
    TreeEnsemble model = train(parts.train, parts.validation, cfg, 0);
    CHECK(model.best_iteration < 250);
    CHECK(dataset_loss(model, parts.validation, model.best_iteration) < 0.1);
}

TEST_CASE("train: pure noise stops well before the estimator cap") {
    Dataset d = noise_data(800, 6, 9);
    SplitTriple parts = split(d, 2);
    BoosterConfig cfg;
    TreeEnsemble model = train(parts.train, parts.validation, cfg, 0);
    CHECK(model.trees.size() < 250);  // early stopping fired
    CHECK(model.best_iteration + static_cast<std::size_t>(cfg.early_stopping_rounds) >=
          model.trees.size());
}

TEST_CASE("train: contract violations") {
    Dataset d = separable_data(100, 5);
    Dataset constant = d;
    std::fill(constant.labels.begin(), constant.labels.end(), 1);
    CHECK_THROWS_WITH_AS(train(constant, d, BoosterConfig{}, 0),
                         doctest::Contains("single-class"), DataError);

    Dataset renamed = d;
    renamed.names[0] = "other";
    CHECK_THROWS_WITH_AS(train(d, renamed, BoosterConfig{}, 0), doctest::Contains("schema"),
                         DataError);

    BoosterConfig bad;
    bad.n_estimators = 0;
    CHECK_THROWS_AS(train(d, d, bad, 0), DataError);
}

TEST_CASE("predict_margin: identity, stump routing, per-tree additivity") {
    TreeEnsemble empty;
    empty.n_features = 3;
    empty.base_score = -0.25;
    empty.best_iteration = 0;
    std::vector<std::vector<double>> rows = {{0, 0, 0}, {5, -2, 1}};
    for (double v : predict_margin(empty, rows)) CHECK(v == doctest::Approx(-0.25));

    // single stump: feature 1, threshold 0.5, left -1.5 / right 2.0
    TreeEnsemble stump = empty;
    Tree t;
    t.nodes.push_back(TreeNode{1, 0.5, 1, 2, 0.0});
    t.nodes.push_back(TreeNode{-1, 0.0, -1, -1, -1.5});
    t.nodes.push_back(TreeNode{-1, 0.0, -1, -1, 2.0});
    stump.trees.push_back(t);
    stump.best_iteration = 1;
    auto margins = predict_margin(stump, std::vector<std::vector<double>>{{0, 0.4, 0}, {0, 0.6, 0}});
    CHECK(margins[0] == doctest::Approx(-0.25 - 1.5));
    CHECK(margins[1] == doctest::Approx(-0.25 + 2.0));

    // ensemble prediction equals base + sum of per-tree predictions
    Dataset d = separable_data(600, 6);
    SplitTriple parts = split(d, 3);
    BoosterConfig cfg;
    cfg.n_estimators = 30;
    TreeEnsemble model = train(parts.train, parts.validation, cfg, 0);
    std::vector<double> row = parts.test.row(0);
    double direct = model.predict_row(row.data());
    double summed = model.base_score;
    for (std::size_t k = 0; k < model.best_iteration; ++k)
        summed += model.trees[k].predict(row.data());
    CHECK(direct == doctest::Approx(summed).epsilon(1e-14));

    CHECK_THROWS_AS(predict_margin(stump, std::vector<std::vector<double>>{{1.0}}), DataError);
}

TEST_CASE("train: training loss decreases monotonically") {
    Dataset d = separable_data(900, 11);
    SplitTriple parts = split(d, 5);
    BoosterConfig cfg;
    cfg.n_estimators = 60;
    cfg.early_stopping_rounds = 60;  // keep growing to observe the whole path
    TreeEnsemble model = train(parts.train, parts.validation, cfg, 0);
    double prev = dataset_loss(model, parts.train, 0);
    for (std::size_t k = 1; k <= model.trees.size(); ++k) {
        double cur = dataset_loss(model, parts.train, k);
        CHECK(cur <= prev + 1e-12);
        prev = cur;
    }
}

TEST_CASE("train: best_iteration marks the validation minimum") {
    Dataset d = noise_data(400, 4, 21);
    SplitTriple parts = split(d, 7);
    BoosterConfig cfg;
    cfg.n_estimators = 40;
    TreeEnsemble model = train(parts.train, parts.validation, cfg, 0);
    double best = dataset_loss(model, parts.validation, model.best_iteration);
    for (std::size_t k = 1; k <= model.trees.size(); ++k)
        CHECK(best <= dataset_loss(model, parts.validation, k) + 1e-12);
}

TEST_CASE("train: unused features cannot influence predictions") {
    Dataset d = separable_data(500, 8);
    // add a constant column the trees can never split on
    d.columns.push_back(std::vector<double>(d.n_rows(), 1.0));
    d.names.push_back("consta");
    d.noise_flags.push_back(0);
    SplitTriple parts = split(d, 9);
    BoosterConfig cfg;
    cfg.n_estimators = 25;
    TreeEnsemble model = train(parts.train, parts.validation, cfg, 0);
    for (const Tree& t : model.trees)
        for (const TreeNode& nd : t.nodes)
            if (!nd.is_leaf()) CHECK(nd.split_feature != 2);
    std::vector<double> row = parts.test.row(0);
    double before = model.predict_row(row.data());
    row[2] = -123.0;
    CHECK(model.predict_row(row.data()) == before);
}

TEST_CASE("train: deterministic serialized bytes") {
    Dataset d = separable_data(700, 13);
    SplitTriple parts = split(d, 17);
    BoosterConfig cfg;
    cfg.n_estimators = 20;
    TreeEnsemble a = train(parts.train, parts.validation, cfg, 3);
    TreeEnsemble b = train(parts.train, parts.validation, cfg, 3);
    CHECK(model_to_json(a).dump() == model_to_json(b).dump());
}

TEST_CASE("save/load: round trip preserves predictions") {
    Dataset d = separable_data(800, 29);
    SplitTriple parts = split(d, 19);
    BoosterConfig cfg;
    cfg.n_estimators = 30;
    TreeEnsemble model = train(parts.train, parts.validation, cfg, 0);
    auto path = temp_path("model_roundtrip.json");
    save_model(model, path.string());
    TreeEnsemble loaded = load_model(path.string());
    CHECK(loaded.best_iteration == model.best_iteration);
    CHECK(loaded.n_features == model.n_features);

    rng::Engine e = rng::make_engine(123);
    std::vector<std::vector<double>> rows(1000, std::vector<double>(2));
    for (auto& r : rows)
        for (double& v : r) v = 4.0 * rng::uniform01(e) - 2.0;
    std::vector<double> before = predict_margin(model, rows);
    std::vector<double> after = predict_margin(loaded, rows);
    CHECK(before == after);
}

TEST_CASE("load_model: malformed and mismatched files") {
    auto good = temp_path("model_ok.json");
    Dataset d = separable_data(200, 31);
    SplitTriple parts = split(d, 23);
    BoosterConfig cfg;
    cfg.n_estimators = 5;
    TreeEnsemble model = train(parts.train, parts.validation, cfg, 0);
    save_model(model, good.string());

    // truncated file
    std::string text;
    {
        std::ifstream in(good);
        text.assign((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    }
    auto trunc = temp_path("model_trunc.json");
    {
        std::ofstream out(trunc);
        out << text.substr(0, text.size() / 2);
    }
    CHECK_THROWS_AS(load_model(trunc.string()), DataError);

    // version mismatch
    nlohmann::json j = model_to_json(model);
    j["version"] = 999;
    auto vpath = temp_path("model_badversion.json");
    {
        std::ofstream out(vpath);
        out << j.dump();
    }
    CHECK_THROWS_WITH_AS(load_model(vpath.string()), doctest::Contains("version"), DataError);

    CHECK_THROWS_AS(load_model("/nonexistent/model.json"), DataError);
}

TEST_CASE("load_model: hand-written two-node tree routes as specified") {
    // root: feature 0, threshold 1.5; left leaf 10, right leaf 20; base 1.
    auto path = temp_path("model_hand.json");
    {
        std::ofstream out(path);
        out << R"({
          "format": "llpowershap.model",
          "version": 1,
          "base_score": 1.0,
          "n_features": 2,
          "best_iteration": 1,
          "config": {"n_estimators": 1, "early_stopping_rounds": 1, "learning_rate": 1.0,
                     "max_depth": 1, "l2_regularization": 1.0, "min_child_weight": 1.0},
          "trees": [{"nodes": [{"f": 0, "t": 1.5, "l": 1, "r": 2},
                                {"v": 10.0}, {"v": 20.0}]}]
        })";
    }
    TreeEnsemble m = load_model(path.string());
    auto margins =
        predict_margin(m, std::vector<std::vector<double>>{{1.0, 0.0}, {2.0, 0.0}});
    CHECK(margins[0] == doctest::Approx(11.0));
    CHECK(margins[1] == doctest::Approx(21.0));
}
