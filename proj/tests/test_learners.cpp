#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <vector>

#include "poisonlab/learners.hpp"
#include "poisonlab/mixture.hpp"
#include "poisonlab/rng.hpp"

using namespace poisonlab;

namespace {

Dataset separable_clusters(std::size_t per_class, std::uint64_t seed) {
    MixtureSpec spec;
    spec.k = 2;
    spec.weights = {0.5, 0.5};
    spec.label_probs = {0.0, 1.0};
    spec.components.push_back({0, {-3.0, 0.0}, {0.5, 0.5}, 0.0});
    spec.components.push_back({1, {3.0, 0.0}, {0.5, 0.5}, 1.0});
    return sample_dataset(spec, 2 * per_class, seed);
}

Dataset oracle_dataset(const std::vector<std::pair<int, int>>& subpop_labels) {
    Dataset ds;
    ds.feature_dim = 1;
    for (const auto& [subpop, label] : subpop_labels) {
        Sample s;
        s.features = {static_cast<double>(subpop)};
        s.label = label;
        s.subpop_id = subpop;
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

LearnerConfig logreg_config(std::uint64_t seed = 0) {
    LearnerConfig c;
    c.family = LearnerFamily::logistic_regression;
    c.epochs = 200;
    c.batch_size = 16;
    c.learning_rate = 0.5;
    c.seed = seed;
    return c;
}

LearnerConfig mlp_config(std::vector<int> hidden, std::uint64_t seed = 0) {
    LearnerConfig c;
    c.family = LearnerFamily::mlp;
    c.hidden_layers = std::move(hidden);
    c.epochs = 60;
    c.batch_size = 16;
    c.learning_rate = 0.2;
    c.seed = seed;
    return c;
}

}  // namespace

TEST_CASE("oracle picks the majority label per subpopulation") {
    const Dataset ds = oracle_dataset({{0, 1}, {0, 1}, {0, 0}, {1, 0}, {1, 0}, {1, 1}});
    LearnerConfig c;
    c.family = LearnerFamily::zero_local_oracle;
    const TrainedModel oracle = train(c, ds);
    CHECK(oracle.oracle_table.at(0) == 1);
    CHECK(oracle.oracle_table.at(1) == 0);
}

TEST_CASE("oracle majority ties resolve to 1") {
    const Dataset ds = oracle_dataset({{0, 1}, {0, 0}});
    LearnerConfig c;
    c.family = LearnerFamily::zero_local_oracle;
    const TrainedModel oracle = train(c, ds);
    CHECK(oracle.oracle_table.at(0) == 1);
}

TEST_CASE("oracle on unseen subpopulation falls back to the global majority") {
    const Dataset ds = oracle_dataset({{0, 0}, {0, 0}, {1, 1}});
    LearnerConfig c;
    c.family = LearnerFamily::zero_local_oracle;
    const TrainedModel oracle = train(c, ds);
    CHECK(oracle.global_majority == 0);
    bool fallback = false;
    std::vector<double> x{0.0};
    CHECK(predict(oracle, x, 42, &fallback) == 0);
    CHECK(fallback);
    CHECK_THROWS_AS(predict(oracle, x), validation_error);
}

TEST_CASE("oracle minimizes 0-1 loss over all subpopulation-constant labelings") {
    const auto bench = make_gaussian_benchmark(6.0, 0.5, 4, {10, 25}, 0.2, 19);
    LearnerConfig c;
    c.family = LearnerFamily::zero_local_oracle;
    const TrainedModel oracle = train(c, bench.dataset);

    auto loss_of = [&](const std::vector<int>& labeling) {
        std::size_t errors = 0;
        for (const auto& s : bench.dataset.samples)
            errors += labeling[static_cast<std::size_t>(s.subpop_id)] != s.label;
        return errors;
    };
    std::vector<int> oracle_labeling(4);
    for (int i = 0; i < 4; ++i) oracle_labeling[static_cast<std::size_t>(i)] = oracle.oracle_table.at(i);
    const std::size_t oracle_loss = loss_of(oracle_labeling);

    for (int mask = 0; mask < 16; ++mask) {
        std::vector<int> labeling(4);
        for (int i = 0; i < 4; ++i) labeling[static_cast<std::size_t>(i)] = (mask >> i) & 1;
        CHECK(oracle_loss <= loss_of(labeling));
    }
}

TEST_CASE("logistic regression separates a linearly separable dataset") {
    const Dataset ds = separable_clusters(50, 5);
    const TrainedModel model = train(logreg_config(1), ds);
    std::size_t correct = 0;
    for (const auto& s : ds.samples) correct += predict(model, s.features) == s.label;
    CHECK(static_cast<double>(correct) / static_cast<double>(ds.size()) >= 0.99);
}

TEST_CASE("mlp parameter count matches the closed form") {
    CHECK(mlp_param_count(2, {10}) == 41);  // 2*10 + 10 + 10*1 + 1
    CHECK(mlp_param_count(2, {}) == 3);     // logistic regression on 2-D
    CHECK(mlp_param_count(2, {200, 100}) == 2 * 200 + 200 + 200 * 100 + 100 + 100 + 1);

    const Dataset ds = separable_clusters(10, 6);
    const TrainedModel model = train(mlp_config({10}, 2), ds);
    CHECK(model.param_count() == 41);
}

TEST_CASE("all-zero parameters give probability exactly 0.5 and predict 1") {
    TrainedModel model;
    model.family = LearnerFamily::logistic_regression;
    model.layer_dims = {2, 1};
    model.parameters = {0.0, 0.0, 0.0};
    model.feature_dim = 2;
    std::vector<double> x{3.7, -1.2};
    CHECK(predict_proba(model, x) == 0.5);
    CHECK(predict(model, x) == 1);
}

TEST_CASE("negating the network output complements the probability") {
    const Dataset ds = separable_clusters(20, 7);
    const TrainedModel model = train(logreg_config(3), ds);
    TrainedModel negated = model;
    for (auto& p : negated.parameters) p = -p;
    std::vector<double> x{0.4, 0.8};
    CHECK(predict_proba(model, x) + predict_proba(negated, x) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("output is strictly monotone in the final bias") {
    const Dataset ds = separable_clusters(20, 8);
    const TrainedModel model = train(mlp_config({5}, 4), ds);
    TrainedModel shifted = model;
    shifted.parameters.back() += 0.1;  // final bias is the last parameter
    std::vector<double> x{0.0, 0.0};
    CHECK(predict_proba(shifted, x) > predict_proba(model, x));
}

TEST_CASE("predict_proba rejects the oracle family") {
    LearnerConfig c;
    c.family = LearnerFamily::zero_local_oracle;
    const TrainedModel oracle = train(c, oracle_dataset({{0, 1}}));
    std::vector<double> x{0.0};
    CHECK_THROWS_AS(predict_proba(oracle, x), unsupported_error);
}

TEST_CASE("training is bit-for-bit reproducible") {
    const Dataset ds = separable_clusters(30, 9);
    const TrainedModel a = train(mlp_config({8}, 11), ds);
    const TrainedModel b = train(mlp_config({8}, 11), ds);
    CHECK(a.parameters == b.parameters);
    const TrainedModel c = train(mlp_config({8}, 12), ds);
    CHECK(a.parameters != c.parameters);
}

TEST_CASE("capacity grows along the model ladder") {
    // The ladder orders models by depth and node count. Parameter count
    // increases strictly through the 3-layer model; the 4-layer member trades
    // width for depth and lands slightly below it in raw parameters.
    const std::vector<std::vector<int>> ladder{
        {}, {10}, {100}, {200, 100}, {150, 150, 50}, {125, 125, 75, 50}};
    std::size_t prev = 0;
    for (std::size_t i = 0; i + 1 < ladder.size(); ++i) {
        const std::size_t count = mlp_param_count(2, ladder[i]);
        CHECK(count > prev);
        prev = count;
    }
    std::size_t prev_depth = 0;
    long prev_nodes = -1;
    for (const auto& hidden : ladder) {
        long nodes = 0;
        for (int h : hidden) nodes += h;
        CHECK(nodes > prev_nodes);
        CHECK(hidden.size() >= prev_depth);
        prev_nodes = nodes;
        prev_depth = hidden.size();
    }
}

TEST_CASE("training loss descends on non-degenerate data") {
    const Dataset ds = separable_clusters(40, 10);
    const TrainedModel model = train(mlp_config({10}, 13), ds);
    REQUIRE(!model.epoch_losses.empty());
    for (double l : model.epoch_losses) CHECK(std::isfinite(l));
    CHECK(model.epoch_losses.back() < model.epoch_losses.front());
}

TEST_CASE("diverging training reports a training error") {
    const Dataset ds = separable_clusters(20, 14);
    LearnerConfig c = mlp_config({8}, 15);
    c.learning_rate = 1e18;
    c.epochs = 8;
    CHECK_THROWS_AS(train(c, ds), training_error);
}

TEST_CASE("gradient check: logistic regression under 1e-5") {
    const Dataset ds = separable_clusters(5, 16);  // 10 samples
    LearnerConfig c = logreg_config(17);
    const auto report = gradient_check(c, ds, 1e-5);
    CHECK(report.passed);
    CHECK(report.max_rel_error < 1e-5);
}

TEST_CASE("gradient check: mlp under 1e-4, with and without l2") {
    const Dataset ds = separable_clusters(5, 18);
    LearnerConfig c = mlp_config({10}, 19);
    auto report = gradient_check(c, ds, 1e-4);
    CHECK(report.passed);

    c.l2_penalty = 0.01;
    report = gradient_check(c, ds, 1e-4);
    CHECK(report.passed);
}

TEST_CASE("analytic and numeric gradients share sign patterns") {
    const Dataset ds = separable_clusters(5, 20);
    const auto report = gradient_check(logreg_config(21), ds, 1e-5);
    // With a max relative error this small, every meaningful component pair
    // agrees in sign; spot-check the worst one.
    if (std::abs(report.analytic_at_worst) > 1e-8)
        CHECK((report.analytic_at_worst > 0) == (report.numeric_at_worst > 0));
}

TEST_CASE("model files round-trip through save and load") {
    const Dataset ds = separable_clusters(15, 22);
    const TrainedModel model = train(mlp_config({6}, 23), ds);
    const auto path = std::filesystem::temp_directory_path() / "poisonlab_model_test.json";
    save_model(model, path);
    const TrainedModel back = load_model(path);
    std::filesystem::remove(path);
    CHECK(back.parameters == model.parameters);
    CHECK(back.layer_dims == model.layer_dims);
    CHECK(back.family == model.family);
    CHECK(back.config.hidden_layers == model.config.hidden_layers);
}

TEST_CASE("config validation catches inconsistent families") {
    LearnerConfig mlp_missing;
    mlp_missing.family = LearnerFamily::mlp;
    CHECK_THROWS_AS(mlp_missing.validate(), validation_error);

    LearnerConfig logreg_with_hidden;
    logreg_with_hidden.family = LearnerFamily::logistic_regression;
    logreg_with_hidden.hidden_layers = {4};
    CHECK_THROWS_AS(logreg_with_hidden.validate(), validation_error);

    LearnerConfig bad_lr = logreg_config();
    bad_lr.learning_rate = 0.0;
    CHECK_THROWS_AS(bad_lr.validate(), validation_error);
}

TEST_CASE("model tags are stable") {
    CHECK(logreg_config().tag() == "logreg");
    CHECK(mlp_config({10}).tag() == "mlp_10");
    CHECK(mlp_config({200, 100}).tag() == "mlp_200_100");
    LearnerConfig oracle;
    oracle.family = LearnerFamily::zero_local_oracle;
    CHECK(oracle.tag() == "oracle");
}
