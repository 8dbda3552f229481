#include "delayptc/trees.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

using namespace delayptc;

namespace {

std::vector<ChoiceRecord> toy(std::uint64_t seed, std::size_t n, bool separable) {
    Rng rng(seed);
    std::vector<ChoiceRecord> out;
    const DelayType types[] = {DelayType::VehicleFault, DelayType::PowerFault, DelayType::Others};
    const DelayPeriod periods[] = {DelayPeriod::MorningPeak, DelayPeriod::EveningPeak, DelayPeriod::OffPeak};
    for (std::size_t i = 0; i < n; ++i) {
        ChoiceRecord r;
        r.card_id = std::to_string(i);
        r.event_id = 1;
        r.v1 = types[rng.uniform_int(0, 2)];
        r.v2 = periods[rng.uniform_int(0, 2)];
        r.p1 = std::round(rng.uniform(10, 60));
        r.p2 = rng.bernoulli(0.5);
        r.p3 = std::round(rng.uniform(0, 20) * 10) / 10;
        bool abandon = separable ? (!r.p2 && r.p3 < 6) : rng.bernoulli(0.2);
        r.label = abandon ? ChoiceLabel::Abandon : ChoiceLabel::Wait;
        out.push_back(r);
    }
    return out;
}

double train_accuracy(const TreeEnsembleModel& m, const std::vector<ChoiceRecord>& data) {
    std::size_t ok = 0;
    for (const auto& r : data) ok += m.predict(m.encoding.encode(r)) == *r.label;
    return static_cast<double>(ok) / static_cast<double>(data.size());
}

}  // namespace

TEST(Cart, DepthOneMatchesExhaustiveGiniOnFourPointFixtures) {
    // All 4-point fixtures over a small grid of 2-feature values and every labelling.
    Rng rng(8);
    std::size_t checked = 0, splits = 0;
    for (int round = 0; round < 400; ++round) {
        std::vector<FeatureRow> rows;
        std::vector<int> labels;
        for (int i = 0; i < 4; ++i) {
            rows.push_back({static_cast<double>(rng.uniform_int(0, 3)), static_cast<double>(rng.uniform_int(0, 3))});
            labels.push_back(static_cast<int>(rng.uniform_int(0, 1)));
        }
        Rng unused(0);
        auto tree = fit_cart(rows, labels, {0, 1, 2, 3}, {1, 1, 0}, unused);
        auto want = oracle::exhaustive_stump(rows, labels);
        ++checked;
        if (!want.split) {
            ASSERT_EQ(tree.nodes.size(), 1u) << "round " << round;
            ASSERT_EQ(tree.nodes[0].value, want.leaf);
            continue;
        }
        ++splits;
        ASSERT_EQ(tree.nodes.size(), 3u) << "round " << round;
        const auto& root = tree.nodes[0];
        ASSERT_EQ(root.feature, want.feature) << "round " << round;
        ASSERT_DOUBLE_EQ(root.threshold, want.threshold) << "round " << round;
        ASSERT_EQ(tree.nodes[static_cast<std::size_t>(root.left)].value, want.left);
        ASSERT_EQ(tree.nodes[static_cast<std::size_t>(root.right)].value, want.right);
    }
    EXPECT_EQ(checked, 400u);
    EXPECT_GT(splits, 100u);
}

TEST(Cart, RespectsDepthAndLeafSize) {
    auto data = toy(3, 200, false);
    auto enc = FeatureEncoding::fit(data);
    std::vector<FeatureRow> rows;
    std::vector<int> labels;
    std::vector<std::size_t> samples;
    for (std::size_t i = 0; i < data.size(); ++i) {
        rows.push_back(enc.encode(data[i]));
        labels.push_back(*data[i].label == ChoiceLabel::Abandon);
        samples.push_back(i);
    }
    Rng rng(1);
    for (int depth : {1, 2, 4}) EXPECT_LE(fit_cart(rows, labels, samples, {depth, 1, 0}, rng).depth(), depth);
    auto tree = fit_cart(rows, labels, samples, {20, 25, 0}, rng);
    std::map<int, int> leaf_sizes;
    for (const auto& r : rows) {
        int node = 0;
        while (tree.nodes[static_cast<std::size_t>(node)].feature >= 0) {
            const auto& nd = tree.nodes[static_cast<std::size_t>(node)];
            node = r[static_cast<std::size_t>(nd.feature)] <= nd.threshold ? nd.left : nd.right;
        }
        ++leaf_sizes[node];
    }
    for (auto [leaf, size] : leaf_sizes) EXPECT_GE(size, 25);
}

TEST(Forest, SingleUnbaggedTreeEqualsCart) {
    auto data = toy(5, 150, false);
    EnsembleParams params;
    params.forest.n_trees = 1;
    params.forest.bootstrap = false;
    params.forest.sqrt_features = false;
    params.forest.tree = {6, 2, 0};
    auto model = fit_tree_ensemble(data, params, 77);
    ASSERT_EQ(model.trees.size(), 1u);

    std::vector<FeatureRow> rows;
    std::vector<int> labels;
    std::vector<std::size_t> samples;
    for (std::size_t i = 0; i < data.size(); ++i) {
        rows.push_back(model.encoding.encode(data[i]));
        labels.push_back(*data[i].label == ChoiceLabel::Abandon);
        samples.push_back(i);
    }
    Rng rng(123);
    auto tree = fit_cart(rows, labels, samples, params.forest.tree, rng);
    ASSERT_EQ(tree.nodes.size(), model.trees[0].nodes.size());
    for (const auto& probe : toy(99, 500, false)) {
        auto row = model.encoding.encode(probe);
        EXPECT_EQ(model.predict(row), tree.evaluate(row) > 0.5 ? ChoiceLabel::Abandon : ChoiceLabel::Wait);
    }
}

TEST(Ensembles, FixedSeedIsBitStable) {
    auto data = toy(6, 300, false);
    for (auto kind : {ModelKind::RandomForest, ModelKind::GradientBoosted}) {
        EnsembleParams params;
        params.kind = kind;
        params.forest.n_trees = 20;
        params.boosting.n_rounds = 20;
        auto a = fit_tree_ensemble(data, params, 42).to_json();
        auto b = fit_tree_ensemble(data, params, 42).to_json();
        EXPECT_EQ(a, b);
        if (kind == ModelKind::RandomForest) EXPECT_NE(a, fit_tree_ensemble(data, params, 43).to_json());
    }
}

TEST(Ensembles, SeparableToySetIsLearnedExactly) {
    auto data = toy(7, 400, true);
    for (auto kind : {ModelKind::RandomForest, ModelKind::GradientBoosted}) {
        EnsembleParams params;
        params.kind = kind;
        auto model = fit_tree_ensemble(data, params, 1);
        EXPECT_DOUBLE_EQ(train_accuracy(model, data), 1.0) << model.id();
    }
}

TEST(Ensembles, MajorityAndDegenerateModels) {
    auto data = toy(9, 200, false);
    EnsembleParams params;
    params.kind = ModelKind::Majority;
    auto m = fit_tree_ensemble(data, params, 1);
    EXPECT_EQ(m.id(), "Majority");
    for (const auto& p : predict_with_model(m, data)) EXPECT_EQ(p.label, ChoiceLabel::Wait);

    for (auto& r : data) r.label = ChoiceLabel::Abandon;
    params.kind = ModelKind::GradientBoosted;
    auto d = fit_tree_ensemble(data, params, 1);
    EXPECT_TRUE(d.degenerate);
    EXPECT_EQ(d.predict(d.encoding.encode(data[0])), ChoiceLabel::Abandon);

    try {
        fit_tree_ensemble({}, params, 1);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "empty-training-set");
    }
}

TEST(Encoding, UnseenLevelsEncodeAsZeros) {
    auto data = toy(10, 50, false);
    for (auto& r : data) r.v1 = DelayType::PowerFault;
    auto enc = FeatureEncoding::fit(data);
    EXPECT_EQ(enc.width(), 1 + enc.delay_periods.size() + 3);
    auto probe = data[0];
    probe.v1 = DelayType::SignalingFault;
    bool unseen = false;
    auto row = enc.encode(probe, &unseen);
    EXPECT_TRUE(unseen);
    EXPECT_EQ(row[0], 0.0);
    EXPECT_EQ(enc.names().back(), "p3");
}
