#include "delayptc/eval.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace delayptc;

namespace {

ChoiceRecord truth(const std::string& card, ChoiceLabel label) {
    ChoiceRecord r;
    r.card_id = card;
    r.event_id = 1;
    r.label = label;
    return r;
}

Prediction pred(const std::string& card, std::optional<ChoiceLabel> label) { return {{card, 1}, label, "", "t", 0}; }

constexpr auto W = ChoiceLabel::Wait;
constexpr auto A = ChoiceLabel::Abandon;

}  // namespace

TEST(Metrics, HandComputedConfusion) {
    std::vector<ChoiceRecord> t = {truth("a", A), truth("b", A), truth("c", W), truth("d", W), truth("e", W)};
    std::vector<Prediction> p = {pred("a", A), pred("b", W), pred("c", A), pred("d", W), pred("e", W)};
    auto r = compute_metrics("m", p, t);
    EXPECT_EQ(r.matrix.tp, 1u);
    EXPECT_EQ(r.matrix.fn, 1u);
    EXPECT_EQ(r.matrix.fp, 1u);
    EXPECT_EQ(r.matrix.tn, 2u);
    EXPECT_DOUBLE_EQ(r.accuracy, 0.6);
    EXPECT_DOUBLE_EQ(r.recall, 0.5);
    EXPECT_DOUBLE_EQ(r.precision, 0.5);
    EXPECT_DOUBLE_EQ(r.f1, 0.5);
    EXPECT_TRUE(r.flags.empty());
}

TEST(Metrics, RandomMatricesAgreeWithDirectFormulae) {
    Rng rng(12);
    for (int i = 0; i < 500; ++i) {
        ConfusionMatrix m{static_cast<std::size_t>(rng.uniform_int(0, 30)), static_cast<std::size_t>(rng.uniform_int(0, 30)),
                          static_cast<std::size_t>(rng.uniform_int(0, 30)), static_cast<std::size_t>(rng.uniform_int(0, 30))};
        if (m.total() == 0) continue;
        auto r = metrics_from_counts("m", m);
        double tp = static_cast<double>(m.tp), fp = static_cast<double>(m.fp), tn = static_cast<double>(m.tn),
               fn = static_cast<double>(m.fn);
        ASSERT_DOUBLE_EQ(r.accuracy, (tp + tn) / (tp + fp + tn + fn));
        if (m.tp + m.fp > 0) ASSERT_DOUBLE_EQ(r.precision, tp / (tp + fp));
        if (m.tp + m.fn > 0) ASSERT_DOUBLE_EQ(r.recall, tp / (tp + fn));
        if (m.tp > 0) ASSERT_NEAR(r.f1, 2 * tp / (2 * tp + fp + fn), 1e-12);
        ASSERT_GE(r.f1, 0.0);
        ASSERT_LE(r.f1, 1.0);
        ASSERT_LE(r.f1, std::max(r.precision, r.recall) + 1e-12);
        ASSERT_GE(r.f1, std::min(r.precision, r.recall) - 1e-12);

        // Swapping the positive class keeps accuracy and turns specificity into recall.
        auto s = metrics_from_counts("m", m.swapped());
        ASSERT_DOUBLE_EQ(s.accuracy, r.accuracy);
        if (m.tn + m.fp > 0) ASSERT_DOUBLE_EQ(s.recall, tn / (tn + fp));
        ASSERT_EQ(m.swapped().swapped().tp, m.tp);
    }
}

TEST(Metrics, MajorityBaselineIsFlagged) {
    std::vector<ChoiceRecord> t;
    std::vector<Prediction> p;
    for (int i = 0; i < 100; ++i) {
        t.push_back(truth(std::to_string(i), i < 19 ? A : W));
        p.push_back(pred(std::to_string(i), W));
    }
    auto r = compute_metrics("Majority", p, t);
    EXPECT_DOUBLE_EQ(r.accuracy, 0.81);
    EXPECT_EQ(r.recall, 0.0);
    EXPECT_TRUE(r.has_flag("precision-undefined"));
    EXPECT_TRUE(r.has_flag("zero-recall"));
    EXPECT_TRUE(r.has_flag("f1-undefined"));
}

TEST(Metrics, UnresolvedLowersCoverageNotAccuracy) {
    std::vector<ChoiceRecord> t = {truth("a", A), truth("b", W), truth("c", W), truth("d", W)};
    std::vector<Prediction> p = {pred("a", A), pred("b", W), pred("c", std::nullopt), pred("d", W)};
    auto r = compute_metrics("m", p, t);
    EXPECT_EQ(r.unresolved, 1u);
    EXPECT_DOUBLE_EQ(r.coverage, 0.75);
    EXPECT_DOUBLE_EQ(r.accuracy, 1.0);
}

TEST(Metrics, KeyMismatchAndUnlabeledTruthAreErrors) {
    std::vector<ChoiceRecord> t = {truth("a", A), truth("b", W)};
    try {
        compute_metrics("m", {pred("a", A), pred("z", W)}, t);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "key-mismatch");
        EXPECT_NE(std::string(e.what()).find("prediction z/1"), std::string::npos);
        EXPECT_NE(std::string(e.what()).find("truth b/1"), std::string::npos);
    }
    auto unlabeled = t;
    unlabeled[1].label.reset();
    try {
        compute_metrics("m", {pred("a", A), pred("b", W)}, unlabeled);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "unlabeled-truth");
    }
    try {
        compute_metrics("m", {pred("a", std::nullopt), pred("b", std::nullopt)}, t);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), "no-resolved-predictions");
    }
}

TEST(F1Audit, PublishedRows) {
    // Harmonic mean of the printed precision and recall, computed here directly.
    auto f1 = [](double p, double r) { return 2 * p * r / (p + r); };
    EXPECT_NEAR(harmonic_f1(0.52, 0.86), 0.65, 0.005);
    EXPECT_NEAR(f1(0.66, 0.50), 0.569, 0.001);

    auto rows = parse_printed_table(read_file(std::string(DELAYPTC_DATA_DIR) + "/table3.tsv"));
    ASSERT_EQ(rows.size(), 7u);
    std::map<std::string, bool> consistent;
    for (auto& r : rows) {
        bool ok = check_f1_consistency(r);
        EXPECT_EQ(ok, std::abs(f1(r.precision, r.recall) - r.f1) <= 0.01 + 1e-12) << r.model_id;
        EXPECT_EQ(ok, !r.has_flag("f1-inconsistent"));
        consistent[r.model_id] = ok;
    }
    EXPECT_TRUE(consistent.at("GPT-4"));
    EXPECT_FALSE(consistent.at("DelayPTC-LLM"));
    EXPECT_TRUE(consistent.at("LGBM"));
    EXPECT_TRUE(consistent.at("RF +GPT-4"));
    EXPECT_TRUE(consistent.at("LGBM +GPT-4"));
    // These two rows are also off by more than 0.01.
    EXPECT_FALSE(consistent.at("GPT-4o"));
    EXPECT_FALSE(consistent.at("RF"));
}

TEST(Comparison, TableAndDuplicateIds) {
    auto a = metrics_from_counts("RF", {5, 5, 80, 10});
    auto table = compare_models({a, a});
    ASSERT_EQ(table.warnings.size(), 1u);
    EXPECT_EQ(table.rows[1].model_id, "RF#2");
    EXPECT_NE(table.text.find("Model"), std::string::npos);
    EXPECT_NE(table.text.find("RF#2"), std::string::npos);
    EXPECT_EQ(compare_models({a, a}).text, table.text);
    EXPECT_THROW(parse_printed_table("Model\tAccuracy\nx\t1\n"), Error);
}
