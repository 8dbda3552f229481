#pragma once

#include "delayptc/choice.hpp"
#include "delayptc/common.hpp"
#include "delayptc/predictor.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace delayptc {

using FeatureRow = std::vector<double>;

/// One-hot v1 and v2 over the levels seen in training, then p1, p2 (0/1), p3.
struct FeatureEncoding {
    std::vector<DelayType> delay_types;
    std::vector<DelayPeriod> delay_periods;

    static FeatureEncoding fit(const std::vector<ChoiceRecord>& records);

    std::size_t width() const { return delay_types.size() + delay_periods.size() + 3; }
    std::vector<std::string> names() const;
    /// Unseen categorical levels encode as all zeros and set *unseen.
    FeatureRow encode(const ChoiceRecord& record, bool* unseen = nullptr) const;
};

/// Leaves have feature < 0. For classification trees the leaf value is the
/// predicted class (1 = Abandon); for boosting trees it is the raw score step.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;  // go left when value <= threshold
    int left = -1;
    int right = -1;
    double value = 0.0;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    double evaluate(const FeatureRow& row) const;
    int depth() const;
};

struct CartParams {
    int max_depth = 8;
    std::size_t min_samples_leaf = 1;
    std::size_t max_features = 0;  // per split; 0 = all
};

/// Gini classification tree on the given sample multiset (indices may
/// repeat). Thresholds are midpoints between adjacent distinct values; equal
/// impurity ties go to the lower feature, then the lower threshold. rng is
/// only drawn from when max_features < width.
DecisionTree fit_cart(const std::vector<FeatureRow>& rows, const std::vector<int>& labels,
                      const std::vector<std::size_t>& samples, const CartParams& params, Rng& rng);

enum class ModelKind { RandomForest, GradientBoosted, Majority };
std::string_view to_string(ModelKind kind);

struct ForestParams {
    std::size_t n_trees = 100;
    CartParams tree{10, 1, 0};
    bool bootstrap = true;
    bool sqrt_features = true;  // overrides tree.max_features with ceil(sqrt(width))
};

struct BoostingParams {
    std::size_t n_rounds = 100;
    double learning_rate = 0.1;
    int max_depth = 3;
    double l2 = 1.0;
    double min_child_hessian = 1e-3;
};

struct EnsembleParams {
    ModelKind kind = ModelKind::RandomForest;
    ForestParams forest;
    BoostingParams boosting;
};

struct TreeEnsembleModel {
    ModelKind kind = ModelKind::RandomForest;
    FeatureEncoding encoding;
    std::vector<DecisionTree> trees;
    double base_score = 0.0;     // boosting: initial log-odds
    double learning_rate = 0.0;  // boosting shrinkage
    std::uint64_t seed = 0;
    bool degenerate = false;     // single-class training set; predicts constant_label
    ChoiceLabel constant_label = ChoiceLabel::Wait;

    /// "RF", "GBT" or "Majority".
    std::string id() const;
    ChoiceLabel predict(const FeatureRow& row) const;
    /// Full structure with round-trip exact numbers, for reproducibility checks.
    std::string to_json() const;
};

/// Throws Error("empty-training-set") on an empty set. Majority-kind models
/// are always constant.
TreeEnsembleModel fit_tree_ensemble(const std::vector<ChoiceRecord>& train, const EnsembleParams& params,
                                    std::uint64_t seed);

/// Pure; rationale left empty.
std::vector<Prediction> predict_with_model(const TreeEnsembleModel& model, const std::vector<ChoiceRecord>& records);

}  // namespace delayptc
