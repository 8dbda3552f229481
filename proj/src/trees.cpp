#include "delayptc/trees.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace delayptc {

FeatureEncoding FeatureEncoding::fit(const std::vector<ChoiceRecord>& records) {
    FeatureEncoding enc;
    for (auto t : kAllDelayTypes)
        if (std::any_of(records.begin(), records.end(), [&](const ChoiceRecord& r) { return r.v1 == t; }))
            enc.delay_types.push_back(t);
    for (auto p : {DelayPeriod::MorningPeak, DelayPeriod::EveningPeak, DelayPeriod::OffPeak})
        if (std::any_of(records.begin(), records.end(), [&](const ChoiceRecord& r) { return r.v2 == p; }))
            enc.delay_periods.push_back(p);
    return enc;
}

std::vector<std::string> FeatureEncoding::names() const {
    std::vector<std::string> out;
    for (auto t : delay_types) out.push_back("v1=" + std::string(to_string(t)));
    for (auto p : delay_periods) out.push_back("v2=" + std::string(to_string(p)));
    out.insert(out.end(), {"p1", "p2", "p3"});
    return out;
}

FeatureRow FeatureEncoding::encode(const ChoiceRecord& r, bool* unseen) const {
    FeatureRow row(width(), 0.0);
    bool seen_type = false;
    bool seen_period = false;
    for (std::size_t i = 0; i < delay_types.size(); ++i)
        if (delay_types[i] == r.v1) row[i] = 1.0, seen_type = true;
    for (std::size_t i = 0; i < delay_periods.size(); ++i)
        if (delay_periods[i] == r.v2) row[delay_types.size() + i] = 1.0, seen_period = true;
    auto base = delay_types.size() + delay_periods.size();
    row[base] = r.p1;
    row[base + 1] = r.p2 ? 1.0 : 0.0;
    row[base + 2] = r.p3;
    if (unseen) *unseen = !seen_type || !seen_period;
    return row;
}

double DecisionTree::evaluate(const FeatureRow& row) const {
    std::size_t i = 0;
    while (nodes[i].feature >= 0) {
        const auto& n = nodes[i];
        i = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[i].value;
}

int DecisionTree::depth() const {
    std::vector<int> d(nodes.size(), 0);
    int best = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].feature < 0) continue;
        d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
        d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
        best = std::max(best, d[i] + 1);
    }
    return best;
}

namespace {

constexpr double kMinGain = 1e-12;

struct Split {
    int feature = -1;
    double threshold = 0.0;
    double score = 0.0;
};

// Candidate features for one split, ascending so ties resolve to the lowest index.
std::vector<std::size_t> pick_features(std::size_t width, std::size_t max_features, Rng& rng) {
    std::vector<std::size_t> all(width);
    std::iota(all.begin(), all.end(), 0);
    if (max_features == 0 || max_features >= width) return all;
    for (std::size_t i = 0; i < max_features; ++i) {
        auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i), static_cast<std::int64_t>(width) - 1));
        std::swap(all[i], all[j]);
    }
    all.resize(max_features);
    std::sort(all.begin(), all.end());
    return all;
}

std::vector<std::size_t> sorted_by(const std::vector<FeatureRow>& rows, const std::vector<std::size_t>& samples,
                                   std::size_t f) {
    auto order = samples;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return rows[a][f] < rows[b][f]; });
    return order;
}

double gini(double pos, double n) {
    if (n <= 0) return 0.0;
    double p = pos / n;
    return 1.0 - p * p - (1.0 - p) * (1.0 - p);
}

class CartBuilder {
public:
    CartBuilder(const std::vector<FeatureRow>& rows, const std::vector<int>& labels, const CartParams& params, Rng& rng)
        : rows_(rows), labels_(labels), params_(params), rng_(rng) {}

    int build(const std::vector<std::size_t>& samples, int depth) {
        double pos = 0;
        for (auto s : samples) pos += labels_[s];
        double n = static_cast<double>(samples.size());
        int index = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes.back().value = pos > n - pos ? 1.0 : 0.0;  // ties go to Wait
        if (depth >= params_.max_depth || pos == 0 || pos == n || samples.size() < 2 * params_.min_samples_leaf)
            return index;

        double parent = gini(pos, n);
        Split best;
        best.score = parent - kMinGain;  // weighted child impurity must beat this
        std::size_t width = rows_[samples.front()].size();
        for (auto f : pick_features(width, params_.max_features, rng_)) {
            auto order = sorted_by(rows_, samples, f);
            double left_pos = 0;
            for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                left_pos += labels_[order[i]];
                double a = rows_[order[i]][f];
                double b = rows_[order[i + 1]][f];
                if (a == b) continue;
                double nl = static_cast<double>(i + 1);
                double nr = n - nl;
                if (i + 1 < params_.min_samples_leaf || order.size() - i - 1 < params_.min_samples_leaf) continue;
                double score = (nl * gini(left_pos, nl) + nr * gini(pos - left_pos, nr)) / n;
                if (score < best.score) best = {static_cast<int>(f), a + (b - a) / 2.0, score};
            }
        }
        if (best.feature < 0) return index;

        std::vector<std::size_t> left, right;
        for (auto s : samples)
            (rows_[s][static_cast<std::size_t>(best.feature)] <= best.threshold ? left : right).push_back(s);
        int l = build(left, depth + 1);
        int r = build(right, depth + 1);
        auto& node = tree.nodes[static_cast<std::size_t>(index)];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = l;
        node.right = r;
        return index;
    }

    DecisionTree tree;

private:
    const std::vector<FeatureRow>& rows_;
    const std::vector<int>& labels_;
    const CartParams& params_;
    Rng& rng_;
};

// Second-order regression tree on logistic-loss gradients.
class NewtonBuilder {
public:
    NewtonBuilder(const std::vector<FeatureRow>& rows, const std::vector<double>& grad, const std::vector<double>& hess,
                  const BoostingParams& params)
        : rows_(rows), grad_(grad), hess_(hess), params_(params) {}

    int build(const std::vector<std::size_t>& samples, int depth) {
        double g = 0, h = 0;
        for (auto s : samples) g += grad_[s], h += hess_[s];
        int index = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back({});
        tree.nodes.back().value = -g / (h + params_.l2);
        if (depth >= params_.max_depth || samples.size() < 2) return index;

        double parent = g * g / (h + params_.l2);
        Split best;
        best.score = kMinGain;
        std::size_t width = rows_[samples.front()].size();
        for (std::size_t f = 0; f < width; ++f) {
            auto order = sorted_by(rows_, samples, f);
            double gl = 0, hl = 0;
            for (std::size_t i = 0; i + 1 < order.size(); ++i) {
                gl += grad_[order[i]];
                hl += hess_[order[i]];
                double a = rows_[order[i]][f];
                double b = rows_[order[i + 1]][f];
                if (a == b) continue;
                double gr = g - gl, hr = h - hl;
                if (hl < params_.min_child_hessian || hr < params_.min_child_hessian) continue;
                double gain = gl * gl / (hl + params_.l2) + gr * gr / (hr + params_.l2) - parent;
                if (gain > best.score) best = {static_cast<int>(f), a + (b - a) / 2.0, gain};
            }
        }
        if (best.feature < 0) return index;

        std::vector<std::size_t> left, right;
        for (auto s : samples)
            (rows_[s][static_cast<std::size_t>(best.feature)] <= best.threshold ? left : right).push_back(s);
        int l = build(left, depth + 1);
        int r = build(right, depth + 1);
        auto& node = tree.nodes[static_cast<std::size_t>(index)];
        node.feature = best.feature;
        node.threshold = best.threshold;
        node.left = l;
        node.right = r;
        return index;
    }

    DecisionTree tree;

private:
    const std::vector<FeatureRow>& rows_;
    const std::vector<double>& grad_;
    const std::vector<double>& hess_;
    const BoostingParams& params_;
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

DecisionTree fit_cart(const std::vector<FeatureRow>& rows, const std::vector<int>& labels,
                      const std::vector<std::size_t>& samples, const CartParams& params, Rng& rng) {
    if (samples.empty()) throw Error("empty-training-set", "no samples for tree");
    CartBuilder builder(rows, labels, params, rng);
    builder.build(samples, 0);
    return std::move(builder.tree);
}

std::string_view to_string(ModelKind kind) {
    switch (kind) {
    case ModelKind::RandomForest: return "RandomForest";
    case ModelKind::GradientBoosted: return "GradientBoosted";
    case ModelKind::Majority: return "Majority";
    }
    return "";
}

std::string TreeEnsembleModel::id() const {
    switch (kind) {
    case ModelKind::RandomForest: return "RF";
    case ModelKind::GradientBoosted: return "GBT";
    case ModelKind::Majority: return "Majority";
    }
    return "";
}

ChoiceLabel TreeEnsembleModel::predict(const FeatureRow& row) const {
    if (degenerate || kind == ModelKind::Majority) return constant_label;
    if (kind == ModelKind::RandomForest) {
        std::size_t votes = 0;
        for (const auto& t : trees) votes += t.evaluate(row) > 0.5 ? 1 : 0;
        return 2 * votes > trees.size() ? ChoiceLabel::Abandon : ChoiceLabel::Wait;
    }
    double score = base_score;
    for (const auto& t : trees) score += learning_rate * t.evaluate(row);
    return score > 0.0 ? ChoiceLabel::Abandon : ChoiceLabel::Wait;
}

std::string TreeEnsembleModel::to_json() const {
    nlohmann::ordered_json j;
    j["kind"] = to_string(kind);
    j["seed"] = seed;
    j["degenerate"] = degenerate;
    j["constant_label"] = to_string(constant_label);
    j["features"] = encoding.names();
    j["base_score"] = base_score;
    j["learning_rate"] = learning_rate;
    j["trees"] = nlohmann::ordered_json::array();
    for (const auto& t : trees) {
        auto nodes = nlohmann::ordered_json::array();
        for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.value});
        j["trees"].push_back(std::move(nodes));
    }
    return j.dump();
}

TreeEnsembleModel fit_tree_ensemble(const std::vector<ChoiceRecord>& train, const EnsembleParams& params,
                                    std::uint64_t seed) {
    if (train.empty()) throw Error("empty-training-set", "cannot fit a model on zero records");
    TreeEnsembleModel model;
    model.kind = params.kind;
    model.seed = seed;
    model.encoding = FeatureEncoding::fit(train);

    std::vector<FeatureRow> rows;
    std::vector<int> labels;
    std::size_t positives = 0;
    for (const auto& r : train) {
        if (!r.label) throw Error("unlabeled-record", r.card_id + "/" + std::to_string(r.event_id));
        rows.push_back(model.encoding.encode(r));
        labels.push_back(*r.label == ChoiceLabel::Abandon ? 1 : 0);
        positives += static_cast<std::size_t>(labels.back());
    }
    std::size_t n = train.size();
    model.constant_label = 2 * positives > n ? ChoiceLabel::Abandon : ChoiceLabel::Wait;
    if (positives == 0 || positives == n) {
        model.degenerate = true;
        spdlog::warn("{} training set has a single class; model is constant {}", model.id(),
                     to_string(model.constant_label));
        return model;
    }
    if (params.kind == ModelKind::Majority) return model;

    Rng rng(seed);
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), 0);

    if (params.kind == ModelKind::RandomForest) {
        CartParams tree_params = params.forest.tree;
        if (params.forest.sqrt_features)
            tree_params.max_features =
                static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(model.encoding.width()))));
        for (std::size_t t = 0; t < params.forest.n_trees; ++t) {
            Rng tree_rng(rng.next());
            std::vector<std::size_t> samples = all;
            if (params.forest.bootstrap)
                for (auto& s : samples) s = static_cast<std::size_t>(tree_rng.uniform_int(0, static_cast<std::int64_t>(n) - 1));
            model.trees.push_back(fit_cart(rows, labels, samples, tree_params, tree_rng));
        }
        return model;
    }

    const auto& bp = params.boosting;
    model.learning_rate = bp.learning_rate;
    model.base_score = std::log(static_cast<double>(positives) / static_cast<double>(n - positives));
    std::vector<double> score(n, model.base_score), grad(n), hess(n);
    for (std::size_t round = 0; round < bp.n_rounds; ++round) {
        for (std::size_t i = 0; i < n; ++i) {
            double p = sigmoid(score[i]);
            grad[i] = p - labels[i];
            hess[i] = std::max(p * (1.0 - p), 1e-16);
        }
        NewtonBuilder builder(rows, grad, hess, bp);
        builder.build(all, 0);
        for (std::size_t i = 0; i < n; ++i) score[i] += bp.learning_rate * builder.tree.evaluate(rows[i]);
        model.trees.push_back(std::move(builder.tree));
    }
    return model;
}

std::vector<Prediction> predict_with_model(const TreeEnsembleModel& model, const std::vector<ChoiceRecord>& records) {
    std::vector<Prediction> out;
    out.reserve(records.size());
    std::size_t unseen_count = 0;
    for (const auto& r : records) {
        bool unseen = false;
        auto row = model.encoding.encode(r, &unseen);
        unseen_count += unseen ? 1 : 0;
        Prediction p;
        p.key = r.key();
        p.label = model.predict(row);
        p.backend = model.id();
        out.push_back(std::move(p));
    }
    if (unseen_count > 0)
        spdlog::warn("{}: {} record(s) carry categorical levels absent from training; encoded as zeros", model.id(),
                     unseen_count);
    return out;
}

}  // namespace delayptc
