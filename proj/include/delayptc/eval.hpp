#pragma once

#include "delayptc/choice.hpp"
#include "delayptc/predictor.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace delayptc {

/// Positive class is Abandon.
struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
    ConfusionMatrix swapped() const { return {tn, fn, tp, fp}; }
};

struct MetricsReport {
    std::string model_id;
    double accuracy = 0.0;
    double recall = 0.0;
    double precision = 0.0;
    double f1 = 0.0;
    ConfusionMatrix matrix;
    std::size_t unresolved = 0;
    double coverage = 1.0;  // resolved / (resolved + unresolved)
    std::vector<std::string> flags;  // precision-undefined, recall-undefined, zero-recall, f1-undefined, f1-inconsistent, ...

    bool has_flag(std::string_view flag) const;
};

/// 2pr/(p+r), or 0 when p + r == 0.
double harmonic_f1(double precision, double recall);

MetricsReport metrics_from_counts(const std::string& model_id, const ConfusionMatrix& matrix);

/// Predictions and truth must cover the same keys; Unresolved predictions
/// are excluded from the matrix and counted separately. Throws Error with
/// code key-mismatch (listing orphans), unlabeled-truth or no-resolved-predictions.
MetricsReport compute_metrics(const std::string& model_id, const std::vector<Prediction>& predictions,
                              const std::vector<ChoiceRecord>& truth);

/// Report built from already-printed (rounded) numbers, e.g. a published table row.
MetricsReport report_from_printed(const std::string& model_id, double accuracy, double recall, double precision,
                                  double f1);

/// Adds f1-inconsistent when the F1 printed to two decimals differs from the
/// harmonic mean of the printed precision and recall by more than tolerance.
/// Returns true when consistent.
bool check_f1_consistency(MetricsReport& report, double tolerance = 0.01);

struct ComparisonTable {
    std::vector<MetricsReport> rows;  // ids disambiguated
    std::vector<std::string> warnings;
    std::string text;  // Model, Accuracy, Recall, Precision, F1-score at 2 decimals
    std::string json;  // full precision
};

ComparisonTable compare_models(std::vector<MetricsReport> reports);

/// Reads a printed comparison table (Model, Accuracy, Recall, Precision, F1-score).
std::vector<MetricsReport> parse_printed_table(std::string_view text);

}  // namespace delayptc
