#include "delayptc/eval.hpp"

#include <fmt/format.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

namespace delayptc {

bool MetricsReport::has_flag(std::string_view flag) const {
    return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

double harmonic_f1(double precision, double recall) {
    if (precision + recall <= 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

MetricsReport metrics_from_counts(const std::string& model_id, const ConfusionMatrix& m) {
    MetricsReport r;
    r.model_id = model_id;
    r.matrix = m;
    auto total = static_cast<double>(m.total());
    r.accuracy = total > 0 ? static_cast<double>(m.tp + m.tn) / total : 0.0;
    if (m.tp + m.fp == 0) {
        r.flags.push_back("precision-undefined");
        r.flags.push_back("no-positive-predictions");
    } else {
        r.precision = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fp);
    }
    if (m.tp + m.fn == 0)
        r.flags.push_back("recall-undefined");
    else
        r.recall = static_cast<double>(m.tp) / static_cast<double>(m.tp + m.fn);
    if (m.tp + m.fn > 0 && m.tp == 0) r.flags.push_back("zero-recall");
    if (r.precision + r.recall <= 0.0) r.flags.push_back("f1-undefined");
    r.f1 = harmonic_f1(r.precision, r.recall);
    return r;
}

MetricsReport compute_metrics(const std::string& model_id, const std::vector<Prediction>& predictions,
                              const std::vector<ChoiceRecord>& truth) {
    std::map<RecordKey, ChoiceLabel> expected;
    for (const auto& t : truth) {
        if (!t.label) throw Error("unlabeled-truth", t.card_id + "/" + std::to_string(t.event_id));
        expected.emplace(t.key(), *t.label);
    }
    std::vector<std::string> orphans;
    std::map<RecordKey, const Prediction*> got;
    for (const auto& p : predictions) {
        if (!expected.contains(p.key)) orphans.push_back(fmt::format("prediction {}/{}", p.key.card_id, p.key.event_id));
        got.emplace(p.key, &p);
    }
    for (const auto& [key, label] : expected)
        if (!got.contains(key)) orphans.push_back(fmt::format("truth {}/{}", key.card_id, key.event_id));
    if (!orphans.empty()) {
        std::string list;
        for (std::size_t i = 0; i < orphans.size() && i < 20; ++i) list += (i ? ", " : "") + orphans[i];
        if (orphans.size() > 20) list += fmt::format(" and {} more", orphans.size() - 20);
        throw Error("key-mismatch", list);
    }

    ConfusionMatrix m;
    std::size_t unresolved = 0;
    for (const auto& [key, p] : got) {
        if (!p->label) {
            ++unresolved;
            continue;
        }
        bool actual = expected.at(key) == ChoiceLabel::Abandon;
        bool predicted = *p->label == ChoiceLabel::Abandon;
        if (predicted && actual) ++m.tp;
        else if (predicted) ++m.fp;
        else if (actual) ++m.fn;
        else ++m.tn;
    }
    if (m.total() == 0) throw Error("no-resolved-predictions", model_id + " resolved no predictions");
    auto r = metrics_from_counts(model_id, m);
    r.unresolved = unresolved;
    r.coverage = static_cast<double>(m.total()) / static_cast<double>(m.total() + unresolved);
    return r;
}

MetricsReport report_from_printed(const std::string& model_id, double accuracy, double recall, double precision,
                                  double f1) {
    MetricsReport r;
    r.model_id = model_id;
    r.accuracy = accuracy;
    r.recall = recall;
    r.precision = precision;
    r.f1 = f1;
    return r;
}

namespace {

double round2(double x) { return std::round(x * 100.0) / 100.0; }

}  // namespace

bool check_f1_consistency(MetricsReport& report, double tolerance) {
    double recomputed = harmonic_f1(round2(report.precision), round2(report.recall));
    bool ok = std::abs(recomputed - round2(report.f1)) <= tolerance + 1e-12;
    if (!ok && !report.has_flag("f1-inconsistent")) report.flags.push_back("f1-inconsistent");
    return ok;
}

ComparisonTable compare_models(std::vector<MetricsReport> reports) {
    ComparisonTable table;
    std::map<std::string, int> seen;
    for (auto& r : reports) {
        int n = ++seen[r.model_id];
        if (n > 1) {
            auto renamed = fmt::format("{}#{}", r.model_id, n);
            table.warnings.push_back(fmt::format("duplicate model id {} renamed to {}", r.model_id, renamed));
            spdlog::warn("{}", table.warnings.back());
            r.model_id = renamed;
        }
    }

    std::size_t width = 5;
    for (const auto& r : reports) width = std::max(width, r.model_id.size());
    table.text = fmt::format("{:<{}}  {:>8}  {:>6}  {:>9}  {:>8}\n", "Model", width, "Accuracy", "Recall", "Precision",
                             "F1-score");
    nlohmann::ordered_json j = nlohmann::ordered_json::array();
    for (const auto& r : reports) {
        table.text += fmt::format("{:<{}}  {:>8}  {:>6}  {:>9}  {:>8}", r.model_id, width, format_decimal(r.accuracy, 2),
                                  format_decimal(r.recall, 2), format_decimal(r.precision, 2),
                                  format_decimal(r.f1, 2));
        if (!r.flags.empty()) {
            std::string joined;
            for (const auto& f : r.flags) joined += (joined.empty() ? "" : ",") + f;
            table.text += "  [" + joined + "]";
        }
        table.text += "\n";

        nlohmann::ordered_json row;
        row["model"] = r.model_id;
        row["accuracy"] = r.accuracy;
        row["recall"] = r.recall;
        row["precision"] = r.precision;
        row["f1"] = r.f1;
        row["tp"] = r.matrix.tp;
        row["fp"] = r.matrix.fp;
        row["tn"] = r.matrix.tn;
        row["fn"] = r.matrix.fn;
        row["unresolved"] = r.unresolved;
        row["coverage"] = r.coverage;
        row["flags"] = r.flags;
        j.push_back(std::move(row));
    }
    table.json = j.dump(2) + "\n";
    table.rows = std::move(reports);
    return table;
}

std::vector<MetricsReport> parse_printed_table(std::string_view text) {
    std::vector<MetricsReport> out;
    std::size_t line_no = 0;
    for (const auto& line : split(text, '\n')) {
        ++line_no;
        if (trim(line).empty()) continue;
        auto f = split_row(line);
        if (f.size() != 5) throw Error("malformed-table", fmt::format("line {}: expected 5 columns", line_no));
        if (to_lower(f[0]) == "model") continue;
        double v[4];
        for (int i = 0; i < 4; ++i) {
            const auto& cell = f[static_cast<std::size_t>(i + 1)];
            auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v[i]);
            if (ec != std::errc{}) throw Error("malformed-table", fmt::format("line {}: bad number {}", line_no, cell));
        }
        out.push_back(report_from_printed(f[0], v[0], v[1], v[2], v[3]));
    }
    return out;
}

}  // namespace delayptc
