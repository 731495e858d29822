#pragma once

#include "staplr/core.hpp"

#include <map>
#include <string>
#include <vector>

namespace staplr {

/// Mann-Whitney AUC with midranks for ties.  Throws UndefinedMetric when
/// only one class is present.
double auc(const Vector& scores, const Labels& labels);

/// Fraction of rows where (score >= cutoff) equals the label.
double accuracy(const Vector& scores, const Labels& labels, double cutoff = 0.5);

/// One fitted model's view selection, as consumed by selection_summary.
struct SelectionRecord {
    std::string method;
    std::string condition;
    int replication = 0;
    std::vector<int> selected_views;
    Index selected_features = 0;
    /// Per-view signal probability of the generating process.
    std::vector<double> view_signal_probs;
};

struct InclusionStats {
    double mean = 0.0;
    double q25 = 0.0;
    double median = 0.0;
    double q75 = 0.0;
    int views_in_group = 0;
};

struct MethodSummary {
    /// Keyed by signal probability.
    std::map<double, InclusionStats> inclusion;
    double mean_selected_views = 0.0;
    double mean_selected_features = 0.0;
    double fraction_selecting_none = 0.0;
    int models = 0;
};

struct SelectionSummary {
    /// Keyed by (condition, method).
    std::map<std::pair<std::string, std::string>, MethodSummary> cells;
};

/// Per replication, the share of views in each signal-probability group that
/// were selected; summarized over replications per (condition, method).
SelectionSummary selection_summary(const std::vector<SelectionRecord>& records);

/// Linear-interpolation quantile (type 7) of unsorted values.
double quantile(std::vector<double> values, double q);

}  // namespace staplr
