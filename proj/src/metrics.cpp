#include "staplr/metrics.hpp"

#include "staplr/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace staplr {

double auc(const Vector& scores, const Labels& labels) {
    if (scores.size() != labels.size()) throw InvalidArgument("scores and labels differ in length");
    require_binary(labels);
    const Index n = scores.size();
    const Index pos = labels.sum();
    const Index neg = n - pos;
    if (pos == 0 || neg == 0) throw UndefinedMetric("AUC needs both classes");
    if (!scores.allFinite()) throw InvalidArgument("AUC scores must be finite");

    std::vector<Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](Index a, Index b) { return scores[a] < scores[b]; });
    // Sum of midranks of the positives.
    double rank_sum = 0.0;
    std::size_t i = 0;
    while (i < order.size()) {
        std::size_t j = i;
        while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
        const double midrank = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            if (labels[order[k]] == 1) rank_sum += midrank;
        i = j + 1;
    }
    const double p = static_cast<double>(pos);
    return (rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(neg));
}

double accuracy(const Vector& scores, const Labels& labels, double cutoff) {
    if (scores.size() != labels.size()) throw InvalidArgument("scores and labels differ in length");
    if (scores.size() == 0) throw InvalidArgument("accuracy of an empty sample");
    Index hits = 0;
    for (Index i = 0; i < scores.size(); ++i)
        hits += (scores[i] >= cutoff ? 1 : 0) == labels[i];
    return static_cast<double>(hits) / static_cast<double>(scores.size());
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

SelectionSummary selection_summary(const std::vector<SelectionRecord>& records) {
    struct Accumulator {
        std::map<double, std::vector<double>> shares;
        std::map<double, int> group_size;
        std::vector<double> views, features;
        int none = 0;
    };
    std::map<std::pair<std::string, std::string>, Accumulator> acc;
    for (const auto& rec : records) {
        auto& a = acc[{rec.condition, rec.method}];
        std::map<double, int> total, hit;
        for (double p : rec.view_signal_probs) ++total[p];
        for (int v : rec.selected_views) {
            if (v < 0 || static_cast<std::size_t>(v) >= rec.view_signal_probs.size())
                throw InvalidArgument("selected view id out of range");
            ++hit[rec.view_signal_probs[static_cast<std::size_t>(v)]];
        }
        for (const auto& [p, count] : total) {
            a.shares[p].push_back(static_cast<double>(hit[p]) / count);
            a.group_size[p] = count;
        }
        a.views.push_back(static_cast<double>(rec.selected_views.size()));
        a.features.push_back(static_cast<double>(rec.selected_features));
        a.none += rec.selected_views.empty() ? 1 : 0;
    }
    SelectionSummary summary;
    for (auto& [key, a] : acc) {
        MethodSummary m;
        m.models = static_cast<int>(a.views.size());
        for (auto& [p, shares] : a.shares) {
            InclusionStats s;
            s.mean = std::accumulate(shares.begin(), shares.end(), 0.0) / static_cast<double>(shares.size());
            s.q25 = quantile(shares, 0.25);
            s.median = quantile(shares, 0.5);
            s.q75 = quantile(shares, 0.75);
            s.views_in_group = a.group_size[p];
            m.inclusion[p] = s;
        }
        m.mean_selected_views =
            std::accumulate(a.views.begin(), a.views.end(), 0.0) / static_cast<double>(m.models);
        m.mean_selected_features =
            std::accumulate(a.features.begin(), a.features.end(), 0.0) / static_cast<double>(m.models);
        m.fraction_selecting_none = static_cast<double>(a.none) / static_cast<double>(m.models);
        summary.cells[key] = std::move(m);
    }
    return summary;
}

}  // namespace staplr
