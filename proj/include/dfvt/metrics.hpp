// SPDX-License-Identifier: Apache-2.0
//
// Binary classification metrics with "fake" (1) as the positive class,
// probability fusion, and the cumulative accuracy table of sequential
// fine-tuning.

#ifndef DFVT_METRICS_HPP
#define DFVT_METRICS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfvt/sample.hpp"

namespace dfvt {

/// Raised when a metric has no defined value for its input (e.g. AUC on a
/// single class).
class UndefinedMetric : public std::domain_error {
  public:
    using std::domain_error::domain_error;
};

inline constexpr double kDecisionThreshold = 0.5;

struct ScoredPrediction {
    std::string id;
    double prob_fake = 0.0;
    int label = kReal;
};

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

    std::size_t total() const { return tp + fp + tn + fn; }
};

namespace detail {

inline void require_nonempty(std::span<const ScoredPrediction> preds, const char* what) {
    if (preds.empty()) throw std::invalid_argument(std::string(what) + ": no predictions");
}

}  // namespace detail

inline Confusion confusion(std::span<const ScoredPrediction> preds, double threshold = kDecisionThreshold) {
    Confusion c;
    for (const auto& p : preds) {
        const bool positive = p.prob_fake >= threshold;
        if (p.label == kFake) {
            ++(positive ? c.tp : c.fn);
        } else {
            ++(positive ? c.fp : c.tn);
        }
    }
    return c;
}

inline double accuracy(std::span<const ScoredPrediction> preds, double threshold = kDecisionThreshold) {
    detail::require_nonempty(preds, "accuracy");
    const auto c = confusion(preds, threshold);
    return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

/// Harmonic mean of precision and recall; 0 when both are 0.
inline double f1(std::span<const ScoredPrediction> preds, double threshold = kDecisionThreshold) {
    detail::require_nonempty(preds, "f1");
    const auto c = confusion(preds, threshold);
    const double denom = static_cast<double>(2 * c.tp + c.fp + c.fn);
    return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / denom;
}

/// Mann-Whitney statistic: P(score of random positive > score of random
/// negative), ties counting one half. Computed from average ranks.
inline double auc(std::span<const ScoredPrediction> preds) {
    std::size_t pos = 0;
    for (const auto& p : preds) pos += p.label == kFake ? 1 : 0;
    const std::size_t neg = preds.size() - pos;
    if (pos == 0 || neg == 0) throw UndefinedMetric("auc: requires at least one positive and one negative label");

    std::vector<std::size_t> order(preds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return preds[a].prob_fake < preds[b].prob_fake; });
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j < order.size() && preds[order[j]].prob_fake == preds[order[i]].prob_fake) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks i+1 .. j
        for (std::size_t k = i; k < j; ++k) {
            if (preds[order[k]].label == kFake) rank_sum += avg_rank;
        }
        i = j;
    }
    const double p = static_cast<double>(pos), n = static_cast<double>(neg);
    return (rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

/// Mean of the two fake probabilities for the same sample.
inline ScoredPrediction fuse(const ScoredPrediction& a, const ScoredPrediction& b) {
    if (a.id != b.id) throw std::invalid_argument("fuse: sample ids differ (" + a.id + " vs " + b.id + ")");
    if (a.label != b.label) throw std::invalid_argument("fuse: labels differ for " + a.id);
    return {a.id, 0.5 * (a.prob_fake + b.prob_fake), a.label};
}

/// Fuses two prediction sets aligned by id. Order follows a.
inline std::vector<ScoredPrediction> fuse(std::span<const ScoredPrediction> a, std::span<const ScoredPrediction> b) {
    if (a.size() != b.size()) throw std::invalid_argument("fuse: prediction sets differ in size");
    std::map<std::string, const ScoredPrediction*> by_id;
    for (const auto& p : b) {
        if (!by_id.emplace(p.id, &p).second) throw std::invalid_argument("fuse: duplicate id " + p.id);
    }
    std::vector<ScoredPrediction> out;
    out.reserve(a.size());
    for (const auto& p : a) {
        auto it = by_id.find(p.id);
        if (it == by_id.end()) throw std::invalid_argument("fuse: id " + p.id + " missing from second set");
        out.push_back(fuse(p, *it->second));
    }
    return out;
}

/// Groups "<video>#<start>" window predictions into one mean score per video,
/// in order of first appearance.
inline std::vector<ScoredPrediction> video_scores(std::span<const ScoredPrediction> windows) {
    std::vector<ScoredPrediction> out;
    std::vector<std::size_t> counts;
    std::map<std::string, std::size_t> slot;
    for (const auto& w : windows) {
        const auto video = w.id.substr(0, w.id.rfind('#'));
        auto [it, inserted] = slot.emplace(video, out.size());
        if (inserted) {
            out.push_back({video, 0.0, w.label});
            counts.push_back(0);
        } else if (out[it->second].label != w.label) {
            throw std::invalid_argument("video_scores: inconsistent labels within " + video);
        }
        out[it->second].prob_fake += w.prob_fake;
        ++counts[it->second];
    }
    for (std::size_t i = 0; i < out.size(); ++i) out[i].prob_fake /= static_cast<double>(counts[i]);
    return out;
}

struct MetricsReport {
    double accuracy = 0.0;
    double f1 = 0.0;
    double auc = std::numeric_limits<double>::quiet_NaN();  // NaN when single-class
    Confusion counts;
    std::size_t n = 0;
};

inline MetricsReport evaluate_metrics(std::span<const ScoredPrediction> preds, double threshold = kDecisionThreshold) {
    MetricsReport r;
    r.accuracy = accuracy(preds, threshold);
    r.f1 = f1(preds, threshold);
    try {
        r.auc = auc(preds);
    } catch (const UndefinedMetric&) {
    }
    r.counts = confusion(preds, threshold);
    r.n = preds.size();
    return r;
}

/// Metric lines "<prefix>.<metric>\t<value>".
inline void write_metrics(std::ostream& os, const std::string& prefix, const MetricsReport& r) {
    auto line = [&](const char* name, auto value) { os << prefix << '.' << name << '\t' << value << '\n'; };
    os << std::setprecision(17);
    line("auc", r.auc);
    line("f1", r.f1);
    line("accuracy", r.accuracy);
    line("tp", r.counts.tp);
    line("fp", r.counts.fp);
    line("tn", r.counts.tn);
    line("fn", r.counts.fn);
    line("n", r.n);
}

/// Parses "metric\tvalue" lines into a map.
inline std::map<std::string, double> read_metrics(std::istream& is) {
    std::map<std::string, double> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(is, line)) {
        ++number;
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) throw std::runtime_error("report line " + std::to_string(number) + ": missing tab");
        const auto value = line.substr(tab + 1);
        out[line.substr(0, tab)] = value == "nan" ? std::numeric_limits<double>::quiet_NaN() : std::stod(value);
    }
    return out;
}

struct CumulativeRow {
    std::vector<double> accuracies;
    double cumulative = 0.0;  // unweighted mean of accuracies
};

inline CumulativeRow cumulative_table(std::span<const double> accuracies) {
    if (accuracies.empty()) throw std::invalid_argument("cumulative_table: no datasets");
    CumulativeRow row{{accuracies.begin(), accuracies.end()}, 0.0};
    double total = 0.0;
    for (auto a : accuracies) total += a;
    row.cumulative = total / static_cast<double>(accuracies.size());
    return row;
}

/// Evaluates one model on each dataset in order.
inline CumulativeRow cumulative_table(const std::function<double(const Dataset&)>& evaluate_accuracy,
                                      std::span<const Dataset> datasets) {
    if (datasets.empty()) throw std::invalid_argument("cumulative_table: no datasets");
    std::vector<double> acc;
    acc.reserve(datasets.size());
    for (const auto& d : datasets) acc.push_back(evaluate_accuracy(d));
    return cumulative_table(acc);
}

}  // namespace dfvt

#endif  // DFVT_METRICS_HPP
