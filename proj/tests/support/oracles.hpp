// SPDX-License-Identifier: Apache-2.0
//
// Hand-written reference classifiers for the synthetic tasks. They read pixels
// directly and share no code with the model, so they establish whether a task
// is solvable (or provably not) independently of anything being trained.

#ifndef DFVT_TESTS_ORACLES_HPP
#define DFVT_TESTS_ORACLES_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <utility>
#include <vector>

#include "dfvt/data.hpp"

namespace oracle {

using dfvt::Dataset;
using dfvt::Region;
using dfvt::Tensor;

inline double region_mean(const Tensor<float>& img, const Region& r) {
    const auto c = img.dim(0), h = img.dim(1), w = img.dim(2);
    double s = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = r.y; y < r.y + r.size; ++y)
            for (std::size_t x = r.x; x < r.x + r.size; ++x) s += img.data()[(ch * h + y) * w + x];
    return s / static_cast<double>(c * r.size * r.size);
}

/// Correlation of the region with a +/- checkerboard whose phase is (y + x) % 2.
inline double checker_response(const Tensor<float>& img, const Region& r) {
    const auto c = img.dim(0), h = img.dim(1), w = img.dim(2);
    double s = 0.0;
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = r.y; y < r.y + r.size; ++y)
            for (std::size_t x = r.x; x < r.x + r.size; ++x) {
                const double sign = (y + x) % 2 == 0 ? 1.0 : -1.0;
                s += sign * img.data()[(ch * h + y) * w + x];
            }
    return s / static_cast<double>(c * r.size * r.size);
}

inline double image_mean(const Tensor<float>& img) {
    double s = 0.0;
    for (auto v : img.data()) s += v;
    return s / static_cast<double>(img.size());
}

/// Labelled scalar features.
using Scored = std::vector<std::pair<double, int>>;

/// Best accuracy of any single threshold, in either direction. An upper bound
/// for every classifier that is monotone in the feature.
inline double best_threshold_accuracy(Scored s) {
    if (s.empty()) return 0.0;
    std::sort(s.begin(), s.end());
    std::size_t pos = 0;
    for (const auto& e : s) pos += e.second == 1 ? 1 : 0;
    const std::size_t n = s.size(), neg = n - pos;
    // Predict 1 above the cut: correct = negatives below + positives above.
    std::size_t neg_below = 0, pos_below = 0, best = std::max(pos, neg);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j < n && s[j].first == s[i].first) {
            (s[j].second == 1 ? pos_below : neg_below) += 1;
            ++j;
        }
        const std::size_t up = neg_below + (pos - pos_below);
        best = std::max({best, up, n - up});
        i = j;
    }
    return static_cast<double>(best) / static_cast<double>(n);
}

/// Fixed-threshold accuracy: predict 1 iff feature >= cut.
inline double threshold_accuracy(const Scored& s, double cut) {
    std::size_t ok = 0;
    for (const auto& [f, y] : s) ok += ((f >= cut ? 1 : 0) == y) ? 1 : 0;
    return static_cast<double>(ok) / static_cast<double>(s.size());
}

/// Spatial task: mean of the pattern region in each face frame, thresholded
/// halfway between the two class means the generator implies.
inline double region_mean_oracle(const Dataset& data, const dfvt::SynthParams& p, const Region& r) {
    Scored s;
    for (const auto& v : data)
        for (const auto& f : v.frames) s.emplace_back(region_mean(f.face, r), v.label);
    return threshold_accuracy(s, p.base + 0.5 * p.amplitude);
}

/// Stream task, told which image is which: fake iff the UV region responds
/// more strongly to the checkerboard than the face region.
inline double stream_aware_oracle(const Dataset& data, const Region& r) {
    Scored s;
    for (const auto& v : data)
        for (const auto& f : v.frames) s.emplace_back(checker_response(f.uv, r) - checker_response(f.face, r), v.label);
    return threshold_accuracy(s, 0.0);
}

/// Stream task, with the two images pooled as an unordered pair. Any
/// function of the pair can be written through symmetric features; this
/// reports the best threshold on each of several and returns the maximum.
inline double pooled_oracle(const Dataset& data, const Region& r) {
    std::vector<std::function<double(double, double)>> symmetric = {
        [](double a, double b) { return a + b; },
        [](double a, double b) { return std::max(a, b); },
        [](double a, double b) { return std::min(a, b); },
        [](double a, double b) { return std::abs(a - b); },
        [](double a, double b) { return a * b; },
    };
    double best = 0.0;
    for (const auto& fn : symmetric) {
        Scored checker, means;
        for (const auto& v : data)
            for (const auto& f : v.frames) {
                checker.emplace_back(fn(checker_response(f.face, r), checker_response(f.uv, r)), v.label);
                means.emplace_back(fn(image_mean(f.face), image_mean(f.uv)), v.label);
            }
        best = std::max({best, best_threshold_accuracy(checker), best_threshold_accuracy(means)});
    }
    return best;
}

/// Flicker task, one frame at a time: best threshold on the frame mean and on
/// its distance from the base level.
inline double single_frame_oracle(const Dataset& data, double base) {
    Scored level, distance;
    for (const auto& v : data)
        for (const auto& f : v.frames) {
            const double m = 0.5 * (image_mean(f.face) + image_mean(f.uv));
            level.emplace_back(m, v.label);
            distance.emplace_back(std::abs(m - base), v.label);
        }
    return std::max(best_threshold_accuracy(level), best_threshold_accuracy(distance));
}

/// Flicker task, whole video: fake iff consecutive frame means differ by more
/// than the flicker offset on average.
inline double adjacent_difference_oracle(const Dataset& data, double flicker) {
    Scored s;
    for (const auto& v : data) {
        double diff = 0.0;
        for (std::size_t t = 1; t < v.frames.size(); ++t) {
            diff += std::abs(image_mean(v.frames[t].face) - image_mean(v.frames[t - 1].face));
        }
        s.emplace_back(diff / static_cast<double>(v.frames.size() - 1), v.label);
    }
    return threshold_accuracy(s, flicker);
}

/// Plain logistic regression by full-batch gradient descent; returns the final
/// training accuracy. Reaching 1.0 certifies linear separability.
inline double logistic_regression_accuracy(const std::vector<std::vector<double>>& x, const std::vector<int>& y,
                                           std::size_t iterations = 2000, double lr = 0.5) {
    const std::size_t n = x.size(), d = x.empty() ? 0 : x[0].size();
    std::vector<double> w(d, 0.0);
    double b = 0.0;
    auto margin = [&](std::size_t i) {
        double z = b;
        for (std::size_t k = 0; k < d; ++k) z += w[k] * x[i][k];
        return z;
    };
    for (std::size_t it = 0; it < iterations; ++it) {
        std::vector<double> gw(d, 0.0);
        double gb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double p = 1.0 / (1.0 + std::exp(-margin(i)));
            const double e = p - y[i];
            for (std::size_t k = 0; k < d; ++k) gw[k] += e * x[i][k];
            gb += e;
        }
        for (std::size_t k = 0; k < d; ++k) w[k] -= lr * gw[k] / static_cast<double>(n);
        b -= lr * gb / static_cast<double>(n);
    }
    std::size_t ok = 0;
    for (std::size_t i = 0; i < n; ++i) ok += ((margin(i) > 0 ? 1 : 0) == y[i]) ? 1 : 0;
    return static_cast<double>(ok) / static_cast<double>(n);
}

}  // namespace oracle

#endif  // DFVT_TESTS_ORACLES_HPP
