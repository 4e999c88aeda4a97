// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference oracle for reverse-mode gradients.

#ifndef DFVT_GRADCHECK_HPP
#define DFVT_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "dfvt/tensor.hpp"

namespace dfvt {

struct GradCheckOptions {
    double step = 1e-5;                  // scaled by max(1, |theta_i|)
    std::size_t max_coords_per_param = 0;  // 0 checks every coordinate
    std::uint64_t seed = 0;              // coordinate subsampling
    double abs_floor = 1e-6;             // denominator floor for near-zero gradients
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    bool finite = true;
    std::size_t param_index = 0;  // location of the worst (or first non-finite) coordinate
    std::size_t coord = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t checked = 0;

    bool passed(double tolerance) const { return finite && max_rel_error < tolerance; }
};

/// |a - n| / max(|a|, |n|, floor).
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
    return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares backward() against (f(theta+h) - f(theta-h)) / 2h for every
/// (optionally subsampled) coordinate of every tensor in params. f must
/// rebuild its graph from the current parameter values on every call.
template <typename T>
GradCheckResult grad_check(const std::function<Tensor<T>()>& f, std::vector<Tensor<T>> params,
                           const GradCheckOptions& opts = {}) {
    for (auto& p : params) p.zero_grad();
    {
        auto loss = f();
        backward(loss);
    }
    std::vector<std::vector<T>> analytic;
    for (auto& p : params) {
        analytic.emplace_back(p.has_grad() ? std::vector<T>(p.grad().begin(), p.grad().end())
                                           : std::vector<T>(p.size(), T(0)));
        p.zero_grad();
    }

    GradCheckResult result;
    std::mt19937_64 rng(opts.seed);
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        std::vector<std::size_t> coords(p.size());
        std::iota(coords.begin(), coords.end(), std::size_t{0});
        if (opts.max_coords_per_param && coords.size() > opts.max_coords_per_param) {
            std::shuffle(coords.begin(), coords.end(), rng);
            coords.resize(opts.max_coords_per_param);
            std::sort(coords.begin(), coords.end());
        }
        for (auto i : coords) {
            const T saved = p[i];
            const T h = static_cast<T>(opts.step * std::max(1.0, std::abs(static_cast<double>(saved))));
            p[i] = saved + h;
            const double up = static_cast<double>(f().item());
            p[i] = saved - h;
            const double down = static_cast<double>(f().item());
            p[i] = saved;
            const double numeric = (up - down) / (2.0 * static_cast<double>(h));
            const double a = static_cast<double>(analytic[pi][i]);
            ++result.checked;
            if (!std::isfinite(numeric) || !std::isfinite(a)) {
                result.finite = false;
                result.max_rel_error = std::numeric_limits<double>::infinity();
                result.param_index = pi;
                result.coord = i;
                result.analytic = a;
                result.numeric = numeric;
                return result;
            }
            const double err = relative_error(a, numeric, opts.abs_floor);
            if (err > result.max_rel_error || result.checked == 1) {
                result.max_rel_error = err;
                result.param_index = pi;
                result.coord = i;
                result.analytic = a;
                result.numeric = numeric;
            }
        }
    }
    return result;
}

}  // namespace dfvt

#endif  // DFVT_GRADCHECK_HPP
