// SPDX-License-Identifier: Apache-2.0
//
// Inference over window grids. A model whose clip length is shorter than the
// grid's window scores each window as the mean over its sub-windows.

#ifndef DFVT_PREDICT_HPP
#define DFVT_PREDICT_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfvt/metrics.hpp"
#include "dfvt/model.hpp"
#include "dfvt/sample.hpp"

namespace dfvt {

/// Fake-class probability of one clip whose length equals cfg.frames.
template <typename T>
double score_clip(const VideoSample& clip, const ParameterStore<T>& params, const ModelConfig& cfg) {
    NoGradGuard guard;
    return static_cast<double>(model_forward(clip, params, cfg).prob_fake());
}

/// One prediction per window of `length` frames, id "<video>#<start>".
template <typename T>
std::vector<ScoredPrediction> predict_windows(const ParameterStore<T>& params, const ModelConfig& cfg, const Dataset& data,
                                              std::size_t length, std::size_t stride = 1) {
    if (length < cfg.frames) {
        throw std::invalid_argument("window length " + std::to_string(length) + " is shorter than the model's " +
                                    std::to_string(cfg.frames) + " frames");
    }
    std::vector<ScoredPrediction> out;
    for (const auto& window : all_windows(data, length, stride)) {
        double total = 0.0;
        const auto clips = sample_windows(window, cfg.frames, 1);
        for (const auto& clip : clips) total += score_clip(clip, params, cfg);
        out.push_back({window.id, total / static_cast<double>(clips.size()), window.label});
    }
    return out;
}

/// Accuracy at the native clip length, stride 1.
template <typename T>
double window_accuracy(const ParameterStore<T>& params, const ModelConfig& cfg, const Dataset& data) {
    const auto preds = predict_windows(params, cfg, data, cfg.frames);
    return accuracy(preds);
}

}  // namespace dfvt

#endif  // DFVT_PREDICT_HPP
