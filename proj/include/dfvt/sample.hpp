// SPDX-License-Identifier: Apache-2.0

#ifndef DFVT_SAMPLE_HPP
#define DFVT_SAMPLE_HPP

#include <cstddef>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfvt/tensor.hpp"

namespace dfvt {

/// Labels: 0 real, 1 fake.
inline constexpr int kReal = 0;
inline constexpr int kFake = 1;

/// One frame: a face crop and its UV texture, both CxHxW in [0, 1].
struct FrameSample {
    Tensor<float> face;
    Tensor<float> uv;  // empty for face-only data
    int label = kReal;
};

struct VideoSample {
    std::string id;
    int label = kReal;
    std::vector<FrameSample> frames;
};

using Dataset = std::vector<VideoSample>;

/// Consecutive length-T windows at the given stride, temporal order kept.
/// Window ids are "<video id>#<first frame index>".
inline std::vector<VideoSample> sample_windows(const VideoSample& video, std::size_t length, std::size_t stride = 1) {
    if (length == 0 || stride == 0) throw std::invalid_argument("sample_windows: length and stride must be positive");
    if (video.frames.size() < length) {
        throw std::invalid_argument("sample_windows: video " + video.id + " has " + std::to_string(video.frames.size()) +
                                    " frames, shorter than window length " + std::to_string(length));
    }
    std::vector<VideoSample> out;
    for (std::size_t start = 0; start + length <= video.frames.size(); start += stride) {
        VideoSample w;
        w.id = video.id + "#" + std::to_string(start);
        w.label = video.label;
        w.frames.assign(video.frames.begin() + static_cast<std::ptrdiff_t>(start),
                        video.frames.begin() + static_cast<std::ptrdiff_t>(start + length));
        out.push_back(std::move(w));
    }
    return out;
}

/// Windows of every video, in dataset order.
inline std::vector<VideoSample> all_windows(const Dataset& data, std::size_t length, std::size_t stride = 1) {
    std::vector<VideoSample> out;
    for (const auto& v : data) {
        auto w = sample_windows(v, length, stride);
        out.insert(out.end(), std::make_move_iterator(w.begin()), std::make_move_iterator(w.end()));
    }
    return out;
}

}  // namespace dfvt

#endif  // DFVT_SAMPLE_HPP
