// SPDX-License-Identifier: Apache-2.0
//
// Architecture configuration and its geometric validation.

#ifndef DFVT_CONFIG_HPP
#define DFVT_CONFIG_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfvt/ops.hpp"
#include "dfvt/tensor.hpp"

namespace dfvt {

/// Invalid or inconsistent configuration values.
class ConfigError : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

enum class SegmentMode {
    two,        // one row per stream
    per_frame,  // one row per (frame, stream)
};

struct ConvStage {
    std::size_t out_channels = 0;
    std::size_t kernel = 0;
    std::size_t stride = 1;

    bool operator==(const ConvStage&) const = default;
};

/// Randomly initialised convolutional feature extractor standing in for a
/// pretrained backbone. Only its output geometry matters downstream.
struct BackboneConfig {
    std::vector<ConvStage> stages;

    /// 3x299x299 -> 2048x10x10.
    static BackboneConfig paper() { return {{{64, 7, 4}, {2048, 5, 7}}}; }
    /// 3x32x32 -> 64x4x4.
    static BackboneConfig desk() { return {{{32, 4, 4}, {64, 2, 2}}}; }

    /// Feature map extents {C_f, h, w} for an input of the given geometry.
    Shape output_geometry(std::size_t channels, std::size_t height, std::size_t width) const {
        if (stages.empty()) throw ConfigError("backbone: at least one stage required");
        Shape g{channels, height, width};
        for (std::size_t i = 0; i < stages.size(); ++i) {
            const auto& s = stages[i];
            if (s.out_channels == 0 || s.kernel == 0 || s.stride == 0) {
                throw ConfigError("backbone stage " + std::to_string(i) + ": extents must be positive");
            }
            if (s.kernel > g[1] || s.kernel > g[2]) {
                throw ConfigError("backbone stage " + std::to_string(i) + ": kernel " + std::to_string(s.kernel) +
                                  " larger than input " + to_string(g));
            }
            g = {s.out_channels, conv_out_extent(g[1], s.kernel, s.stride), conv_out_extent(g[2], s.kernel, s.stride)};
        }
        return g;
    }

    bool operator==(const BackboneConfig&) const = default;
};

struct ModelConfig {
    std::size_t d_model = 64;     // D
    std::size_t frames = 1;       // T
    std::size_t tokens = 8;       // N, excluding the classification token
    std::size_t patch_size = 8;   // patch models only
    std::size_t n_heads = 4;
    std::size_t n_blocks = 2;
    std::size_t mlp_ratio = 4;
    std::size_t channels = 3;
    std::size_t image_height = 32;
    std::size_t image_width = 32;
    bool use_uv = true;
    bool use_segment = true;
    bool use_positional = true;
    bool hybrid = true;
    bool freeze_backbone = false;
    SegmentMode segment_mode = SegmentMode::per_frame;
    Activation activation = Activation::gelu;
    BackboneConfig backbone = BackboneConfig::desk();

    std::size_t streams() const { return use_uv ? 2 : 1; }
    std::size_t tokens_per_frame() const { return tokens / frames; }
    /// N/(2T) dual-stream, N/T face-only.
    std::size_t tokens_per_stream() const { return tokens / (streams() * frames); }
    std::size_t sequence_length() const { return tokens + 1; }
    std::size_t head_dim() const { return d_model / n_heads; }
    std::size_t mlp_width() const { return mlp_ratio * d_model; }
    std::size_t segment_rows() const {
        return streams() * (segment_mode == SegmentMode::per_frame ? frames : 1);
    }
    /// Segment row used by one stream (0 face, 1 uv) of one frame.
    std::size_t segment_row(std::size_t stream, std::size_t frame) const {
        return segment_mode == SegmentMode::per_frame ? frame * streams() + stream : stream;
    }
    Shape feature_geometry() const { return backbone.output_geometry(channels, image_height, image_width); }

    /// Throws ConfigError on any inconsistency.
    void validate() const {
        auto require = [](bool ok, const std::string& what) {
            if (!ok) throw ConfigError(what);
        };
        require(d_model > 0 && frames > 0 && tokens > 0 && n_heads > 0 && n_blocks > 0 && mlp_ratio > 0,
                "model dimensions must be positive");
        require(channels > 0 && image_height > 0 && image_width > 0, "image geometry must be positive");
        require(d_model % n_heads == 0, "d_model " + std::to_string(d_model) + " not divisible by n_heads " +
                                            std::to_string(n_heads));
        const auto per = streams() * frames;
        require(tokens % per == 0, "tokens " + std::to_string(tokens) + " not divisible by " + std::to_string(per) +
                                       (use_uv ? " (2T, dual-stream)" : " (T, face-only)"));
        if (hybrid) {
            feature_geometry();
        } else {
            require(patch_size > 0 && image_height % patch_size == 0 && image_width % patch_size == 0,
                    "image " + std::to_string(image_height) + "x" + std::to_string(image_width) +
                        " not divisible by patch size " + std::to_string(patch_size));
            const auto grid = (image_height / patch_size) * (image_width / patch_size);
            require(grid == tokens_per_stream(), "patch grid yields " + std::to_string(grid) +
                                                     " tokens per stream, config expects " +
                                                     std::to_string(tokens_per_stream()));
        }
    }

    bool operator==(const ModelConfig&) const = default;

    /// Tiny configuration used by the gradient-check suite.
    static ModelConfig tiny() {
        ModelConfig c;
        c.d_model = 16;
        c.frames = 2;
        c.tokens = 8;  // 2 tokens per stream per frame
        c.n_heads = 2;
        c.n_blocks = 2;
        c.image_height = 8;
        c.image_width = 8;
        c.backbone = {{{4, 2, 2}, {8, 2, 2}}};  // 3x8x8 -> 8x2x2
        return c;
    }

    /// Dimensions of the published hybrid video model.
    static ModelConfig paper_video() {
        ModelConfig c;
        c.d_model = 768;
        c.frames = 9;
        c.tokens = 576;
        c.n_heads = 12;
        c.n_blocks = 12;
        c.image_height = 299;
        c.image_width = 299;
        c.backbone = BackboneConfig::paper();
        return c;
    }
};

}  // namespace dfvt

#endif  // DFVT_CONFIG_HPP
