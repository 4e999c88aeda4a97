// SPDX-License-Identifier: Apache-2.0
//
// Input-sequence assembly: per-stream tokenisation (raw patches or backbone
// features), segment embeddings, frame concatenation, classification token,
// and positional embeddings.

#ifndef DFVT_EMBEDDING_HPP
#define DFVT_EMBEDDING_HPP

#include <optional>
#include <string>
#include <vector>

#include "dfvt/config.hpp"
#include "dfvt/ops.hpp"
#include "dfvt/params.hpp"

namespace dfvt {

enum class Stream { face = 0, uv = 1 };

inline const char* to_string(Stream s) { return s == Stream::face ? "face" : "uv"; }

/// Tokens of one stream of one frame.
template <typename T>
struct TokenMatrix {
    Tensor<T> tokens;  // n_tok x D
    Stream stream = Stream::face;
    std::size_t frame_index = 0;

    std::size_t count() const { return tokens.dim(0); }
};

/// Learnable tables owned by a ParameterStore. seg is empty when segment
/// embeddings are disabled.
template <typename T>
struct EmbeddingTable {
    Tensor<T> seg;  // S x D
    Tensor<T> pos;  // (N+1) x D; empty when positional embeddings are disabled
    Tensor<T> cls;  // 1 x D

    static EmbeddingTable from(const ParameterStore<T>& params) {
        EmbeddingTable t;
        if (params.contains("embed.seg")) t.seg = params.get("embed.seg");
        if (params.contains("embed.pos")) t.pos = params.get("embed.pos");
        t.cls = params.get("embed.cls");
        return t;
    }
};

/// Index map from a CxHxW image to a (H/p * W/p) x (C*p*p) patch matrix.
/// Patches are ordered row-major over the grid; each patch vector is (c, i, j).
inline std::vector<std::size_t> patch_indices(const Shape& image, std::size_t patch) {
    const auto c = image[0], h = image[1], w = image[2];
    const auto gh = h / patch, gw = w / patch;
    const auto len = c * patch * patch;
    std::vector<std::size_t> idx(gh * gw * len);
    for (std::size_t py = 0; py < gh; ++py) {
        for (std::size_t px = 0; px < gw; ++px) {
            const auto base = (py * gw + px) * len;
            for (std::size_t ch = 0; ch < c; ++ch) {
                for (std::size_t i = 0; i < patch; ++i) {
                    for (std::size_t j = 0; j < patch; ++j) {
                        idx[base + (ch * patch + i) * patch + j] = (ch * h + py * patch + i) * w + px * patch + j;
                    }
                }
            }
        }
    }
    return idx;
}

/// Splits an image into non-overlapping patches and projects each to D.
/// proj is (C*p*p) x D; bias (optional) holds D values.
template <typename T>
Tensor<T> patchify(const Tensor<T>& image, std::size_t patch, const Tensor<T>& proj, const Tensor<T>& bias = {}) {
    if (image.rank() != 3) throw DimensionError("patchify: expected CxHxW image, got " + to_string(image.shape()));
    if (patch == 0 || image.dim(1) % patch != 0 || image.dim(2) % patch != 0) {
        throw DimensionError("patchify: image " + to_string(image.shape()) + " not divisible by patch size " +
                             std::to_string(patch));
    }
    const auto len = image.dim(0) * patch * patch;
    const auto count = (image.dim(1) / patch) * (image.dim(2) / patch);
    auto patches = gather(image, patch_indices(image.shape(), patch), {count, len}, "patchify");
    auto tokens = matmul(patches, proj);
    return bias ? add_bias(tokens, bias) : tokens;
}

/// Stacked conv + activation stages.
template <typename T>
Tensor<T> backbone_features(const Tensor<T>& image, const ModelConfig& cfg, const ParameterStore<T>& params) {
    const Shape expected{cfg.channels, cfg.image_height, cfg.image_width};
    if (image.shape() != expected) {
        throw DimensionError("backbone: image " + to_string(image.shape()) + " does not match configured " +
                             to_string(expected));
    }
    Tensor<T> x = image;
    for (std::size_t i = 0; i < cfg.backbone.stages.size(); ++i) {
        const auto prefix = "backbone." + std::to_string(i);
        x = activate(conv2d(x, params.get(prefix + ".weight"), params.get(prefix + ".bias"),
                            cfg.backbone.stages[i].stride),
                     cfg.activation);
    }
    return x;
}

/// 1x1 conv C_f -> D, flatten to (h*w) x D, then a learned map over the
/// token axis h*w -> n_tok.
template <typename T>
Tensor<T> tokens_from_features(const Tensor<T>& feat, const Tensor<T>& conv_w, const Tensor<T>& conv_b,
                               const Tensor<T>& mix, std::size_t expected_tokens) {
    if (feat.rank() != 3) throw DimensionError("tokens_from_features: expected C_f x h x w, got " + to_string(feat.shape()));
    const auto positions = feat.dim(1) * feat.dim(2);
    if (mix.rank() != 2 || mix.dim(1) != positions) {
        throw DimensionError("tokens_from_features: token mixer " + to_string(mix.shape()) + " does not match " +
                             std::to_string(positions) + " feature positions");
    }
    if (mix.dim(0) != expected_tokens) {
        throw DimensionError("tokens_from_features: mixer emits " + std::to_string(mix.dim(0)) +
                             " tokens, configuration expects " + std::to_string(expected_tokens));
    }
    auto projected = conv2d(feat, conv_w, conv_b, 1);  // D x h x w
    const auto d = projected.dim(0);
    auto rows = transpose(reshape(projected, {d, positions}));  // (h*w) x D
    return matmul(mix, rows);
}

/// Tokens for one stream of one frame under the configured tokenisation.
template <typename T>
TokenMatrix<T> tokenize(const Tensor<T>& image, Stream stream, std::size_t frame_index, const ModelConfig& cfg,
                        const ParameterStore<T>& params, Shape* feature_shape = nullptr) {
    Tensor<T> tokens;
    if (cfg.hybrid) {
        auto feat = backbone_features(image, cfg, params);
        if (feature_shape) *feature_shape = feat.shape();
        tokens = tokens_from_features(feat, params.get("projector.conv.weight"), params.get("projector.conv.bias"),
                                      params.get("projector.mix.weight"), cfg.tokens_per_stream());
    } else {
        tokens = patchify(image, cfg.patch_size, params.get("patch.weight"), params.get("patch.bias"));
        if (tokens.dim(0) != cfg.tokens_per_stream()) {
            throw DimensionError("patchify produced " + std::to_string(tokens.dim(0)) + " tokens, configuration expects " +
                                 std::to_string(cfg.tokens_per_stream()));
        }
    }
    return {tokens, stream, frame_index};
}

/// [face; uv] for one frame, each stream offset by its segment row when
/// segment embeddings are enabled.
template <typename T>
Tensor<T> assemble_frame(const TokenMatrix<T>& face, const std::optional<TokenMatrix<T>>& uv,
                         const EmbeddingTable<T>& table, std::size_t frame_index, const ModelConfig& cfg) {
    if (face.stream != Stream::face) throw DimensionError("assemble_frame: first stream must be face");
    if (face.frame_index != frame_index) throw DimensionError("assemble_frame: face tokens belong to another frame");
    if (frame_index >= cfg.frames) throw DimensionError("assemble_frame: frame index beyond T");
    if (face.count() != cfg.tokens_per_stream()) {
        throw DimensionError("assemble_frame: face carries " + std::to_string(face.count()) + " tokens, expected " +
                             std::to_string(cfg.tokens_per_stream()));
    }
    if (cfg.use_uv != uv.has_value()) {
        throw DimensionError(cfg.use_uv ? "assemble_frame: uv tokens required" : "assemble_frame: face-only config got uv tokens");
    }
    const bool segment = cfg.use_segment;
    if (segment && (!table.seg || table.seg.dim(0) != cfg.segment_rows())) {
        throw DimensionError("assemble_frame: segment table does not have " + std::to_string(cfg.segment_rows()) + " rows");
    }
    auto embed = [&](const TokenMatrix<T>& tm, std::size_t stream) {
        return segment ? add_bias(tm.tokens, row(table.seg, cfg.segment_row(stream, frame_index))) : tm.tokens;
    };
    if (!uv) return embed(face, 0);
    if (uv->stream != Stream::uv) throw DimensionError("assemble_frame: second stream must be uv");
    if (uv->frame_index != frame_index) throw DimensionError("assemble_frame: uv tokens belong to another frame");
    if (uv->count() != face.count()) {
        throw DimensionError("assemble_frame: face/uv token counts differ (" + std::to_string(face.count()) + " vs " +
                             std::to_string(uv->count()) + ")");
    }
    return concat_rows<T>({embed(face, 0), embed(*uv, 1)});
}

/// Concatenates T frames, prepends the classification token, adds positions.
template <typename T>
Tensor<T> assemble_sequence(const std::vector<Tensor<T>>& frames, const EmbeddingTable<T>& table,
                            const ModelConfig& cfg) {
    if (frames.size() != cfg.frames) {
        throw DimensionError("assemble_sequence: expected " + std::to_string(cfg.frames) + " frames, got " +
                             std::to_string(frames.size()));
    }
    std::vector<Tensor<T>> parts{table.cls};
    parts.insert(parts.end(), frames.begin(), frames.end());
    auto seq = concat_rows(parts);
    if (seq.dim(0) != cfg.sequence_length()) {
        throw DimensionError("assemble_sequence: sequence has " + std::to_string(seq.dim(0)) + " rows, expected N+1 = " +
                             std::to_string(cfg.sequence_length()));
    }
    if (!cfg.use_positional) return seq;
    if (!table.pos) throw DimensionError("assemble_sequence: positional table missing");
    if (table.pos.shape() != Shape{cfg.sequence_length(), cfg.d_model}) {
        throw DimensionError("assemble_sequence: positional table " + to_string(table.pos.shape()) +
                             " does not match sequence length " + std::to_string(cfg.sequence_length()));
    }
    return add(seq, table.pos);
}

}  // namespace dfvt

#endif  // DFVT_EMBEDDING_HPP
