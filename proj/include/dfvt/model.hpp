// SPDX-License-Identifier: Apache-2.0
//
// Pre-norm transformer encoder over the assembled face/UV sequence, with a
// classification-token readout producing two logits (real, fake).

#ifndef DFVT_MODEL_HPP
#define DFVT_MODEL_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dfvt/config.hpp"
#include "dfvt/embedding.hpp"
#include "dfvt/ops.hpp"
#include "dfvt/params.hpp"
#include "dfvt/sample.hpp"

namespace dfvt {

inline constexpr double kInitStd = 0.02;
inline constexpr double kNormEps = 1e-5;

template <typename T>
struct EncoderBlockParams {
    Tensor<T> norm1_gain, norm1_bias;
    Tensor<T> wq, wk, wv, wo;  // D x D
    Tensor<T> norm2_gain, norm2_bias;
    Tensor<T> fc1_w, fc1_b;  // D x D_mlp, D_mlp
    Tensor<T> fc2_w, fc2_b;  // D_mlp x D, D

    static EncoderBlockParams from(const ParameterStore<T>& params, std::size_t index) {
        const auto p = "blocks." + std::to_string(index) + ".";
        return {params.get(p + "norm1.gain"), params.get(p + "norm1.bias"), params.get(p + "attn.wq"),
                params.get(p + "attn.wk"),    params.get(p + "attn.wv"),    params.get(p + "attn.wo"),
                params.get(p + "norm2.gain"), params.get(p + "norm2.bias"), params.get(p + "mlp.fc1.weight"),
                params.get(p + "mlp.fc1.bias"), params.get(p + "mlp.fc2.weight"), params.get(p + "mlp.fc2.bias")};
    }
};

/// Optional observer of intermediate results.
template <typename T>
struct ForwardTrace {
    std::vector<std::pair<std::string, Shape>> shapes;
    std::vector<Tensor<T>> attention;  // per block, per head: L x L weights

    void record(std::string name, const Shape& shape) { shapes.emplace_back(std::move(name), shape); }
};

template <typename T>
struct ForwardOutput {
    Tensor<T> logits;  // [2]
    Tensor<T> probs;   // [2]

    T prob_fake() const { return probs[kFake]; }
};

namespace detail {

template <typename T>
std::vector<T> normal_values(std::size_t n, double stddev, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<T> v(n);
    for (auto& x : v) x = static_cast<T>(dist(rng));
    return v;
}

}  // namespace detail

struct ParamSpec {
    enum class Init { normal, zeros, ones };

    std::string name;
    Shape shape;
    Init init = Init::zeros;
    double stddev = 0.0;
    bool trainable = true;
};

/// Names, shapes and initialisers of every tensor the configuration needs,
/// and only those, in canonical order. Encoder projections, embeddings and
/// head: N(0, 0.02). Tokeniser weights: N(0, 1/fan_in). Biases zero, norm
/// gains one.
inline std::vector<ParamSpec> param_layout(const ModelConfig& cfg) {
    cfg.validate();
    using Init = ParamSpec::Init;
    std::vector<ParamSpec> out;
    const auto d = cfg.d_model;
    auto normal = [&](std::string name, Shape s, double stddev, bool trainable = true) {
        out.push_back({std::move(name), std::move(s), Init::normal, stddev, trainable});
    };
    auto fixed = [&](std::string name, Shape s, Init init, bool trainable = true) {
        out.push_back({std::move(name), std::move(s), init, 0.0, trainable});
    };

    if (cfg.hybrid) {
        std::size_t c_in = cfg.channels;
        for (std::size_t i = 0; i < cfg.backbone.stages.size(); ++i) {
            const auto& st = cfg.backbone.stages[i];
            const auto prefix = "backbone." + std::to_string(i);
            const auto fan_in = static_cast<double>(c_in * st.kernel * st.kernel);
            normal(prefix + ".weight", {st.out_channels, c_in, st.kernel, st.kernel}, std::sqrt(1.0 / fan_in),
                   !cfg.freeze_backbone);
            fixed(prefix + ".bias", {st.out_channels}, Init::zeros, !cfg.freeze_backbone);
            c_in = st.out_channels;
        }
        const auto feat = cfg.feature_geometry();
        const auto positions = feat[1] * feat[2];
        normal("projector.conv.weight", {d, feat[0], 1, 1}, std::sqrt(1.0 / static_cast<double>(feat[0])));
        fixed("projector.conv.bias", {d}, Init::zeros);
        normal("projector.mix.weight", {cfg.tokens_per_stream(), positions}, std::sqrt(1.0 / static_cast<double>(positions)));
    } else {
        const auto len = cfg.channels * cfg.patch_size * cfg.patch_size;
        normal("patch.weight", {len, d}, std::sqrt(1.0 / static_cast<double>(len)));
        fixed("patch.bias", {d}, Init::zeros);
    }

    normal("embed.cls", {1, d}, kInitStd);
    if (cfg.use_positional) normal("embed.pos", {cfg.sequence_length(), d}, kInitStd);
    if (cfg.use_segment) normal("embed.seg", {cfg.segment_rows(), d}, kInitStd);

    const auto hidden = cfg.mlp_width();
    for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
        const auto p = "blocks." + std::to_string(b) + ".";
        fixed(p + "norm1.gain", {d}, Init::ones);
        fixed(p + "norm1.bias", {d}, Init::zeros);
        for (const char* w : {"attn.wq", "attn.wk", "attn.wv", "attn.wo"}) normal(p + w, {d, d}, kInitStd);
        fixed(p + "norm2.gain", {d}, Init::ones);
        fixed(p + "norm2.bias", {d}, Init::zeros);
        normal(p + "mlp.fc1.weight", {d, hidden}, kInitStd);
        fixed(p + "mlp.fc1.bias", {hidden}, Init::zeros);
        normal(p + "mlp.fc2.weight", {hidden, d}, kInitStd);
        fixed(p + "mlp.fc2.bias", {d}, Init::zeros);
    }
    fixed("norm.gain", {d}, Init::ones);
    fixed("norm.bias", {d}, Init::zeros);
    normal("head.weight", {d, 2}, kInitStd);
    fixed("head.bias", {2}, Init::zeros);
    return out;
}

/// Seeded initialisation following param_layout().
template <typename T>
ParameterStore<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ParameterStore<T> ps;
    for (const auto& spec : param_layout(cfg)) {
        const auto n = numel(spec.shape);
        std::vector<T> values;
        switch (spec.init) {
            case ParamSpec::Init::normal: values = detail::normal_values<T>(n, spec.stddev, rng); break;
            case ParamSpec::Init::zeros: values.assign(n, T(0)); break;
            case ParamSpec::Init::ones: values.assign(n, T(1)); break;
        }
        ps.add(spec.name, Tensor<T>(spec.shape, std::move(values)), spec.trainable);
    }
    return ps;
}

/// Multi-head self-attention without masking: per head
/// softmax(Q K^T / sqrt(d_h)) V, heads concatenated, then W_o.
template <typename T>
Tensor<T> attention(const Tensor<T>& x, const EncoderBlockParams<T>& p, std::size_t n_heads,
                    ForwardTrace<T>* trace = nullptr) {
    if (x.rank() != 2 || x.dim(0) == 0) throw DimensionError("attention: expected L x D input, got " + to_string(x.shape()));
    const auto d = x.dim(1);
    if (n_heads == 0 || d % n_heads != 0) {
        throw DimensionError("attention: D=" + std::to_string(d) + " not divisible by " + std::to_string(n_heads) + " heads");
    }
    const auto dh = d / n_heads;
    const T inv_sqrt = T(1) / std::sqrt(static_cast<T>(dh));
    auto q = matmul(x, p.wq);
    auto k = matmul(x, p.wk);
    auto v = matmul(x, p.wv);
    std::vector<Tensor<T>> heads;
    heads.reserve(n_heads);
    for (std::size_t h = 0; h < n_heads; ++h) {
        auto qh = slice_cols(q, h * dh, dh);
        auto kh = slice_cols(k, h * dh, dh);
        auto vh = slice_cols(v, h * dh, dh);
        auto weights = softmax(scale(matmul(qh, transpose(kh)), inv_sqrt));
        if (trace) trace->attention.push_back(weights);
        heads.push_back(matmul(weights, vh));
    }
    auto merged = n_heads == 1 ? heads.front() : concat_cols(heads);
    return matmul(merged, p.wo);
}

/// x + attn(norm1(x)), then + mlp(norm2(.)).
template <typename T>
Tensor<T> encoder_block(const Tensor<T>& x, const EncoderBlockParams<T>& p, std::size_t n_heads,
                        Activation act = Activation::gelu, ForwardTrace<T>* trace = nullptr) {
    auto h = add(x, attention(layer_norm(x, p.norm1_gain, p.norm1_bias, T(kNormEps)), p, n_heads, trace));
    auto hidden = activate(add_bias(matmul(layer_norm(h, p.norm2_gain, p.norm2_bias, T(kNormEps)), p.fc1_w), p.fc1_b), act);
    return add(h, add_bias(matmul(hidden, p.fc2_w), p.fc2_b));
}

/// Encoder stack, final norm, classification-token readout, linear head.
template <typename T>
Tensor<T> encode_sequence(const Tensor<T>& sequence, const ParameterStore<T>& params, const ModelConfig& cfg,
                          ForwardTrace<T>* trace = nullptr) {
    if (sequence.rank() != 2 || sequence.dim(1) != cfg.d_model) {
        throw DimensionError("encode_sequence: expected L x " + std::to_string(cfg.d_model) + ", got " +
                             to_string(sequence.shape()));
    }
    Tensor<T> x = sequence;
    for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
        x = encoder_block(x, EncoderBlockParams<T>::from(params, b), cfg.n_heads, cfg.activation, trace);
        if (trace) trace->record("block." + std::to_string(b), x.shape());
    }
    x = layer_norm(x, params.get("norm.gain"), params.get("norm.bias"), T(kNormEps));
    auto cls = slice_rows(x, 0, 1);
    if (trace) trace->record("readout", cls.shape());
    auto logits = add_bias(matmul(cls, params.get("head.weight")), params.get("head.bias"));
    return reshape(logits, {2});
}

/// Throws DimensionError unless the sample can be fed to a model of this configuration.
inline void check_sample(const VideoSample& sample, const ModelConfig& cfg) {
    if (sample.frames.size() != cfg.frames) {
        throw DimensionError("sample " + sample.id + ": " + std::to_string(sample.frames.size()) +
                             " frames, model expects " + std::to_string(cfg.frames));
    }
    const Shape geometry{cfg.channels, cfg.image_height, cfg.image_width};
    for (const auto& f : sample.frames) {
        if (!f.face || f.face.shape() != geometry) {
            throw DimensionError("sample " + sample.id + ": face geometry does not match " + to_string(geometry));
        }
        if (cfg.use_uv) {
            if (!f.uv || f.uv.shape() != geometry) {
                throw DimensionError("sample " + sample.id + ": uv geometry does not match " + to_string(geometry));
            }
        }
    }
}

inline constexpr double kPixelCenter = 0.5;

/// Network input for a [0, 1] image: pixels shifted to be centred on zero.
template <typename T>
Tensor<T> image_as(const Tensor<float>& image) {
    std::vector<T> v(image.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<T>(image[i]) - static_cast<T>(kPixelCenter);
    return Tensor<T>(image.shape(), std::move(v));
}

/// Builds the (N+1) x D input sequence of a T-frame sample.
template <typename T>
Tensor<T> assemble_input(const VideoSample& sample, const ParameterStore<T>& params, const ModelConfig& cfg,
                         ForwardTrace<T>* trace = nullptr) {
    check_sample(sample, cfg);
    const auto table = EmbeddingTable<T>::from(params);
    std::vector<Tensor<T>> frames;
    frames.reserve(cfg.frames);
    for (std::size_t t = 0; t < cfg.frames; ++t) {
        const auto& f = sample.frames[t];
        Shape face_feat, uv_feat;
        auto face = tokenize(image_as<T>(f.face), Stream::face, t, cfg, params, &face_feat);
        std::optional<TokenMatrix<T>> uv;
        if (cfg.use_uv) uv = tokenize(image_as<T>(f.uv), Stream::uv, t, cfg, params, &uv_feat);
        frames.push_back(assemble_frame(face, uv, table, t, cfg));
        if (trace) {
            const auto suffix = "." + std::to_string(t);
            if (cfg.hybrid) {
                trace->record("features.face" + suffix, face_feat);
                if (uv) trace->record("features.uv" + suffix, uv_feat);
            }
            trace->record("tokens.face" + suffix, face.tokens.shape());
            if (uv) trace->record("tokens.uv" + suffix, uv->tokens.shape());
            trace->record("frame" + suffix, frames.back().shape());
        }
    }
    auto seq = assemble_sequence(frames, table, cfg);
    if (trace) trace->record("sequence", seq.shape());
    return seq;
}

template <typename T>
ForwardOutput<T> model_forward(const VideoSample& sample, const ParameterStore<T>& params, const ModelConfig& cfg,
                               ForwardTrace<T>* trace = nullptr) {
    auto logits = encode_sequence(assemble_input(sample, params, cfg, trace), params, cfg, trace);
    auto probs = softmax(logits.detach());
    return {logits, probs};
}

}  // namespace dfvt

#endif  // DFVT_MODEL_HPP
