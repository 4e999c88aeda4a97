// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "dfvt/embedding.hpp"
#include "dfvt/model.hpp"

using namespace dfvt;

namespace {

Tensor<double> random_tensor(Shape shape, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    std::vector<double> v(numel(shape));
    for (auto& x : v) x = dist(rng);
    return Tensor<double>(std::move(shape), std::move(v));
}

Tensor<double> identity(std::size_t n) {
    auto t = Tensor<double>::zeros({n, n});
    for (std::size_t i = 0; i < n; ++i) t.data()[i * n + i] = 1.0;
    return t;
}

ModelConfig patch_config(std::size_t frames, bool uv) {
    ModelConfig c;
    c.hybrid = false;
    c.d_model = 8;
    c.n_heads = 2;
    c.n_blocks = 1;
    c.frames = frames;
    c.use_uv = uv;
    c.image_height = c.image_width = 8;
    c.patch_size = 4;
    c.tokens = 4 * frames * (uv ? 2 : 1);
    return c;
}

}  // namespace

TEST(ConfigTest, TokenArithmetic) {
    auto c = ModelConfig::paper_video();
    EXPECT_NO_THROW(c.validate());
    EXPECT_EQ(c.tokens_per_stream(), 32u);
    EXPECT_EQ(c.tokens_per_frame(), 64u);
    EXPECT_EQ(c.sequence_length(), 577u);
    EXPECT_EQ(c.head_dim(), 64u);
    EXPECT_EQ(c.mlp_width(), 3072u);
    EXPECT_EQ(c.segment_rows(), 18u);
    EXPECT_EQ(c.segment_row(1, 4), 9u);
    c.segment_mode = SegmentMode::two;
    EXPECT_EQ(c.segment_rows(), 2u);
    EXPECT_EQ(c.segment_row(1, 4), 1u);
}

TEST(ConfigTest, RejectsInconsistentDimensions) {
    auto c = ModelConfig::tiny();
    c.tokens = 6;  // not divisible by 2T = 4
    EXPECT_THROW(c.validate(), ConfigError);
    c = ModelConfig::tiny();
    c.n_heads = 3;
    EXPECT_THROW(c.validate(), ConfigError);
    c = patch_config(1, true);
    c.patch_size = 3;
    EXPECT_THROW(c.validate(), ConfigError);
    c = patch_config(1, true);
    c.tokens = 16;  // grid gives 4 per stream, config says 8
    EXPECT_THROW(c.validate(), ConfigError);
    c = ModelConfig::tiny();
    c.use_uv = false;
    c.tokens = 6;  // face-only needs divisibility by T only
    EXPECT_EQ(c.streams(), 1u);
    EXPECT_EQ(c.tokens_per_stream(), 3u);
    EXPECT_NO_THROW(c.validate());
}

TEST(BackboneTest, PresetGeometry) {
    EXPECT_EQ(BackboneConfig::paper().output_geometry(3, 299, 299), (Shape{2048, 10, 10}));
    EXPECT_EQ(BackboneConfig::desk().output_geometry(3, 32, 32), (Shape{64, 4, 4}));
    EXPECT_THROW(BackboneConfig::desk().output_geometry(3, 4, 4), ConfigError);
}

TEST(BackboneTest, DeskPresetRunsAndZeroInputGivesZeroFeatures) {
    ModelConfig c;  // desk defaults, 3x32x32
    auto params = init_params<double>(c, 1);
    auto f = backbone_features(Tensor<double>::zeros({3, 32, 32}), c, params);
    EXPECT_EQ(f.shape(), (Shape{64, 4, 4}));
    for (auto v : f.data()) EXPECT_EQ(v, 0.0);
    EXPECT_THROW(backbone_features(Tensor<double>::zeros({3, 16, 16}), c, params), DimensionError);
}

TEST(PatchifyTest, RowMajorPatchOrder) {
    std::vector<double> px(16);
    for (std::size_t i = 0; i < 16; ++i) px[i] = static_cast<double>(i);
    Tensor<double> img({1, 4, 4}, px);
    auto tokens = patchify(img, 2, identity(4));
    ASSERT_EQ(tokens.shape(), (Shape{4, 4}));
    // Grid (0,0), (0,1), (1,0), (1,1); each patch flattened row-major.
    EXPECT_EQ(tokens.values(), (std::vector<double>{0, 1, 4, 5, 2, 3, 6, 7, 8, 9, 12, 13, 10, 11, 14, 15}));
}

TEST(PatchifyTest, ZeroImageAndIndivisible) {
    auto tokens = patchify(Tensor<double>::zeros({3, 8, 8}), 4, random_tensor({48, 5}, 2));
    for (auto v : tokens.data()) EXPECT_EQ(v, 0.0);
    EXPECT_THROW(patchify(Tensor<double>::zeros({3, 6, 8}), 4, random_tensor({48, 5}, 2)), DimensionError);
}

TEST(PatchifyTest, FaceOnlyPatchModelAt18x18Grid) {
    ModelConfig c;
    c.hybrid = false;
    c.use_uv = false;
    c.d_model = 768;
    c.n_heads = 12;
    c.tokens = 324;
    c.patch_size = 16;
    c.image_height = c.image_width = 288;  // 18 x 18 grid
    c.n_blocks = 1;
    ASSERT_NO_THROW(c.validate());
    auto params = init_params<float>(c, 3);
    VideoSample s{"face_only", kReal, {{Tensor<float>::zeros({3, 288, 288}), {}, kReal}}};
    NoGradGuard guard;
    EXPECT_EQ(assemble_input(s, params, c).shape(), (Shape{325, 768}));
}

TEST(TokensFromFeaturesTest, DeskShapesAndIdentityMixer) {
    auto feat = random_tensor({64, 4, 4}, 4);
    auto w = random_tensor({64, 64, 1, 1}, 5), b = random_tensor({64}, 6);
    auto mix = random_tensor({4, 16}, 7);
    EXPECT_EQ(tokens_from_features(feat, w, b, mix, 4).shape(), (Shape{4, 64}));
    EXPECT_THROW(tokens_from_features(feat, w, b, mix, 8), DimensionError);

    // h*w == n_tok and identity mixer: token r is the conv output at position r.
    auto small = random_tensor({3, 2, 2}, 8);
    auto w2 = random_tensor({5, 3, 1, 1}, 9), b2 = random_tensor({5}, 10);
    auto tokens = tokens_from_features(small, w2, b2, identity(4), 4);
    auto conv = conv2d(small, w2, b2, 1);
    for (std::size_t r = 0; r < 4; ++r)
        for (std::size_t d = 0; d < 5; ++d) EXPECT_DOUBLE_EQ(tokens.at(r, d), conv[d * 4 + r]);
}

TEST(AssembleFrameTest, WithoutSegmentIsExactConcatenation) {
    auto c = patch_config(1, true);
    c.use_segment = false;
    EmbeddingTable<double> table{{}, {}, Tensor<double>::zeros({1, 8})};
    TokenMatrix<double> face{random_tensor({4, 8}, 1), Stream::face, 0};
    TokenMatrix<double> uv{random_tensor({4, 8}, 2), Stream::uv, 0};
    auto out = assemble_frame<double>(face, uv, table, 0, c);
    EXPECT_EQ(out.values(), concat_rows<double>({face.tokens, uv.tokens}).values());
}

TEST(AssembleFrameTest, ZeroSegmentTableIsConcatenation) {
    auto c = patch_config(2, true);
    EmbeddingTable<double> table{Tensor<double>::zeros({4, 8}), {}, Tensor<double>::zeros({1, 8})};
    TokenMatrix<double> face{random_tensor({4, 8}, 1), Stream::face, 1};
    TokenMatrix<double> uv{random_tensor({4, 8}, 2), Stream::uv, 1};
    auto out = assemble_frame<double>(face, uv, table, 1, c);
    EXPECT_EQ(out.values(), concat_rows<double>({face.tokens, uv.tokens}).values());
}

TEST(AssembleFrameTest, PerFrameSegmentsDifferByRowDifference) {
    auto c = patch_config(3, true);
    auto seg = random_tensor({6, 8}, 3);
    EmbeddingTable<double> table{seg, {}, Tensor<double>::zeros({1, 8})};
    auto face_tokens = random_tensor({4, 8}, 4), uv_tokens = random_tensor({4, 8}, 5);
    auto frame = [&](std::size_t t) {
        return assemble_frame<double>({face_tokens, Stream::face, t}, TokenMatrix<double>{uv_tokens, Stream::uv, t}, table,
                                      t, c);
    };
    auto a = frame(0), b = frame(2);
    for (std::size_t r = 0; r < 8; ++r) {
        const auto stream = r < 4 ? 0u : 1u;
        for (std::size_t d = 0; d < 8; ++d) {
            const double expect = seg.at(c.segment_row(stream, 0), d) - seg.at(c.segment_row(stream, 2), d);
            EXPECT_NEAR(a.at(r, d) - b.at(r, d), expect, 1e-12);
        }
    }
}

TEST(AssembleFrameTest, SegmentsAloneSeparateIdenticalStreams) {
    auto c = patch_config(1, true);
    auto seg = random_tensor({2, 8}, 6);
    EmbeddingTable<double> table{seg, {}, Tensor<double>::zeros({1, 8})};
    auto same = random_tensor({4, 8}, 7);
    auto out = assemble_frame<double>({same, Stream::face, 0}, TokenMatrix<double>{same, Stream::uv, 0}, table, 0, c);
    for (std::size_t d = 0; d < 8; ++d) EXPECT_NEAR(out.at(4, d) - out.at(0, d), seg.at(1, d) - seg.at(0, d), 1e-12);
    c.use_segment = false;
    auto plain = assemble_frame<double>({same, Stream::face, 0}, TokenMatrix<double>{same, Stream::uv, 0}, table, 0, c);
    for (std::size_t d = 0; d < 8; ++d) EXPECT_EQ(plain.at(4, d), plain.at(0, d));
}

TEST(AssembleFrameTest, RejectsBadInputs) {
    auto c = patch_config(2, true);
    EmbeddingTable<double> table{Tensor<double>::zeros({4, 8}), {}, Tensor<double>::zeros({1, 8})};
    TokenMatrix<double> face{random_tensor({4, 8}, 1), Stream::face, 0};
    TokenMatrix<double> uv{random_tensor({4, 8}, 2), Stream::uv, 0};
    TokenMatrix<double> short_uv{random_tensor({3, 8}, 2), Stream::uv, 0};
    EXPECT_THROW(assemble_frame<double>(uv, face, table, 0, c), DimensionError);       // swapped streams
    EXPECT_THROW(assemble_frame<double>(face, face, table, 0, c), DimensionError);     // two faces
    EXPECT_THROW(assemble_frame<double>(face, short_uv, table, 0, c), DimensionError); // unequal counts
    EXPECT_THROW(assemble_frame<double>(face, uv, table, 1, c), DimensionError);       // frame index mismatch
    EXPECT_THROW(assemble_frame<double>(face, std::nullopt, table, 0, c), DimensionError);
    EmbeddingTable<double> bad{Tensor<double>::zeros({2, 8}), {}, Tensor<double>::zeros({1, 8})};
    EXPECT_THROW(assemble_frame<double>(face, uv, bad, 0, c), DimensionError);  // per_frame needs 2T rows
}

TEST(AssembleSequenceTest, ZeroPosAndClsLeaveFramesIntact) {
    auto c = patch_config(2, true);
    EmbeddingTable<double> table{{}, Tensor<double>::zeros({17, 8}), Tensor<double>::zeros({1, 8})};
    auto f0 = random_tensor({8, 8}, 1), f1 = random_tensor({8, 8}, 2);
    auto seq = assemble_sequence<double>({f0, f1}, table, c);
    ASSERT_EQ(seq.shape(), (Shape{17, 8}));
    for (std::size_t d = 0; d < 8; ++d) EXPECT_EQ(seq.at(0, d), 0.0);
    auto frames = concat_rows<double>({f0, f1});
    for (std::size_t r = 0; r < 16; ++r)
        for (std::size_t d = 0; d < 8; ++d) EXPECT_EQ(seq.at(r + 1, d), frames.at(r, d));
}

TEST(AssembleSequenceTest, AddsPositionsAndClassToken) {
    auto c = patch_config(1, false);
    auto pos = random_tensor({5, 8}, 3), cls = random_tensor({1, 8}, 4);
    EmbeddingTable<double> table{{}, pos, cls};
    auto f = random_tensor({4, 8}, 5);
    auto seq = assemble_sequence<double>({f}, table, c);
    ASSERT_EQ(seq.shape(), (Shape{5, 8}));
    for (std::size_t d = 0; d < 8; ++d) {
        EXPECT_DOUBLE_EQ(seq.at(0, d), cls.at(0, d) + pos.at(0, d));
        EXPECT_DOUBLE_EQ(seq.at(3, d), f.at(2, d) + pos.at(3, d));
    }
}

TEST(AssembleSequenceTest, RejectsWrongFrameCountOrTable) {
    auto c = patch_config(2, true);
    EmbeddingTable<double> table{{}, Tensor<double>::zeros({17, 8}), Tensor<double>::zeros({1, 8})};
    EXPECT_THROW(assemble_sequence<double>({random_tensor({8, 8}, 1)}, table, c), DimensionError);
    EmbeddingTable<double> short_pos{{}, Tensor<double>::zeros({9, 8}), Tensor<double>::zeros({1, 8})};
    EXPECT_THROW(assemble_sequence<double>({random_tensor({8, 8}, 1), random_tensor({8, 8}, 2)}, short_pos, c),
                 DimensionError);
    EmbeddingTable<double> no_pos{{}, {}, Tensor<double>::zeros({1, 8})};
    EXPECT_THROW(assemble_sequence<double>({random_tensor({8, 8}, 1), random_tensor({8, 8}, 2)}, no_pos, c),
                 DimensionError);
}

TEST(AssembleInputTest, PaperVideoTokenChainOnSmallBackbone) {
    // Paper token arithmetic (T=9, 32 tokens per stream) on a cheap backbone.
    ModelConfig c;
    c.d_model = 24;
    c.n_heads = 2;
    c.n_blocks = 1;
    c.frames = 9;
    c.tokens = 576;
    c.image_height = c.image_width = 8;
    c.backbone = {{{4, 2, 2}}};
    auto params = init_params<float>(c, 9);
    VideoSample s{"v", kFake, {}};
    for (int t = 0; t < 9; ++t)
        s.frames.push_back({Tensor<float>::full({3, 8, 8}, 0.5f), Tensor<float>::full({3, 8, 8}, 0.25f), kFake});
    ForwardTrace<float> trace;
    NoGradGuard guard;
    auto seq = assemble_input(s, params, c, &trace);
    EXPECT_EQ(seq.shape(), (Shape{577, 24}));
    for (const auto& [name, shape] : trace.shapes) {
        if (name.rfind("tokens.", 0) == 0) EXPECT_EQ(shape, (Shape{32, 24})) << name;
        if (name.rfind("frame.", 0) == 0) EXPECT_EQ(shape, (Shape{64, 24})) << name;
    }
}

TEST(AssembleInputTest, SampleMismatchRejected) {
    auto c = patch_config(2, true);
    auto params = init_params<double>(c, 1);
    VideoSample one_frame{"v", kReal, {{Tensor<float>::zeros({3, 8, 8}), Tensor<float>::zeros({3, 8, 8}), kReal}}};
    EXPECT_THROW(assemble_input(one_frame, params, c), DimensionError);
    VideoSample no_uv{"v", kReal, {}};
    for (int t = 0; t < 2; ++t) no_uv.frames.push_back({Tensor<float>::zeros({3, 8, 8}), {}, kReal});
    EXPECT_THROW(assemble_input(no_uv, params, c), DimensionError);
    VideoSample wrong_size{"v", kReal, {}};
    for (int t = 0; t < 2; ++t)
        wrong_size.frames.push_back({Tensor<float>::zeros({3, 16, 16}), Tensor<float>::zeros({3, 16, 16}), kReal});
    EXPECT_THROW(assemble_input(wrong_size, params, c), DimensionError);
}
