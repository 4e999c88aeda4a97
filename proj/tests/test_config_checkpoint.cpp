// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dfvt/checkpoint.hpp"
#include "dfvt/run_config.hpp"

using namespace dfvt;
namespace fs = std::filesystem;

namespace {

RunConfig parse(const std::string& text) {
    std::istringstream is(text);
    return parse_run_config(is);
}

ModelConfig small_model() {
    ModelConfig m;
    m.d_model = 16;
    m.n_heads = 2;
    m.frames = 2;
    m.tokens = 8;
    m.image_height = 16;
    m.image_width = 16;
    return m;
}

bool bit_equal(const ParameterStore<float>& a, const ParameterStore<float>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto &x = a.entries()[i], &y = b.entries()[i];
        if (x.name != y.name || x.trainable != y.trainable || x.tensor.shape() != y.tensor.shape()) return false;
        const auto& xv = x.tensor.values();
        const auto& yv = y.tensor.values();
        if (std::memcmp(xv.data(), yv.data(), xv.size() * sizeof(float)) != 0) return false;
    }
    return true;
}

std::uint32_t read_u32le(const std::vector<unsigned char>& b, std::size_t at) {
    return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
           (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

}  // namespace

TEST(RunConfigTest, ParsesKeysCommentsAndWhitespace) {
    auto rc = parse("# ablation\n d_model = 32 \nn_heads=4\nuse_segment=false  # off\n\nlearning_rate=0.25\n"
                    "task=flicker\nsegment_mode=two\nactivation=relu\nbackbone=8:3:2,16:3:1\nn=0\n");
    EXPECT_EQ(rc.model.d_model, 32u);
    EXPECT_EQ(rc.model.n_heads, 4u);
    EXPECT_FALSE(rc.model.use_segment);
    EXPECT_EQ(rc.train.learning_rate, 0.25);
    EXPECT_EQ(rc.task, Task::flicker);
    EXPECT_EQ(rc.model.segment_mode, SegmentMode::two);
    EXPECT_EQ(rc.model.activation, Activation::relu);
    ASSERT_EQ(rc.model.backbone.stages.size(), 2u);
    EXPECT_EQ(rc.model.backbone.stages[1].out_channels, 16u);
    EXPECT_EQ(rc.n, 0u);
}

TEST(RunConfigTest, RejectsUnknownKeysWithLineNumber) {
    try {
        parse("d_model=32\nlearning_rat=0.1\n");
        FAIL() << "unknown key accepted";
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("line 2"), std::string::npos) << msg;
        EXPECT_NE(msg.find("learning_rat"), std::string::npos) << msg;
    }
    EXPECT_THROW(parse("just words\n"), ConfigError);
}

TEST(RunConfigTest, RejectsOutOfRangeAndMistypedValues) {
    for (const char* bad : {"d_model=0", "d_model=-3", "d_model=3.5", "n_heads=x", "learning_rate=0",
                            "learning_rate=-1", "learning_rate=nan", "learning_rate=1e999", "anchor_weight=-0.1",
                            "batch_size=0", "use_uv=maybe", "segment_mode=three", "activation=tanh", "task=audio",
                            "backbone=8:3", "backbone=", "window_stride=0", "seed=99999999999999999999999"}) {
        EXPECT_THROW(parse(std::string(bad) + "\n"), ConfigError) << bad;
    }
    // Individually valid values that break a cross-field constraint.
    EXPECT_THROW(parse("d_model=30\nn_heads=4\n"), ConfigError);
    EXPECT_THROW(parse("frames=3\ntokens=8\n"), ConfigError);
}

TEST(RunConfigTest, ModelTextRoundTrip) {
    auto m = small_model();
    m.use_positional = false;
    m.segment_mode = SegmentMode::two;
    m.activation = Activation::relu;
    m.freeze_backbone = true;
    const auto text = model_config_text(m);
    EXPECT_EQ(model_config_text(parse_model_config(text)), text);
    EXPECT_EQ(model_config_text(parse_model_config(model_config_text(ModelConfig{}))), model_config_text(ModelConfig{}));
}

TEST(CheckpointTest, RoundTripIsBitExact) {
    const auto m = small_model();
    auto params = init_params<float>(m, 5);
    const auto bytes = serialize_checkpoint(m, params);
    auto ck = deserialize_checkpoint(bytes);
    EXPECT_EQ(model_config_text(ck.config), model_config_text(m));
    EXPECT_TRUE(bit_equal(ck.params, params));
    EXPECT_EQ(serialize_checkpoint(ck.config, ck.params), bytes);
}

TEST(CheckpointTest, SpecialFloatValuesSurvive) {
    const auto m = small_model();
    auto params = init_params<float>(m, 1);
    auto& t = params.entries()[0].tensor;
    t.data()[0] = -0.0f;
    t.data()[1] = std::numeric_limits<float>::denorm_min();
    t.data()[2] = std::numeric_limits<float>::max();
    auto ck = deserialize_checkpoint(serialize_checkpoint(m, params));
    EXPECT_TRUE(bit_equal(ck.params, params));
    EXPECT_TRUE(std::signbit(ck.params.entries()[0].tensor.values()[0]));
}

TEST(CheckpointTest, LayoutIsLittleEndianWithTrailingCrc) {
    const auto m = small_model();
    auto params = init_params<float>(m, 2);
    const auto bytes = serialize_checkpoint(m, params);
    ASSERT_GT(bytes.size(), 16u);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "DFVT");
    EXPECT_EQ(read_u32le(bytes, 4), kCheckpointVersion);
    const auto text_len = read_u32le(bytes, 8);
    EXPECT_EQ(std::string(bytes.begin() + 12, bytes.begin() + 12 + text_len), model_config_text(m));
    EXPECT_EQ(read_u32le(bytes, bytes.size() - 4), detail::crc32_of(bytes.data(), bytes.size() - 4));

    // First record: name, rank, dims, then the first value's IEEE-754 bits.
    std::size_t at = 12 + text_len;
    EXPECT_EQ(read_u32le(bytes, at), params.size());
    at += 4;
    const auto& first = params.entries()[0];
    const auto name_len = read_u32le(bytes, at);
    EXPECT_EQ(std::string(bytes.begin() + at + 4, bytes.begin() + at + 4 + name_len), first.name);
    at += 4 + name_len;
    EXPECT_EQ(read_u32le(bytes, at), first.tensor.rank());
    at += 4 + 4 * first.tensor.rank();
    EXPECT_EQ(read_u32le(bytes, at), std::bit_cast<std::uint32_t>(first.tensor.values()[0]));
}

TEST(CheckpointTest, EverySingleBitFlipIsRejected) {
    const auto m = small_model();
    const auto bytes = serialize_checkpoint(m, init_params<float>(m, 3));
    // CRC-32 detects all single-bit errors; walk a stride of positions across
    // header, config text, records and the checksum itself.
    const std::size_t stride = std::max<std::size_t>(1, bytes.size() / 97);
    for (std::size_t i = 0; i < bytes.size(); i += stride) {
        for (int bit : {0, 7}) {
            auto corrupt = bytes;
            corrupt[i] ^= static_cast<unsigned char>(1u << bit);
            EXPECT_THROW(deserialize_checkpoint(corrupt), CheckpointError) << "byte " << i << " bit " << bit;
        }
    }
    auto tail = bytes;
    tail.back() ^= 0x80;
    EXPECT_THROW(deserialize_checkpoint(tail), CheckpointError);
}

TEST(CheckpointTest, StructuralErrors) {
    const auto m = small_model();
    EXPECT_THROW(deserialize_checkpoint({}), CheckpointError);
    EXPECT_THROW(deserialize_checkpoint(std::vector<unsigned char>(8, 0)), CheckpointError);

    auto bytes = serialize_checkpoint(m, init_params<float>(m, 3));
    bytes.resize(bytes.size() - 10);  // truncation also breaks the checksum
    EXPECT_THROW(deserialize_checkpoint(bytes), CheckpointError);

    // A store whose layout disagrees with its config is refused even with a valid checksum.
    auto other = m;
    other.n_blocks = 1;
    const auto mismatched = serialize_checkpoint(m, init_params<float>(other, 3));
    try {
        deserialize_checkpoint(mismatched);
        FAIL() << "layout mismatch accepted";
    } catch (const CheckpointError& e) {
        EXPECT_NE(std::string(e.what()).find("tensors"), std::string::npos) << e.what();
    }
}

TEST(CheckpointTest, FileRoundTripAndMissingFile) {
    const auto dir = fs::temp_directory_path() / "dfvt_test_ckpt";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto m = small_model();
    auto params = init_params<float>(m, 9);
    save_checkpoint(dir / "a.ckpt", m, params);
    save_checkpoint(dir / "b.ckpt", m, params);
    auto slurp = [](const fs::path& p) {
        std::ifstream is(p, std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    };
    EXPECT_EQ(slurp(dir / "a.ckpt"), slurp(dir / "b.ckpt"));
    EXPECT_TRUE(bit_equal(load_checkpoint(dir / "a.ckpt").params, params));
    EXPECT_THROW(load_checkpoint(dir / "absent.ckpt"), CheckpointError);
    fs::remove_all(dir);
}

TEST(ShippedConfigTest, EveryConfigParsesAndDeskConfigsRunForward) {
    std::size_t count = 0;
    for (const auto& entry : fs::recursive_directory_iterator(DFVT_CONFIG_DIR)) {
        if (entry.path().extension() != ".cfg") continue;
        ++count;
        RunConfig rc;
        ASSERT_NO_THROW(rc = load_run_config(entry.path().string())) << entry.path();
        EXPECT_NO_THROW(param_layout(rc.model)) << entry.path();
        if (rc.model.image_height > 64) continue;  // paper scale: shapes only
        const Geometry g{rc.model.channels, rc.model.image_height, rc.model.image_width, rc.model.frames};
        auto sample = gen_spatial_task(1, 2, g)[1];
        auto params = init_params<float>(rc.model, 1);
        NoGradGuard guard;
        EXPECT_EQ(model_forward(sample, params, rc.model).logits.size(), 2u) << entry.path();
    }
    EXPECT_EQ(count, 15u);
}

TEST(ShippedConfigTest, AblationRowsToggleTheDocumentedSwitches) {
    auto load = [](const std::string& name) {
        return load_run_config(std::string(DFVT_CONFIG_DIR) + "/ablation/" + name + ".cfg").model;
    };
    const auto p1 = load("01_patch_face"), p2 = load("02_patch_face_uv"), p3 = load("03_patch_face_uv_segments");
    const auto h4 = load("04_hybrid_face"), h5 = load("05_hybrid_face_uv"), h6 = load("06_hybrid_face_uv_segments");
    const auto v7 = load("07_video"), v8 = load("08_video_segments");
    for (const auto& m : {p1, p2, p3}) EXPECT_FALSE(m.hybrid);
    for (const auto& m : {h4, h5, h6, v7, v8}) EXPECT_TRUE(m.hybrid);
    EXPECT_FALSE(p1.use_uv);
    EXPECT_FALSE(h4.use_uv);
    for (const auto& m : {p2, h5, v7}) EXPECT_TRUE(m.use_uv && !m.use_segment);
    for (const auto& m : {p3, h6, v8}) EXPECT_TRUE(m.use_uv && m.use_segment);
    for (const auto& m : {p1, p2, p3, h4, h5, h6}) EXPECT_EQ(m.frames, 1u);
    EXPECT_EQ(v7.frames, 9u);
    EXPECT_EQ(v8.frames, 9u);

    const auto paper = load_run_config(std::string(DFVT_CONFIG_DIR) + "/paper/video_segments.cfg").model;
    EXPECT_EQ(model_config_text(paper), model_config_text(ModelConfig::paper_video()));
}
