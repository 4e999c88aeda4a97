// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint, little-endian regardless of host:
//
//   "DFVT"  u32 version  u32 config_len  config text (key=value lines)
//   u32 param_count
//   per param: u32 name_len  name  u32 rank  u32 dims[rank]  f32 values[numel]
//   u32 CRC-32 of every preceding byte

#ifndef DFVT_CHECKPOINT_HPP
#define DFVT_CHECKPOINT_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include <zlib.h>

#include "dfvt/model.hpp"
#include "dfvt/params.hpp"
#include "dfvt/run_config.hpp"

namespace dfvt {

class CheckpointError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
    ModelConfig config;
    ParameterStore<float> params;
};

namespace detail {

class ByteWriter {
  public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<unsigned char>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void raw(const std::string& s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }
    std::vector<unsigned char>& bytes() { return bytes_; }

  private:
    std::vector<unsigned char> bytes_;
};

class ByteReader {
  public:
    ByteReader(const unsigned char* data, std::size_t size) : data_(data), size_(size) {}

    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string raw(std::size_t n) {
        need(n);
        std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == size_; }

  private:
    void need(std::size_t n) const {
        if (size_ - pos_ < n) throw CheckpointError("checkpoint truncated");
    }
    const unsigned char* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
};

inline std::uint32_t crc32_of(const unsigned char* data, std::size_t n) {
    return static_cast<std::uint32_t>(::crc32(0L, data, static_cast<uInt>(n)));
}

}  // namespace detail

inline std::vector<unsigned char> serialize_checkpoint(const ModelConfig& config, const ParameterStore<float>& params) {
    detail::ByteWriter w;
    w.raw("DFVT");
    w.u32(kCheckpointVersion);
    const auto text = model_config_text(config);
    w.u32(static_cast<std::uint32_t>(text.size()));
    w.raw(text);
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const auto& e : params.entries()) {
        w.u32(static_cast<std::uint32_t>(e.name.size()));
        w.raw(e.name);
        w.u32(static_cast<std::uint32_t>(e.tensor.rank()));
        for (auto d : e.tensor.shape()) w.u32(static_cast<std::uint32_t>(d));
        for (auto v : e.tensor.data()) w.f32(v);
    }
    auto& bytes = w.bytes();
    const auto crc = detail::crc32_of(bytes.data(), bytes.size());
    w.u32(crc);
    return std::move(bytes);
}

/// Parses and verifies a checkpoint. The parameter set must be exactly the one
/// the embedded configuration implies.
inline Checkpoint deserialize_checkpoint(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 12) throw CheckpointError("checkpoint truncated");
    detail::ByteReader tail(bytes.data() + bytes.size() - 4, 4);
    if (tail.u32() != detail::crc32_of(bytes.data(), bytes.size() - 4)) {
        throw CheckpointError("checkpoint checksum mismatch");
    }
    detail::ByteReader r(bytes.data(), bytes.size() - 4);
    if (r.raw(4) != "DFVT") throw CheckpointError("not a DFVT checkpoint");
    if (const auto v = r.u32(); v != kCheckpointVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(v));
    }
    Checkpoint ck;
    try {
        ck.config = parse_model_config(r.raw(r.u32()));
    } catch (const ConfigError& e) {
        throw CheckpointError(std::string("checkpoint config: ") + e.what());
    }
    const auto expected = param_layout(ck.config);
    const auto count = r.u32();
    if (count != expected.size()) {
        throw CheckpointError("checkpoint holds " + std::to_string(count) + " tensors, configuration implies " +
                              std::to_string(expected.size()));
    }
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto name = r.raw(r.u32());
        const auto& ref = expected[i];
        Shape shape(r.u32());
        for (auto& d : shape) d = r.u32();
        if (name != ref.name || shape != ref.shape) {
            throw CheckpointError("checkpoint tensor " + name + " " + to_string(shape) + " does not match expected " +
                                  ref.name + " " + to_string(ref.shape));
        }
        std::vector<float> values(numel(shape));
        for (auto& v : values) v = r.f32();
        ck.params.add(name, Tensor<float>(shape, std::move(values)), ref.trainable);
    }
    if (!r.done()) throw CheckpointError("trailing bytes in checkpoint");
    return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const ModelConfig& config,
                            const ParameterStore<float>& params) {
    const auto bytes = serialize_checkpoint(config, params);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw CheckpointError("cannot write " + path.string());
    os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!os) throw CheckpointError("write failed: " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw CheckpointError("cannot read checkpoint " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    return deserialize_checkpoint(bytes);
}

}  // namespace dfvt

#endif  // DFVT_CHECKPOINT_HPP
