// SPDX-License-Identifier: Apache-2.0
//
// key=value run configuration. Unknown keys are rejected and every value is
// range-checked. The same text form embeds the model configuration inside
// checkpoints.

#ifndef DFVT_RUN_CONFIG_HPP
#define DFVT_RUN_CONFIG_HPP

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dfvt/config.hpp"
#include "dfvt/data.hpp"
#include "dfvt/learning.hpp"

namespace dfvt {

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    SynthParams synth;
    Task task = Task::spatial;
    std::uint64_t data_seed = 1;
    std::size_t n = 512;
    std::string data;  // manifest path
    std::string out;

    void validate() const {
        model.validate();
        train.validate();
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
        throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
    }
    try {
        return std::stoull(v);
    } catch (const std::out_of_range&) {
        throw ConfigError(key + ": value out of range: " + v);
    }
}

inline std::size_t parse_positive(const std::string& key, const std::string& v) {
    const auto n = parse_uint(key, v);
    if (n == 0) throw ConfigError(key + ": must be positive");
    return static_cast<std::size_t>(n);
}

inline double parse_double(const std::string& key, const std::string& v) {
    std::size_t used = 0;
    double d = 0;
    try {
        d = std::stod(v, &used);
    } catch (const std::logic_error&) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
    if (used != v.size() || !std::isfinite(d)) throw ConfigError(key + ": expected a finite number, got '" + v + "'");
    return d;
}

inline bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

inline BackboneConfig parse_backbone(const std::string& key, const std::string& v) {
    if (v == "paper") return BackboneConfig::paper();
    if (v == "desk") return BackboneConfig::desk();
    BackboneConfig b;
    std::istringstream is(v);
    std::string stage;
    while (std::getline(is, stage, ',')) {
        std::istringstream ss(stage);
        std::string a, k, s;
        if (!std::getline(ss, a, ':') || !std::getline(ss, k, ':') || !std::getline(ss, s) ) {
            throw ConfigError(key + ": stage '" + stage + "' is not channels:kernel:stride");
        }
        b.stages.push_back({parse_positive(key, a), parse_positive(key, k), parse_positive(key, s)});
    }
    if (b.stages.empty()) throw ConfigError(key + ": no stages");
    return b;
}

inline std::string format_backbone(const BackboneConfig& b) {
    std::string out;
    for (std::size_t i = 0; i < b.stages.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(b.stages[i].out_channels) + ":" + std::to_string(b.stages[i].kernel) + ":" +
               std::to_string(b.stages[i].stride);
    }
    return out;
}

inline std::string format_double(double d) {
    std::ostringstream os;
    os.precision(std::numeric_limits<double>::max_digits10);
    os << d;
    return os.str();
}

}  // namespace detail

/// Applies one key=value pair. Throws ConfigError for unknown keys or bad values.
inline void apply_setting(RunConfig& rc, const std::string& key, const std::string& value) {
    using namespace detail;
    auto& m = rc.model;
    auto& t = rc.train;
    auto& s = rc.synth;
    if (key == "d_model") m.d_model = parse_positive(key, value);
    else if (key == "frames") m.frames = parse_positive(key, value);
    else if (key == "tokens") m.tokens = parse_positive(key, value);
    else if (key == "patch_size") m.patch_size = parse_positive(key, value);
    else if (key == "n_heads") m.n_heads = parse_positive(key, value);
    else if (key == "n_blocks") m.n_blocks = parse_positive(key, value);
    else if (key == "mlp_ratio") m.mlp_ratio = parse_positive(key, value);
    else if (key == "channels") m.channels = parse_positive(key, value);
    else if (key == "image_height") m.image_height = parse_positive(key, value);
    else if (key == "image_width") m.image_width = parse_positive(key, value);
    else if (key == "use_uv") m.use_uv = parse_bool(key, value);
    else if (key == "use_segment") m.use_segment = parse_bool(key, value);
    else if (key == "use_positional") m.use_positional = parse_bool(key, value);
    else if (key == "hybrid") m.hybrid = parse_bool(key, value);
    else if (key == "freeze_backbone") m.freeze_backbone = parse_bool(key, value);
    else if (key == "segment_mode") {
        if (value == "two") m.segment_mode = SegmentMode::two;
        else if (value == "per_frame") m.segment_mode = SegmentMode::per_frame;
        else throw ConfigError(key + ": expected two or per_frame, got '" + value + "'");
    } else if (key == "activation") {
        if (value == "gelu") m.activation = Activation::gelu;
        else if (value == "relu") m.activation = Activation::relu;
        else throw ConfigError(key + ": expected gelu or relu, got '" + value + "'");
    } else if (key == "backbone") m.backbone = parse_backbone(key, value);
    else if (key == "epochs") t.epochs = static_cast<std::size_t>(parse_uint(key, value));
    else if (key == "learning_rate") {
        t.learning_rate = parse_double(key, value);
        if (t.learning_rate <= 0) throw ConfigError(key + ": must be > 0");
    } else if (key == "batch_size") t.batch_size = parse_positive(key, value);
    else if (key == "seed") t.seed = parse_uint(key, value);
    else if (key == "anchor_weight") {
        t.anchor_weight = parse_double(key, value);
        if (t.anchor_weight < 0) throw ConfigError(key + ": must be >= 0");
    } else if (key == "shuffle") t.shuffle = parse_bool(key, value);
    else if (key == "window_stride") t.window_stride = parse_positive(key, value);
    else if (key == "task") {
        try {
            rc.task = parse_task(value);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(key + ": " + e.what());
        }
    } else if (key == "data_seed") rc.data_seed = parse_uint(key, value);
    else if (key == "n") rc.n = static_cast<std::size_t>(parse_uint(key, value));
    else if (key == "noise") s.noise = parse_double(key, value);
    else if (key == "amplitude") s.amplitude = parse_double(key, value);
    else if (key == "flicker") s.flicker = parse_double(key, value);
    else if (key == "region") s.region = parse_positive(key, value);
    else if (key == "pattern_seed") s.pattern_seed = parse_uint(key, value);
    else if (key == "data") rc.data = value;
    else if (key == "out") rc.out = value;
    else throw ConfigError("unknown configuration key '" + key + "'");
}

/// Parses key=value lines; '#' starts a comment. Validation runs at the end.
inline RunConfig parse_run_config(std::istream& is, RunConfig rc = {}) {
    std::string line;
    std::size_t number = 0;
    while (std::getline(is, line)) {
        ++number;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError("line " + std::to_string(number) + ": expected key=value");
        try {
            apply_setting(rc, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(number) + ": " + e.what());
        }
    }
    rc.validate();
    return rc;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot read config file " + path);
    return parse_run_config(is);
}

/// Canonical key=value text for a model configuration.
inline std::string model_config_text(const ModelConfig& m) {
    std::ostringstream os;
    os << "d_model=" << m.d_model << "\nframes=" << m.frames << "\ntokens=" << m.tokens
       << "\npatch_size=" << m.patch_size << "\nn_heads=" << m.n_heads << "\nn_blocks=" << m.n_blocks
       << "\nmlp_ratio=" << m.mlp_ratio << "\nchannels=" << m.channels << "\nimage_height=" << m.image_height
       << "\nimage_width=" << m.image_width << "\nuse_uv=" << (m.use_uv ? "true" : "false")
       << "\nuse_segment=" << (m.use_segment ? "true" : "false")
       << "\nuse_positional=" << (m.use_positional ? "true" : "false") << "\nhybrid=" << (m.hybrid ? "true" : "false")
       << "\nfreeze_backbone=" << (m.freeze_backbone ? "true" : "false")
       << "\nsegment_mode=" << (m.segment_mode == SegmentMode::two ? "two" : "per_frame")
       << "\nactivation=" << (m.activation == Activation::gelu ? "gelu" : "relu")
       << "\nbackbone=" << detail::format_backbone(m.backbone) << '\n';
    return os.str();
}

inline ModelConfig parse_model_config(const std::string& text) {
    std::istringstream is(text);
    return parse_run_config(is).model;
}

}  // namespace dfvt

#endif  // DFVT_RUN_CONFIG_HPP
