// SPDX-License-Identifier: Apache-2.0
//
// Datasets: seeded synthetic tasks that isolate one mechanism each, plus
// manifest/PPM ingestion of pre-extracted face and UV frames.
//
// Every generated pixel is a multiple of 1/255 so that writing to 8-bit PPM
// and reading back reproduces the tensors bit for bit.

#ifndef DFVT_DATA_HPP
#define DFVT_DATA_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfvt/sample.hpp"
#include "dfvt/tensor.hpp"

namespace dfvt {

/// Missing files, malformed manifests or images, invalid labels.
class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

struct Geometry {
    std::size_t channels = 3;
    std::size_t height = 32;
    std::size_t width = 32;
    std::size_t frames = 1;

    Shape image_shape() const { return {channels, height, width}; }
};

/// Generator knobs. pattern_seed fixes *where* the pattern lives, so train and
/// test splits drawn with different seeds describe the same task.
struct SynthParams {
    double base = 0.5;
    double noise = 0.1;         // stddev of per-pixel Gaussian noise
    double amplitude = 0.3;     // spatial blob / checkerboard strength
    double flicker = 0.15;      // global offset delta of the flicker task
    std::size_t region = 8;     // side of the square pattern region
    std::uint64_t pattern_seed = 7;
};

enum class Task { spatial, stream, flicker };

inline Task parse_task(const std::string& name) {
    if (name == "spatial") return Task::spatial;
    if (name == "stream") return Task::stream;
    if (name == "flicker") return Task::flicker;
    throw std::invalid_argument("unknown task '" + name + "' (expected spatial, stream or flicker)");
}

inline float quantize_pixel(double v) {
    const auto q = static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
    return static_cast<float>(q) / 255.0f;
}

/// Top-left corner of the pattern region for the given params and geometry.
struct Region {
    std::size_t y = 0, x = 0, size = 0;
};

inline Region pattern_region(const SynthParams& p, const Geometry& g) {
    if (p.region == 0 || p.region > g.height || p.region > g.width) {
        throw std::invalid_argument("pattern region " + std::to_string(p.region) + " does not fit " +
                                    std::to_string(g.height) + "x" + std::to_string(g.width));
    }
    std::mt19937_64 rng(p.pattern_seed);
    const auto y = static_cast<std::size_t>(rng() % (g.height - p.region + 1));
    const auto x = static_cast<std::size_t>(rng() % (g.width - p.region + 1));
    return {y, x, p.region};
}

namespace detail {

inline void check_geometry(const Geometry& g, std::size_t n) {
    if (g.channels == 0 || g.height == 0 || g.width == 0 || g.frames == 0) {
        throw std::invalid_argument("degenerate geometry");
    }
    if (n < 2) throw std::invalid_argument("synthetic tasks need n >= 2, got " + std::to_string(n));
}

/// base + offset + N(0, noise) per pixel, unquantised.
inline std::vector<double> noise_image(const Geometry& g, const SynthParams& p, double offset, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, p.noise);
    std::vector<double> px(g.channels * g.height * g.width);
    for (auto& v : px) v = p.base + offset + dist(rng);
    return px;
}

enum class Pattern { blob, checkerboard };

inline void stamp(std::vector<double>& px, const Geometry& g, const Region& r, double amplitude, Pattern kind) {
    for (std::size_t c = 0; c < g.channels; ++c) {
        for (std::size_t y = r.y; y < r.y + r.size; ++y) {
            for (std::size_t x = r.x; x < r.x + r.size; ++x) {
                const double sign = kind == Pattern::blob ? 1.0 : (((y + x) % 2 == 0) ? 1.0 : -1.0);
                px[(c * g.height + y) * g.width + x] += sign * amplitude;
            }
        }
    }
}

inline Tensor<float> finish(const std::vector<double>& px, const Geometry& g) {
    std::vector<float> out(px.size());
    for (std::size_t i = 0; i < px.size(); ++i) out[i] = quantize_pixel(px[i]);
    return Tensor<float>(g.image_shape(), std::move(out));
}

inline std::string video_id(const char* task, std::size_t i) {
    std::ostringstream os;
    os << task << '_' << std::setw(5) << std::setfill('0') << i;
    return os.str();
}

}  // namespace detail

/// Class 1 carries a bright square at a fixed location in every face frame;
/// class 0 is noise only. UV frames are noise for both classes. Classes
/// alternate 0, 1, 0, ...
inline Dataset gen_spatial_task(std::uint64_t seed, std::size_t n, const Geometry& g, const SynthParams& p = {}) {
    detail::check_geometry(g, n);
    const auto region = pattern_region(p, g);
    std::mt19937_64 rng(seed);
    Dataset data;
    for (std::size_t i = 0; i < n; ++i) {
        VideoSample v{detail::video_id("spatial", i), static_cast<int>(i % 2), {}};
        for (std::size_t t = 0; t < g.frames; ++t) {
            auto face = detail::noise_image(g, p, 0.0, rng);
            auto uv = detail::noise_image(g, p, 0.0, rng);
            if (v.label == kFake) detail::stamp(face, g, region, p.amplitude, detail::Pattern::blob);
            v.frames.push_back({detail::finish(face, g), detail::finish(uv, g), v.label});
        }
        data.push_back(std::move(v));
    }
    return data;
}

/// A zero-mean checkerboard sits in the UV image (class 1) or in the face
/// image (class 0). Per-stream pixel means do not depend on the class; only
/// which stream carries the pattern does.
inline Dataset gen_stream_identity_task(std::uint64_t seed, std::size_t n, const Geometry& g,
                                        const SynthParams& p = {}) {
    detail::check_geometry(g, n);
    const auto region = pattern_region(p, g);
    std::mt19937_64 rng(seed);
    Dataset data;
    for (std::size_t i = 0; i < n; ++i) {
        VideoSample v{detail::video_id("stream", i), static_cast<int>(i % 2), {}};
        for (std::size_t t = 0; t < g.frames; ++t) {
            auto face = detail::noise_image(g, p, 0.0, rng);
            auto uv = detail::noise_image(g, p, 0.0, rng);
            detail::stamp(v.label == kFake ? uv : face, g, region, p.amplitude, detail::Pattern::checkerboard);
            v.frames.push_back({detail::finish(face, g), detail::finish(uv, g), v.label});
        }
        data.push_back(std::move(v));
    }
    return data;
}

/// Class 1 alternates a global offset +d/-d between consecutive frames
/// (random starting sign); class 0 holds +d or -d throughout. Every single
/// frame has the same distribution in both classes.
inline Dataset gen_temporal_flicker_task(std::uint64_t seed, std::size_t n, const Geometry& g,
                                         const SynthParams& p = {}) {
    detail::check_geometry(g, n);
    if (g.frames < 2) throw std::invalid_argument("flicker task needs at least 2 frames per video");
    std::mt19937_64 rng(seed);
    Dataset data;
    for (std::size_t i = 0; i < n; ++i) {
        VideoSample v{detail::video_id("flicker", i), static_cast<int>(i % 2), {}};
        const double sign = (rng() & 1) ? 1.0 : -1.0;
        for (std::size_t t = 0; t < g.frames; ++t) {
            const double s = (v.label == kFake && t % 2 == 1) ? -sign : sign;
            auto face = detail::noise_image(g, p, s * p.flicker, rng);
            auto uv = detail::noise_image(g, p, s * p.flicker, rng);
            v.frames.push_back({detail::finish(face, g), detail::finish(uv, g), v.label});
        }
        data.push_back(std::move(v));
    }
    return data;
}

inline Dataset generate_task(Task task, std::uint64_t seed, std::size_t n, const Geometry& g,
                             const SynthParams& p = {}) {
    switch (task) {
        case Task::spatial: return gen_spatial_task(seed, n, g, p);
        case Task::stream: return gen_stream_identity_task(seed, n, g, p);
        case Task::flicker: return gen_temporal_flicker_task(seed, n, g, p);
    }
    throw std::invalid_argument("unknown task");
}

// ---------------------------------------------------------------------------
// Portable pixmap (binary P6, 8-bit RGB).

inline void write_ppm(const std::filesystem::path& path, const Tensor<float>& image) {
    if (image.rank() != 3 || image.dim(0) != 3) {
        throw DataError("write_ppm: expected a 3xHxW image, got " + to_string(image.shape()) + " for " + path.string());
    }
    const auto h = image.dim(1), w = image.dim(2);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path.string());
    os << "P6\n" << w << ' ' << h << "\n255\n";
    std::vector<unsigned char> buf(3 * h * w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = std::clamp(static_cast<double>(image[(c * h + y) * w + x]), 0.0, 1.0);
                buf[(y * w + x) * 3 + c] = static_cast<unsigned char>(std::lround(v * 255.0));
            }
        }
    }
    os.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!os) throw DataError("write failed: " + path.string());
}

inline Tensor<float> read_ppm(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("missing image file: " + path.string());
    auto token = [&]() {
        std::string t;
        while (is >> t) {
            if (t[0] != '#') return t;
            std::string rest;
            std::getline(is, rest);
        }
        throw DataError("truncated PPM header: " + path.string());
    };
    if (token() != "P6") throw DataError("not a binary PPM (P6): " + path.string());
    std::size_t w = 0, h = 0, maxval = 0;
    try {
        w = std::stoul(token());
        h = std::stoul(token());
        maxval = std::stoul(token());
    } catch (const std::logic_error&) {
        throw DataError("malformed PPM header: " + path.string());
    }
    if (w == 0 || h == 0 || maxval != 255) throw DataError("unsupported PPM geometry or depth: " + path.string());
    is.get();  // single whitespace after maxval
    std::vector<unsigned char> buf(3 * h * w);
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(is.gcount()) != buf.size()) throw DataError("truncated PPM data: " + path.string());
    std::vector<float> px(buf.size());
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            for (std::size_t c = 0; c < 3; ++c) px[(c * h + y) * w + x] = static_cast<float>(buf[(y * w + x) * 3 + c]) / 255.0f;
        }
    }
    return Tensor<float>({3, h, w}, std::move(px));
}

// ---------------------------------------------------------------------------
// Manifest: "dfvt-manifest v1", then per video
//   id <TAB> label <TAB> T <TAB> face_1,...,face_T <TAB> uv_1,...,uv_T
// Relative paths resolve against the manifest's directory. An empty uv
// field marks face-only data.

inline constexpr const char* kManifestHeader = "dfvt-manifest v1";

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(s);
    while (std::getline(is, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

}  // namespace detail

inline Dataset load_manifest(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw DataError("missing manifest: " + path.string());
    const auto root = path.parent_path();
    std::string line;
    if (!std::getline(is, line) || line != kManifestHeader) {
        throw DataError(path.string() + ":1: expected header '" + std::string(kManifestHeader) + "'");
    }
    Dataset data;
    std::size_t number = 1;
    while (std::getline(is, line)) {
        ++number;
        if (line.empty()) continue;
        const auto where = path.string() + ":" + std::to_string(number) + ": ";
        const auto fields = detail::split(line, '\t');
        if (fields.size() != 5) throw DataError(where + "expected 5 tab-separated fields, got " + std::to_string(fields.size()));
        VideoSample v;
        v.id = fields[0];
        if (v.id.empty()) throw DataError(where + "empty video id");
        if (fields[1] != "0" && fields[1] != "1") throw DataError(where + "label must be 0 or 1, got '" + fields[1] + "'");
        v.label = fields[1] == "1" ? kFake : kReal;
        std::size_t frames = 0;
        try {
            std::size_t used = 0;
            frames = std::stoul(fields[2], &used);
            if (used != fields[2].size()) throw std::invalid_argument("trailing characters");
        } catch (const std::logic_error&) {
            throw DataError(where + "frame count is not a number: '" + fields[2] + "'");
        }
        const auto faces = detail::split(fields[3], ',');
        const auto uvs = fields[4].empty() ? std::vector<std::string>{} : detail::split(fields[4], ',');
        if (frames == 0 || faces.size() != frames || (!uvs.empty() && uvs.size() != frames)) {
            throw DataError(where + "frame count " + fields[2] + " does not match the listed paths");
        }
        for (std::size_t t = 0; t < frames; ++t) {
            FrameSample f;
            f.label = v.label;
            f.face = read_ppm(root / faces[t]);
            if (!uvs.empty()) {
                f.uv = read_ppm(root / uvs[t]);
                if (f.uv.shape() != f.face.shape()) throw DataError(where + "face and uv geometry differ");
            }
            v.frames.push_back(std::move(f));
        }
        data.push_back(std::move(v));
    }
    return data;
}

/// Writes <dir>/manifest.tsv and <dir>/frames/*.ppm. Returns the manifest path.
inline std::filesystem::path write_dataset(const std::filesystem::path& dir, const Dataset& data) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir / "frames", ec);
    if (ec) throw DataError("cannot create " + (dir / "frames").string() + ": " + ec.message());
    const auto manifest = dir / "manifest.tsv";
    std::ofstream os(manifest, std::ios::binary);
    if (!os) throw DataError("cannot write " + manifest.string());
    os << kManifestHeader << '\n';
    for (const auto& v : data) {
        std::string faces, uvs;
        for (std::size_t t = 0; t < v.frames.size(); ++t) {
            const auto stem = "frames/" + v.id + "_" + std::to_string(t);
            write_ppm(dir / (stem + "_face.ppm"), v.frames[t].face);
            faces += (t ? "," : "") + stem + "_face.ppm";
            if (v.frames[t].uv) {
                write_ppm(dir / (stem + "_uv.ppm"), v.frames[t].uv);
                uvs += (t ? "," : "") + stem + "_uv.ppm";
            }
        }
        os << v.id << '\t' << v.label << '\t' << v.frames.size() << '\t' << faces << '\t' << uvs << '\n';
    }
    if (!os) throw DataError("write failed: " + manifest.string());
    return manifest;
}

}  // namespace dfvt

#endif  // DFVT_DATA_HPP
