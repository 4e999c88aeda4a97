// SPDX-License-Identifier: Apache-2.0
//
// Subcommand implementations behind tools/dfvt. Each returns an exit code
// and writes diagnostics to the given stream, so tests can drive them
// in-process.

#ifndef DFVT_CLI_HPP
#define DFVT_CLI_HPP

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dfvt/checkpoint.hpp"
#include "dfvt/data.hpp"
#include "dfvt/gradcheck_suite.hpp"
#include "dfvt/learning.hpp"
#include "dfvt/metrics.hpp"
#include "dfvt/model.hpp"
#include "dfvt/predict.hpp"
#include "dfvt/run_config.hpp"

namespace dfvt::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kVerification = 3 };

using Overrides = std::vector<std::pair<std::string, std::string>>;

/// Splits "key=value".
inline std::pair<std::string, std::string> parse_override(const std::string& kv) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + kv + "' is not key=value");
    return {kv.substr(0, eq), kv.substr(eq + 1)};
}

/// Config file (optional) then overrides, validated once at the end.
inline RunConfig resolve_config(const std::string& path, const Overrides& overrides) {
    RunConfig rc;
    if (!path.empty()) {
        std::ifstream is(path);
        if (!is) throw ConfigError("cannot read config file " + path);
        rc = parse_run_config(is);
    }
    for (const auto& [k, v] : overrides) apply_setting(rc, k, v);
    rc.validate();
    return rc;
}

namespace detail {

/// Maps library exceptions onto the exit-code contract.
inline int guarded(std::ostream& err, const char* command, const std::function<int()>& body) {
    try {
        return body();
    } catch (const ConfigError& e) {
        err << command << ": config error: " << e.what() << '\n';
        return kUsage;
    } catch (const DataError& e) {
        err << command << ": data error: " << e.what() << '\n';
        return kData;
    } catch (const CheckpointError& e) {
        err << command << ": checkpoint error: " << e.what() << '\n';
        return kData;
    } catch (const DimensionError& e) {
        err << command << ": data error: " << e.what() << '\n';
        return kData;
    } catch (const std::invalid_argument& e) {
        err << command << ": data error: " << e.what() << '\n';
        return kData;
    } catch (const std::exception& e) {
        err << command << ": error: " << e.what() << '\n';
        return kData;
    }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("cannot write " + path.string());
    os << text;
    if (!os) throw DataError("write failed: " + path.string());
}

inline Dataset load_nonempty(const std::string& manifest) {
    if (manifest.empty()) throw ConfigError("no dataset given (--data or data= in the config)");
    auto data = load_manifest(manifest);
    if (data.empty()) throw DataError("dataset " + manifest + " is empty");
    return data;
}

inline std::string history_path(const std::string& checkpoint) { return checkpoint + ".history.tsv"; }

inline std::string report_text(const std::vector<ScoredPrediction>& windows) {
    std::ostringstream os;
    write_metrics(os, "window", evaluate_metrics(windows));
    write_metrics(os, "video", evaluate_metrics(video_scores(windows)));
    return os.str();
}

}  // namespace detail

struct GenDataArgs {
    std::string task = "spatial";
    std::uint64_t seed = 1;
    std::size_t n = 64;
    std::string out;
    std::string config;  // optional: geometry and generator parameters
    Overrides overrides;
};

/// Geometry of generated data: channels and image size from the model
/// section; 9 frames per video unless the model asks for more.
inline Geometry generation_geometry(const ModelConfig& m) {
    return {m.channels, m.image_height, m.image_width, std::max<std::size_t>(m.frames, 9)};
}

inline int cmd_gen_data(const GenDataArgs& a, std::ostream& err) {
    return detail::guarded(err, "gen-data", [&] {
        if (a.out.empty()) throw ConfigError("--out is required");
        const auto rc = resolve_config(a.config, a.overrides);
        Task task;
        try {
            task = parse_task(a.task);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        // n = 0 is a valid request for an empty dataset; generators need two videos.
        const auto data = a.n == 0 ? Dataset{} : generate_task(task, a.seed, a.n, generation_geometry(rc.model), rc.synth);
        write_dataset(a.out, data);
        return int{kOk};
    });
}

struct TrainArgs {
    std::string config;
    std::string data;
    std::string out;
    Overrides overrides;
};

inline int cmd_train(const TrainArgs& a, std::ostream& err) {
    return detail::guarded(err, "train", [&] {
        auto rc = resolve_config(a.config, a.overrides);
        if (!a.data.empty()) rc.data = a.data;
        if (!a.out.empty()) rc.out = a.out;
        if (rc.out.empty()) throw ConfigError("no output path (--out or out= in the config)");
        const auto data = detail::load_nonempty(rc.data);
        auto params = init_params<float>(rc.model, rc.train.seed);
        const auto history = train(params, data, rc.model, rc.train);
        save_checkpoint(rc.out, rc.model, params);
        std::ostringstream hs;
        write_history(hs, history);
        detail::write_text(detail::history_path(rc.out), hs.str());
        return int{kOk};
    });
}

struct FinetuneArgs {
    std::string config;
    std::string data;
    std::string anchor;
    std::optional<double> lambda;
    std::string out;
    Overrides overrides;
};

inline int cmd_finetune(const FinetuneArgs& a, std::ostream& err) {
    return detail::guarded(err, "finetune", [&] {
        auto rc = resolve_config(a.config, a.overrides);
        if (!a.data.empty()) rc.data = a.data;
        if (!a.out.empty()) rc.out = a.out;
        if (a.lambda) {
            if (!(*a.lambda >= 0.0)) throw ConfigError("--lambda must be >= 0");
            rc.train.anchor_weight = *a.lambda;
        }
        if (a.anchor.empty()) throw ConfigError("--anchor is required");
        if (rc.out.empty()) throw ConfigError("no output path (--out or out= in the config)");
        auto anchor_ck = load_checkpoint(a.anchor);
        if (model_config_text(anchor_ck.config) != model_config_text(rc.model)) {
            throw ConfigError("anchor checkpoint model configuration differs from the run configuration");
        }
        const auto data = detail::load_nonempty(rc.data);
        auto params = anchor_ck.params.clone();
        const auto anchor = AnchorSnapshot<float>::take(anchor_ck.params);
        const auto history = finetune_incremental(params, data, anchor, rc.model, rc.train);
        save_checkpoint(rc.out, rc.model, params);
        std::ostringstream hs;
        write_history(hs, history);
        detail::write_text(detail::history_path(rc.out), hs.str());
        return int{kOk};
    });
}

struct EvalArgs {
    std::string ckpt;
    std::string data;
    std::string report;
    std::size_t stride = 1;
};

inline int cmd_eval(const EvalArgs& a, std::ostream& err) {
    return detail::guarded(err, "eval", [&] {
        if (a.ckpt.empty() || a.report.empty()) throw ConfigError("--ckpt and --report are required");
        const auto ck = load_checkpoint(a.ckpt);
        const auto data = detail::load_nonempty(a.data);
        const auto preds = predict_windows(ck.params, ck.config, data, ck.config.frames, a.stride);
        detail::write_text(a.report, detail::report_text(preds));
        return int{kOk};
    });
}

struct FuseArgs {
    std::string ckpt_a;
    std::string ckpt_b;
    std::string data;
    std::string report;
    std::size_t stride = 1;
};

/// Both models are scored on the window grid of the longer clip length; the
/// shorter model averages over its sub-windows.
inline int cmd_fuse(const FuseArgs& a, std::ostream& err) {
    return detail::guarded(err, "fuse", [&] {
        if (a.ckpt_a.empty() || a.ckpt_b.empty() || a.report.empty()) {
            throw ConfigError("--ckpt-a, --ckpt-b and --report are required");
        }
        const auto ca = load_checkpoint(a.ckpt_a);
        const auto cb = load_checkpoint(a.ckpt_b);
        const auto data = detail::load_nonempty(a.data);
        const auto length = std::max(ca.config.frames, cb.config.frames);
        const auto pa = predict_windows(ca.params, ca.config, data, length, a.stride);
        const auto pb = predict_windows(cb.params, cb.config, data, length, a.stride);
        detail::write_text(a.report, detail::report_text(fuse(pa, pb)));
        return int{kOk};
    });
}

struct GradcheckArgs {
    std::string config;  // optional: model section replaces the tiny model
    std::uint64_t seed = 0;
    std::string corrupt_op;  // negative-control fixture
    Overrides overrides;
};

inline int cmd_gradcheck(const GradcheckArgs& a, std::ostream& out, std::ostream& err) {
    return detail::guarded(err, "gradcheck", [&] {
        ModelConfig model = ModelConfig::tiny();
        if (!a.config.empty() || !a.overrides.empty()) {
            RunConfig base;
            base.model = model;
            if (!a.config.empty()) {
                std::ifstream is(a.config);
                if (!is) throw ConfigError("cannot read config file " + a.config);
                base = parse_run_config(is, base);
            }
            for (const auto& [k, v] : a.overrides) apply_setting(base, k, v);
            base.validate();
            model = base.model;
        }
        const auto cases = run_gradcheck_suite(a.seed, model, a.corrupt_op);
        if (!a.corrupt_op.empty() &&
            std::none_of(cases.begin(), cases.end(), [&](const auto& c) { return c.name == a.corrupt_op; })) {
            throw ConfigError("unknown op '" + a.corrupt_op + "'");
        }
        const bool ok = report_gradcheck(out, cases);
        if (!ok) {
            for (const auto& c : cases) {
                if (!c.passed()) err << "gradcheck: " << c.name << " failed\n";
            }
        }
        return int{ok ? kOk : kVerification};
    });
}

}  // namespace dfvt::cli

#endif  // DFVT_CLI_HPP
