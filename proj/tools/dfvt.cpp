// SPDX-License-Identifier: Apache-2.0
//
// dfvt: synthetic data generation, training, incremental fine-tuning,
// evaluation, fusion and gradient checking for the dual-stream video
// transformer.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dfvt/cli.hpp"

namespace {

dfvt::cli::Overrides to_overrides(const std::vector<std::string>& raw) {
    dfvt::cli::Overrides out;
    for (const auto& kv : raw) out.push_back(dfvt::cli::parse_override(kv));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    using namespace dfvt::cli;
    CLI::App app{"Dual-stream (face + UV) video transformer for deepfake detection"};
    app.require_subcommand(1);

    std::vector<std::string> sets;
    auto add_sets = [&](CLI::App* sub) {
        sub->add_option("--set", sets, "Override a config value (key=value, repeatable)");
    };

    GenDataArgs gen;
    auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic dataset (manifest + PPM frames)");
    gen_cmd->add_option("--task", gen.task, "spatial | stream | flicker")
        ->check(CLI::IsMember({"spatial", "stream", "flicker"}));
    gen_cmd->add_option("--seed", gen.seed, "Sample seed");
    gen_cmd->add_option("--n", gen.n, "Number of videos");
    gen_cmd->add_option("--out", gen.out, "Output directory")->required();
    gen_cmd->add_option("--config", gen.config, "Config supplying geometry and generator parameters");
    add_sets(gen_cmd);

    TrainArgs tr;
    auto* train_cmd = app.add_subcommand("train", "Train from a seeded initialisation");
    train_cmd->add_option("--config", tr.config, "Run configuration file")->required();
    train_cmd->add_option("--data", tr.data, "Manifest path (overrides data=)");
    train_cmd->add_option("--out", tr.out, "Checkpoint path (overrides out=)");
    add_sets(train_cmd);

    FinetuneArgs ft;
    double lambda = 0.0;
    auto* ft_cmd = app.add_subcommand("finetune", "Fine-tune from an anchor checkpoint with weight anchoring");
    ft_cmd->add_option("--config", ft.config, "Run configuration file")->required();
    ft_cmd->add_option("--data", ft.data, "Manifest path (overrides data=)");
    ft_cmd->add_option("--anchor", ft.anchor, "Anchor checkpoint")->required();
    auto* lambda_opt = ft_cmd->add_option("--lambda", lambda, "Anchor weight (overrides anchor_weight=)");
    ft_cmd->add_option("--out", ft.out, "Checkpoint path (overrides out=)");
    add_sets(ft_cmd);

    EvalArgs ev;
    auto* eval_cmd = app.add_subcommand("eval", "Window- and video-level metrics of a checkpoint");
    eval_cmd->add_option("--ckpt", ev.ckpt, "Checkpoint")->required();
    eval_cmd->add_option("--data", ev.data, "Manifest path")->required();
    eval_cmd->add_option("--report", ev.report, "Report path")->required();
    eval_cmd->add_option("--stride", ev.stride, "Window stride")->check(CLI::PositiveNumber);

    FuseArgs fu;
    auto* fuse_cmd = app.add_subcommand("fuse", "Metrics of the averaged probabilities of two checkpoints");
    fuse_cmd->add_option("--ckpt-a", fu.ckpt_a, "First checkpoint")->required();
    fuse_cmd->add_option("--ckpt-b", fu.ckpt_b, "Second checkpoint")->required();
    fuse_cmd->add_option("--data", fu.data, "Manifest path")->required();
    fuse_cmd->add_option("--report", fu.report, "Report path")->required();
    fuse_cmd->add_option("--stride", fu.stride, "Window stride")->check(CLI::PositiveNumber);

    GradcheckArgs gc;
    auto* gc_cmd = app.add_subcommand("gradcheck", "64-bit finite-difference check of every op and a tiny model");
    gc_cmd->add_option("--config", gc.config, "Config whose model section replaces the tiny model");
    gc_cmd->add_option("--seed", gc.seed, "Seed for inputs and coordinate sampling");
    gc_cmd->add_option("--corrupt-op", gc.corrupt_op, "Test fixture: corrupt one op's gradient")->group("");
    add_sets(gc_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kUsage;
    }

    try {
        const auto overrides = to_overrides(sets);
        if (*gen_cmd) {
            gen.overrides = overrides;
            return cmd_gen_data(gen, std::cerr);
        }
        if (*train_cmd) {
            tr.overrides = overrides;
            return cmd_train(tr, std::cerr);
        }
        if (*ft_cmd) {
            ft.overrides = overrides;
            if (*lambda_opt) ft.lambda = lambda;
            return cmd_finetune(ft, std::cerr);
        }
        if (*eval_cmd) return cmd_eval(ev, std::cerr);
        if (*fuse_cmd) return cmd_fuse(fu, std::cerr);
        if (*gc_cmd) {
            gc.overrides = overrides;
            return cmd_gradcheck(gc, std::cout, std::cerr);
        }
    } catch (const dfvt::ConfigError& e) {
        std::cerr << "dfvt: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}
