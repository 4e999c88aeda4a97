// SPDX-License-Identifier: Apache-2.0
//
// 64-bit finite-difference sweep over every differentiable op and a tiny
// end-to-end model.

#ifndef DFVT_GRADCHECK_SUITE_HPP
#define DFVT_GRADCHECK_SUITE_HPP

#include <cstdint>
#include <functional>
#include <iomanip>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "dfvt/data.hpp"
#include "dfvt/embedding.hpp"
#include "dfvt/gradcheck.hpp"
#include "dfvt/learning.hpp"
#include "dfvt/model.hpp"
#include "dfvt/ops.hpp"

namespace dfvt {

inline constexpr double kGradCheckTolerance = 1e-4;

struct GradCheckCase {
    std::string name;
    GradCheckResult result;
    std::vector<std::string> param_names;

    bool passed() const { return result.passed(kGradCheckTolerance); }
};

/// Identity forward whose backward scales the incoming gradient: a
/// deliberately wrong rule used to prove the suite catches bad gradients.
template <typename T>
Tensor<T> corrupt_gradient(const Tensor<T>& x, T factor = T(1.5)) {
    return make_result<T>(x.shape(), std::vector<T>(x.data().begin(), x.data().end()), "corrupt", {x},
                          [factor](detail::Node<T>& self) {
                              if (T* g = detail::parent_grad(self, 0)) {
                                  for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += factor * self.grad[i];
                              }
                          });
}

namespace detail {

class SuiteBuilder {
  public:
    using D = double;

    SuiteBuilder(std::uint64_t seed, std::string corrupt) : rng_(seed), corrupt_(std::move(corrupt)) {}

    Tensor<D> random(Shape shape, double lo = -1.0, double hi = 1.0) {
        std::uniform_real_distribution<double> dist(lo, hi);
        std::vector<D> v(numel(shape));
        for (auto& x : v) x = dist(rng_);
        return Tensor<D>(std::move(shape), std::move(v));
    }

    /// Values with |x| in [0.1, 1], away from the relu kink.
    Tensor<D> away_from_zero(Shape shape) {
        auto t = random(std::move(shape), 0.1, 1.0);
        std::bernoulli_distribution flip(0.5);
        for (auto& x : t.data()) x = flip(rng_) ? -x : x;
        return t;
    }

    Tensor<D> param(Tensor<D> t) {
        t.set_requires_grad(true);
        return t;
    }

    std::mt19937_64& rng() { return rng_; }
    const std::string& corrupt() const { return corrupt_; }

  private:
    std::mt19937_64 rng_;
    std::string corrupt_;
};

}  // namespace detail

/// Runs every case. corrupt names a case whose output gradient is
/// deliberately scaled (negative control); empty for a normal run.
inline std::vector<GradCheckCase> run_gradcheck_suite(std::uint64_t seed, const ModelConfig& model_cfg = ModelConfig::tiny(),
                                                      const std::string& corrupt = {}) {
    using D = double;
    detail::SuiteBuilder b(seed, corrupt);
    std::vector<GradCheckCase> cases;
    GradCheckOptions opts;
    opts.seed = seed;

    auto check = [&](const std::string& name, std::vector<Tensor<D>> params, std::function<Tensor<D>()> f,
                     std::size_t max_coords = 0) {
        // Non-scalar outputs are reduced as sum(out * R) with a fixed random R.
        auto weights_seed = b.rng()();
        auto loss_fn = [&, f, name, weights_seed]() {
            auto out = f();
            if (out.size() == 1 && out.op() != "sum") return name == b.corrupt() ? corrupt_gradient(out) : out;
            std::mt19937_64 local(weights_seed);
            std::uniform_real_distribution<double> dist(-1.0, 1.0);
            std::vector<D> w(out.size());
            for (auto& x : w) x = dist(local);
            auto y = name == b.corrupt() ? corrupt_gradient(out) : out;
            return sum(mul(y, Tensor<D>(out.shape(), std::move(w))));
        };
        auto o = opts;
        o.max_coords_per_param = max_coords;
        cases.push_back({name, grad_check<D>(loss_fn, params, o), {}});
    };

    {
        auto a = b.param(b.random({4, 5})), m = b.param(b.random({5, 3}));
        check("matmul", {a, m}, [=] { return matmul(a, m); });
    }
    {
        auto x = b.param(b.random({3, 4})), y = b.param(b.random({3, 4}));
        check("add", {x, y}, [=] { return add(x, y); });
        check("sub", {x, y}, [=] { return sub(x, y); });
        check("mul", {x, y}, [=] { return mul(x, y); });
        check("scale", {x}, [=] { return scale(x, 0.37); });
        check("sum", {x}, [=] { return sum(x); });
        check("mean", {x}, [=] { return mean(x); });
    }
    {
        auto x = b.param(b.random({3, 4})), bias = b.param(b.random({4}));
        check("add_bias", {x, bias}, [=] { return add_bias(x, bias); });
    }
    {
        auto x = b.param(b.random({4, 6}, -3.0, 3.0));
        check("gelu", {x}, [=] { return gelu(x); });
        check("softmax", {x}, [=] { return softmax(x); });
        auto g = b.param(b.random({6})), bb = b.param(b.random({6}));
        check("layer_norm", {x, g, bb}, [=] { return layer_norm(x, g, bb, 1e-5); });
    }
    {
        auto x = b.param(b.away_from_zero({4, 6}));
        check("relu", {x}, [=] { return relu(x); });
    }
    {
        auto x = b.param(b.random({3, 8, 8})), w = b.param(b.random({4, 3, 3, 3})), bias = b.param(b.random({4}));
        check("conv2d", {x, w, bias}, [=] { return conv2d(x, w, bias, 1); });
        check("conv2d_stride2", {x, w}, [=] { return conv2d(x, w, 2); });
    }
    {
        auto x = b.param(b.random({4, 6}));
        auto y = b.param(b.random({2, 6}));
        auto z = b.param(b.random({4, 3}));
        check("transpose", {x}, [=] { return transpose(x); });
        check("reshape", {x}, [=] { return reshape(x, {3, 8}); });
        check("slice_rows", {x}, [=] { return slice_rows(x, 1, 2); });
        check("slice_cols", {x}, [=] { return slice_cols(x, 2, 3); });
        check("concat_rows", {x, y}, [=] { return concat_rows<D>({x, y}); });
        check("concat_cols", {x, z}, [=] { return concat_cols<D>({x, z}); });
        check("permute_rows", {x}, [=] { return permute_rows(x, {3, 0, 2, 1}); });
    }
    {
        auto img = b.param(b.random({3, 4, 4})), proj = b.param(b.random({12, 5})), bias = b.param(b.random({5}));
        check("patchify", {img, proj, bias}, [=] { return patchify(img, 2, proj, bias); });
    }
    {
        auto feat = b.param(b.random({6, 2, 2})), w = b.param(b.random({5, 6, 1, 1})), bias = b.param(b.random({5}));
        auto mix = b.param(b.random({3, 4}));
        check("tokens_from_features", {feat, w, bias, mix}, [=] { return tokens_from_features(feat, w, bias, mix, 3); });
    }
    {
        auto logits = b.param(b.random({2}, -2.0, 2.0));
        check("cross_entropy", {logits}, [=] { return cross_entropy(logits, 1); });
    }
    {
        ParameterStore<D> ps;
        auto p1 = ps.add("a", b.random({3, 2}));
        auto p2 = ps.add("b", b.random({4}));
        auto anchor = AnchorSnapshot<D>::take(ps);
        for (auto& v : p1.data()) v += 0.3;
        for (auto& v : p2.data()) v -= 0.2;
        check("anchor_penalty", {p1, p2}, [=] { return anchor_penalty(ps, anchor, 0.7); });
    }
    {
        ModelConfig block_cfg;
        block_cfg.d_model = 8;
        block_cfg.n_heads = 2;
        block_cfg.n_blocks = 1;
        block_cfg.hybrid = false;
        block_cfg.use_uv = false;
        block_cfg.image_height = block_cfg.image_width = 8;
        block_cfg.patch_size = 4;
        block_cfg.tokens = 4;
        auto ps = init_params<D>(block_cfg, seed);
        // Larger projections than the 0.02 default so attention is far from uniform.
        for (auto& e : ps.entries()) {
            if (e.name.find("attn.") != std::string::npos || e.name.find("mlp.") != std::string::npos) {
                for (auto& v : e.tensor.data()) v *= 20.0;
            }
        }
        auto x = b.param(b.random({5, 8}));
        auto bp = EncoderBlockParams<D>::from(ps, 0);
        std::vector<Tensor<D>> attn_params{x, bp.wq, bp.wk, bp.wv, bp.wo};
        check("attention", attn_params, [=] { return attention(x, bp, 2); });
        std::vector<Tensor<D>> only_block;
        only_block.push_back(x);
        for (const auto& e : ps.entries()) {
            if (e.name.rfind("blocks.0.", 0) == 0) only_block.push_back(e.tensor);
        }
        check("encoder_block", only_block, [=] { return encoder_block(x, bp, 2); });
    }
    {
        auto ps = init_params<D>(model_cfg, seed);
        for (auto& e : ps.entries()) {
            if (e.name.find("attn.") != std::string::npos) {
                for (auto& v : e.tensor.data()) v *= 20.0;
            }
        }
        Geometry g{model_cfg.channels, model_cfg.image_height, model_cfg.image_width, model_cfg.frames};
        VideoSample sample;
        sample.id = "gradcheck";
        sample.label = kFake;
        std::uniform_real_distribution<double> px(0.0, 1.0);
        for (std::size_t t = 0; t < model_cfg.frames; ++t) {
            std::vector<float> face(numel(g.image_shape())), uv(face.size());
            for (auto& v : face) v = static_cast<float>(px(b.rng()));
            for (auto& v : uv) v = static_cast<float>(px(b.rng()));
            FrameSample f{Tensor<float>(g.image_shape(), std::move(face)), {}, kFake};
            if (model_cfg.use_uv) f.uv = Tensor<float>(g.image_shape(), std::move(uv));
            sample.frames.push_back(std::move(f));
        }
        auto params = ps.trainable();
        check("model", params, [=] {
            return cross_entropy(encode_sequence(assemble_input(sample, ps, model_cfg), ps, model_cfg), kFake);
        });
        auto& names = cases.back().param_names;
        for (const auto& e : ps.entries()) {
            if (e.trainable) names.push_back(e.name);
        }
    }
    return cases;
}

/// One line per case; failures add the offending coordinate.
inline bool report_gradcheck(std::ostream& os, const std::vector<GradCheckCase>& cases) {
    bool all = true;
    os << "op\tmax_rel_error\tcoords\tstatus\n";
    for (const auto& c : cases) {
        const bool ok = c.passed();
        all = all && ok;
        os << c.name << '\t' << std::scientific << std::setprecision(3) << c.result.max_rel_error << '\t'
           << c.result.checked << '\t' << (ok ? "ok" : "FAIL") << '\n';
        if (!ok) {
            const auto& r = c.result;
            const auto param = r.param_index < c.param_names.size() ? c.param_names[r.param_index]
                                                                     : "input " + std::to_string(r.param_index);
            os << "  " << c.name << ": " << param << " coordinate " << r.coord << " analytic " << std::setprecision(10)
               << r.analytic << " numeric " << r.numeric << (r.finite ? "" : " (non-finite)") << '\n';
        }
    }
    os << std::defaultfloat;
    return all;
}

}  // namespace dfvt

#endif  // DFVT_GRADCHECK_SUITE_HPP
