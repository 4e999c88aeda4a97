// SPDX-License-Identifier: Apache-2.0
//
// Losses, plain SGD, and the two training loops: standard training and
// anchored incremental fine-tuning, where a frozen copy of the pre-fine-tune
// weights pulls the live weights back with a squared-L2 penalty.

#ifndef DFVT_LEARNING_HPP
#define DFVT_LEARNING_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dfvt/model.hpp"
#include "dfvt/ops.hpp"
#include "dfvt/params.hpp"
#include "dfvt/sample.hpp"

namespace dfvt {

struct TrainConfig {
    std::size_t epochs = 5;
    double learning_rate = 3e-3;
    std::size_t batch_size = 8;
    std::uint64_t seed = 0;
    double anchor_weight = 0.1;  // lambda, used only by finetune_incremental
    bool shuffle = true;
    std::size_t window_stride = 1;

    void validate() const {
        if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
        if (batch_size == 0) throw ConfigError("batch_size must be positive");
        if (!(anchor_weight >= 0.0) || !std::isfinite(anchor_weight)) throw ConfigError("anchor_weight must be >= 0");
        if (window_stride == 0) throw ConfigError("window_stride must be positive");
    }
};

struct EpochRecord {
    std::size_t epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;
};

using History = std::vector<EpochRecord>;

/// Called after every epoch with the parameters as they stand; returning
/// false ends training after that epoch.
using EpochHook = std::function<bool(const EpochRecord&)>;

/// -log softmax(logits)[label], evaluated with log-sum-exp.
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, int label) {
    const auto n = logits.size();
    if (label < 0 || static_cast<std::size_t>(label) >= n) {
        throw std::out_of_range("cross_entropy: label " + std::to_string(label) + " outside [0, " + std::to_string(n) + ")");
    }
    T mx = logits[0];
    for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, logits[i]);
    T z = 0;
    for (std::size_t i = 0; i < n; ++i) z += std::exp(logits[i] - mx);
    const T lse = mx + std::log(z);
    const auto target = static_cast<std::size_t>(label);
    return make_result<T>({1}, {lse - logits[target]}, "cross_entropy", {logits},
                          [n, lse, target](detail::Node<T>& self) {
                              T* g = detail::parent_grad(self, 0);
                              if (!g) return;
                              const auto& x = self.parents[0]->data;
                              for (std::size_t i = 0; i < n; ++i) {
                                  const T p = std::exp(x[i] - lse);
                                  g[i] += self.grad[0] * (p - (i == target ? T(1) : T(0)));
                              }
                          });
}

/// Frozen copy of every parameter, keyed by name, taken before fine-tuning.
template <typename T>
class AnchorSnapshot {
  public:
    AnchorSnapshot() = default;

    static AnchorSnapshot take(const ParameterStore<T>& params) {
        AnchorSnapshot a;
        for (const auto& e : params.entries()) {
            a.names_.push_back(e.name);
            a.values_.push_back(e.tensor.detach());
        }
        return a;
    }

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    const std::vector<Tensor<T>>& values() const { return values_; }

    /// Throws unless names, order and shapes match the live parameters.
    void check_compatible(const ParameterStore<T>& params) const {
        const auto& entries = params.entries();
        if (entries.size() != names_.size()) {
            throw std::invalid_argument("anchor: " + std::to_string(names_.size()) + " tensors vs " +
                                        std::to_string(entries.size()) + " live parameters");
        }
        for (std::size_t i = 0; i < entries.size(); ++i) {
            if (entries[i].name != names_[i]) {
                throw std::invalid_argument("anchor: parameter " + entries[i].name + " vs anchor key " + names_[i]);
            }
            if (entries[i].tensor.shape() != values_[i].shape()) {
                throw DimensionError("anchor: shape mismatch for " + names_[i] + ": " +
                                     to_string(entries[i].tensor.shape()) + " vs " + to_string(values_[i].shape()));
            }
        }
    }

    /// sum over parameters of ||theta - theta_old||^2, no graph.
    double squared_distance(const ParameterStore<T>& params) const {
        check_compatible(params);
        double total = 0.0;
        for (std::size_t i = 0; i < values_.size(); ++i) {
            const auto& live = params.entries()[i].tensor;
            for (std::size_t k = 0; k < live.size(); ++k) {
                const double d = static_cast<double>(live[k]) - static_cast<double>(values_[i][k]);
                total += d * d;
            }
        }
        return total;
    }

  private:
    std::vector<std::string> names_;
    std::vector<Tensor<T>> values_;
};

/// lambda * sum over all parameters of ||theta - theta_old||^2.
template <typename T>
Tensor<T> anchor_penalty(const ParameterStore<T>& params, const AnchorSnapshot<T>& anchor, double lambda) {
    anchor.check_compatible(params);
    if (lambda < 0.0) throw std::invalid_argument("anchor_penalty: lambda must be >= 0");
    Tensor<T> total;
    for (std::size_t i = 0; i < anchor.size(); ++i) {
        auto diff = sub(params.entries()[i].tensor, anchor.values()[i]);
        auto term = sum(mul(diff, diff));
        total = total ? add(total, term) : term;
    }
    if (!total) return Tensor<T>::scalar(T(0));
    return scale(total, static_cast<T>(lambda));
}

/// cross_entropy + anchor_penalty.
template <typename T>
Tensor<T> incremental_loss(const Tensor<T>& logits, int label, const ParameterStore<T>& params,
                           const AnchorSnapshot<T>& anchor, double lambda) {
    return add(cross_entropy(logits, label), anchor_penalty(params, anchor, lambda));
}

/// theta <- theta - lr * grad, then grads are cleared. Every tensor must
/// carry a gradient.
template <typename T>
void sgd_step(std::vector<Tensor<T>>& params, double learning_rate) {
    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!params[i].has_grad()) {
            throw std::logic_error("sgd_step: parameter " + std::to_string(i) + " " + to_string(params[i].shape()) +
                                   " has no gradient");
        }
    }
    const T lr = static_cast<T>(learning_rate);
    for (auto& p : params) {
        auto g = p.grad();
        auto v = p.data();
        for (std::size_t k = 0; k < v.size(); ++k) v[k] -= lr * g[k];
        p.zero_grad();
    }
}

/// Named variant over the trainable entries of a store.
template <typename T>
void sgd_step(ParameterStore<T>& params, double learning_rate) {
    for (const auto& e : params.entries()) {
        if (e.trainable && !e.tensor.has_grad()) throw std::logic_error("sgd_step: parameter " + e.name + " has no gradient");
    }
    auto trainable = params.trainable();
    sgd_step(trainable, learning_rate);
}

namespace detail {

/// Fisher-Yates driven directly by the engine so the order is reproducible.
inline void shuffle_indices(std::vector<std::size_t>& order, std::mt19937_64& rng) {
    for (std::size_t i = order.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng() % i);
        std::swap(order[i - 1], order[j]);
    }
}

template <typename T>
History run_training(ParameterStore<T>& params, const Dataset& data, const ModelConfig& model, const TrainConfig& cfg,
                     const AnchorSnapshot<T>* anchor, const EpochHook& hook) {
    model.validate();
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("train: dataset is empty");
    const auto windows = all_windows(data, model.frames, cfg.window_stride);
    for (const auto& w : windows) {
        check_sample(w, model);
        if (w.label != kReal && w.label != kFake) throw std::invalid_argument("train: label outside {0,1} in " + w.id);
    }
    const bool penalised = anchor && cfg.anchor_weight > 0.0;
    if (anchor) anchor->check_compatible(params);

    History history;
    std::mt19937_64 rng(cfg.seed);
    std::vector<std::size_t> order(windows.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.shuffle) shuffle_indices(order, rng);
        double loss_total = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const auto end = std::min(order.size(), start + cfg.batch_size);
            const T inv_batch = T(1) / static_cast<T>(end - start);
            for (std::size_t i = start; i < end; ++i) {
                const auto& w = windows[order[i]];
                auto logits = encode_sequence(assemble_input(w, params, model), params, model);
                auto loss = scale(cross_entropy(logits, w.label), inv_batch);
                backward(loss);
                loss_total += static_cast<double>(loss.item());
                const int predicted = logits[kFake] > logits[kReal] ? kFake : kReal;
                if (predicted == w.label) ++correct;
            }
            if (penalised) {
                auto pen = anchor_penalty(params, *anchor, cfg.anchor_weight);
                backward(pen);
                loss_total += static_cast<double>(pen.item());
            }
            sgd_step(params, cfg.learning_rate);
        }
        const auto batches = (order.size() + cfg.batch_size - 1) / cfg.batch_size;
        history.push_back({epoch + 1, loss_total / static_cast<double>(batches),
                           static_cast<double>(correct) / static_cast<double>(order.size())});
        if (hook && !hook(history.back())) break;
    }
    return history;
}

}  // namespace detail

/// Seeded mini-batch SGD on cross-entropy. Every window is validated before
/// any parameter changes. Reported loss is the mean batch loss.
template <typename T>
History train(ParameterStore<T>& params, const Dataset& data, const ModelConfig& model, const TrainConfig& cfg,
              const EpochHook& hook = {}) {
    return detail::run_training<T>(params, data, model, cfg, nullptr, hook);
}

/// train() with cfg.anchor_weight * ||theta - anchor||^2 added once per batch.
/// The anchor is never modified.
template <typename T>
History finetune_incremental(ParameterStore<T>& params, const Dataset& data, const AnchorSnapshot<T>& anchor,
                             const ModelConfig& model, const TrainConfig& cfg, const EpochHook& hook = {}) {
    return detail::run_training<T>(params, data, model, cfg, &anchor, hook);
}

/// "epoch<TAB>loss<TAB>accuracy" lines with a header.
inline void write_history(std::ostream& os, const History& history) {
    os << "epoch\tloss\taccuracy\n";
    for (const auto& r : history) {
        os << r.epoch << '\t' << std::setprecision(17) << r.loss << '\t' << r.accuracy << '\n';
    }
}

inline History read_history(std::istream& is) {
    History h;
    std::string line;
    std::getline(is, line);
    if (line != "epoch\tloss\taccuracy") throw std::runtime_error("history: missing header");
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        EpochRecord r;
        if (!(ls >> r.epoch >> r.loss >> r.accuracy)) throw std::runtime_error("history: malformed line: " + line);
        h.push_back(r);
    }
    return h;
}

}  // namespace dfvt

#endif  // DFVT_LEARNING_HPP
