// SPDX-License-Identifier: Apache-2.0

#ifndef DFVT_PARAMS_HPP
#define DFVT_PARAMS_HPP

#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dfvt/tensor.hpp"

namespace dfvt {

/// Named learnable tensors in insertion order. Names are unique.
template <typename T>
class ParameterStore {
  public:
    struct Entry {
        std::string name;
        Tensor<T> tensor;
        bool trainable = true;
    };

    Tensor<T>& add(std::string name, Tensor<T> tensor, bool trainable = true) {
        if (index_.contains(name)) throw std::invalid_argument("duplicate parameter name: " + name);
        tensor.set_requires_grad(trainable);
        index_.emplace(name, entries_.size());
        entries_.push_back({std::move(name), std::move(tensor), trainable});
        return entries_.back().tensor;
    }

    bool contains(const std::string& name) const { return index_.contains(name); }

    const Tensor<T>& get(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) throw std::out_of_range("unknown parameter: " + name);
        return entries_[it->second].tensor;
    }
    Tensor<T>& get(const std::string& name) {
        return const_cast<Tensor<T>&>(std::as_const(*this).get(name));
    }

    std::size_t size() const { return entries_.size(); }
    std::size_t numel() const {
        std::size_t n = 0;
        for (const auto& e : entries_) n += e.tensor.size();
        return n;
    }

    std::vector<Entry>& entries() { return entries_; }
    const std::vector<Entry>& entries() const { return entries_; }

    std::vector<Tensor<T>> trainable() const {
        std::vector<Tensor<T>> out;
        for (const auto& e : entries_) {
            if (e.trainable) out.push_back(e.tensor);
        }
        return out;
    }

    /// Deep copy with independent storage.
    ParameterStore clone() const {
        ParameterStore out;
        for (const auto& e : entries_) out.add(e.name, e.tensor.clone(), e.trainable);
        return out;
    }

    template <typename U>
    ParameterStore<U> cast() const {
        ParameterStore<U> out;
        for (const auto& e : entries_) out.add(e.name, e.tensor.template cast<U>(), e.trainable);
        return out;
    }

    void zero_grad() {
        for (auto& e : entries_) e.tensor.zero_grad();
    }

  private:
    std::vector<Entry> entries_;
    std::map<std::string, std::size_t> index_;
};

}  // namespace dfvt

#endif  // DFVT_PARAMS_HPP
