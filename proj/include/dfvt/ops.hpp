// SPDX-License-Identifier: Apache-2.0
//
// Differentiable operations over dfvt::Tensor. Every op validates shapes
// before computing and registers its gradient rule through make_result().

#ifndef DFVT_OPS_HPP
#define DFVT_OPS_HPP

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dfvt/tensor.hpp"

namespace dfvt {

namespace detail {

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMatrix<T>>;

/// Products run on Eigen-owned aligned copies so results do not depend on
/// buffer addresses.
template <typename T>
RowMatrix<T> load(const T* p, std::size_t rows, std::size_t cols) {
    return ConstMatMap<T>(p, static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

template <typename T>
void store(const RowMatrix<T>& m, T* out) {
    const T* src = m.data();
    for (Eigen::Index i = 0; i < m.size(); ++i) out[i] = src[i];
}

template <typename T>
void accumulate(const RowMatrix<T>& m, T* out) {
    const T* src = m.data();
    for (Eigen::Index i = 0; i < m.size(); ++i) out[i] += src[i];
}

/// Grad buffer of parent i, or nullptr when that input is a constant.
template <typename T>
T* parent_grad(Node<T>& self, std::size_t i) {
    auto& p = *self.parents[i];
    if (!p.requires_grad) return nullptr;
    return p.ensure_grad().data();
}

template <typename T>
void require_rank(const Tensor<T>& t, std::size_t rank, const char* op) {
    if (t.rank() != rank) {
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                             to_string(t.shape()));
    }
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw DimensionError(std::string(op) + ": shape mismatch " + to_string(a.shape()) + " vs " +
                             to_string(b.shape()));
    }
}

}  // namespace detail

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
        throw DimensionError("matmul: incompatible shapes " + to_string(a.shape()) + " and " +
                             to_string(b.shape()));
    }
    const auto m = a.dim(0), k = a.dim(1), n = b.dim(1);
    std::vector<T> out(m * n);
    detail::RowMatrix<T> prod = detail::load(a.data().data(), m, k) * detail::load(b.data().data(), k, n);
    detail::store(prod, out.data());
    return make_result<T>({m, n}, std::move(out), "matmul", {a, b}, [m, k, n](detail::Node<T>& self) {
        const auto g = detail::load(self.grad.data(), m, n);
        const auto& pa = *self.parents[0];
        const auto& pb = *self.parents[1];
        if (T* ga = detail::parent_grad(self, 0)) {
            detail::RowMatrix<T> d = g * detail::load(pb.data.data(), k, n).transpose();
            detail::accumulate(d, ga);
        }
        if (T* gb = detail::parent_grad(self, 1)) {
            detail::RowMatrix<T> d = detail::load(pa.data.data(), m, k).transpose() * g;
            detail::accumulate(d, gb);
        }
    });
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "add");
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
    return make_result<T>(a.shape(), std::move(out), "add", {a, b}, [](detail::Node<T>& self) {
        for (std::size_t p = 0; p < 2; ++p) {
            if (T* g = detail::parent_grad(self, p)) {
                for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
            }
        }
    });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "sub");
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] - b[i];
    return make_result<T>(a.shape(), std::move(out), "sub", {a, b}, [](detail::Node<T>& self) {
        if (T* g = detail::parent_grad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
        }
        if (T* g = detail::parent_grad(self, 1)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
        }
    });
}

/// Elementwise product.
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    detail::require_same_shape(a, b, "mul");
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
    return make_result<T>(a.shape(), std::move(out), "mul", {a, b}, [](detail::Node<T>& self) {
        const auto& da = self.parents[0]->data;
        const auto& db = self.parents[1]->data;
        if (T* g = detail::parent_grad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * db[i];
        }
        if (T* g = detail::parent_grad(self, 1)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * da[i];
        }
    });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
    std::vector<T> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * factor;
    return make_result<T>(a.shape(), std::move(out), "scale", {a}, [factor](detail::Node<T>& self) {
        if (T* g = detail::parent_grad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * factor;
        }
    });
}

/// x[m x n] + b, with b holding n values, broadcast over rows.
template <typename T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& b) {
    detail::require_rank(x, 2, "add_bias");
    const auto m = x.dim(0), n = x.dim(1);
    if (b.size() != n) {
        throw DimensionError("add_bias: bias " + to_string(b.shape()) + " does not match rows of " +
                             to_string(x.shape()));
    }
    std::vector<T> out(x.size());
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) out[r * n + c] = x[r * n + c] + b[c];
    }
    return make_result<T>(x.shape(), std::move(out), "add_bias", {x, b}, [m, n](detail::Node<T>& self) {
        if (T* g = detail::parent_grad(self, 0)) {
            for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
        }
        if (T* g = detail::parent_grad(self, 1)) {
            for (std::size_t r = 0; r < m; ++r) {
                for (std::size_t c = 0; c < n; ++c) g[c] += self.grad[r * n + c];
            }
        }
    });
}

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
    T total = 0;
    for (auto v : a.data()) total += v;
    return make_result<T>({1}, {total}, "sum", {a}, [](detail::Node<T>& self) {
        if (T* g = detail::parent_grad(self, 0)) {
            const auto n = self.parents[0]->data.size();
            for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[0];
        }
    });
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
    return scale(sum(a), T(1) / static_cast<T>(a.size()));
}

/// Tanh approximation of the Gaussian error linear unit.
template <typename T>
Tensor<T> gelu(const Tensor<T>& x) {
    constexpr T c = T(0.7978845608028654);  // sqrt(2/pi)
    constexpr T k = T(0.044715);
    std::vector<T> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const T v = x[i];
        out[i] = T(0.5) * v * (T(1) + std::tanh(c * (v + k * v * v * v)));
    }
    return make_result<T>(x.shape(), std::move(out), "gelu", {x}, [](detail::Node<T>& self) {
        if (T* g = detail::parent_grad(self, 0)) {
            const auto& in = self.parents[0]->data;
            for (std::size_t i = 0; i < in.size(); ++i) {
                const T v = in[i];
                const T t = std::tanh(c * (v + k * v * v * v));
                const T dt = (T(1) - t * t) * c * (T(1) + T(3) * k * v * v);
                g[i] += self.grad[i] * (T(0.5) * (T(1) + t) + T(0.5) * v * dt);
            }
        }
    });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
    std::vector<T> out(x.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] > T(0) ? x[i] : T(0);
    return make_result<T>(x.shape(), std::move(out), "relu", {x}, [](detail::Node<T>& self) {
        if (T* g = detail::parent_grad(self, 0)) {
            const auto& in = self.parents[0]->data;
            for (std::size_t i = 0; i < in.size(); ++i) {
                if (in[i] > T(0)) g[i] += self.grad[i];
            }
        }
    });
}

enum class Activation { gelu, relu };

template <typename T>
Tensor<T> activate(const Tensor<T>& x, Activation act) {
    return act == Activation::gelu ? gelu(x) : relu(x);
}

/// Softmax over the last axis, max-subtracted.
template <typename T>
Tensor<T> softmax(const Tensor<T>& x) {
    const auto n = x.shape().back();
    const auto rows = x.size() / n;
    std::vector<T> out(x.size());
    for (std::size_t r = 0; r < rows; ++r) {
        const T* in = x.data().data() + r * n;
        T* o = out.data() + r * n;
        const T mx = *std::max_element(in, in + n);
        T z = 0;
        for (std::size_t c = 0; c < n; ++c) z += (o[c] = std::exp(in[c] - mx));
        for (std::size_t c = 0; c < n; ++c) o[c] /= z;
    }
    return make_result<T>(x.shape(), std::move(out), "softmax", {x}, [rows, n](detail::Node<T>& self) {
        T* g = detail::parent_grad(self, 0);
        if (!g) return;
        for (std::size_t r = 0; r < rows; ++r) {
            const T* y = self.data.data() + r * n;
            const T* gy = self.grad.data() + r * n;
            T dot = 0;
            for (std::size_t c = 0; c < n; ++c) dot += gy[c] * y[c];
            for (std::size_t c = 0; c < n; ++c) g[r * n + c] += y[c] * (gy[c] - dot);
        }
    });
}

/// Normalises each row over the last axis, then applies gain and bias.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gain, const Tensor<T>& bias, T eps = T(1e-5)) {
    const auto d = x.shape().back();
    if (gain.size() != d || bias.size() != d) {
        throw DimensionError("layer_norm: feature width " + std::to_string(d) + " vs gain " +
                             to_string(gain.shape()) + " / bias " + to_string(bias.shape()));
    }
    const auto rows = x.size() / d;
    std::vector<T> out(x.size());
    std::vector<T> xhat(x.size());
    std::vector<T> inv_std(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* in = x.data().data() + r * d;
        T mu = 0;
        for (std::size_t c = 0; c < d; ++c) mu += in[c];
        mu /= static_cast<T>(d);
        T var = 0;
        for (std::size_t c = 0; c < d; ++c) var += (in[c] - mu) * (in[c] - mu);
        var /= static_cast<T>(d);
        inv_std[r] = T(1) / std::sqrt(var + eps);
        for (std::size_t c = 0; c < d; ++c) {
            xhat[r * d + c] = (in[c] - mu) * inv_std[r];
            out[r * d + c] = gain[c] * xhat[r * d + c] + bias[c];
        }
    }
    return make_result<T>(
        x.shape(), std::move(out), "layer_norm", {x, gain, bias},
        [rows, d, xhat = std::move(xhat), inv_std = std::move(inv_std)](detail::Node<T>& self) {
            const auto& gamma = self.parents[1]->data;
            T* gx = detail::parent_grad(self, 0);
            T* gg = detail::parent_grad(self, 1);
            T* gb = detail::parent_grad(self, 2);
            std::vector<T> dxhat(d);
            for (std::size_t r = 0; r < rows; ++r) {
                const T* gy = self.grad.data() + r * d;
                const T* xh = xhat.data() + r * d;
                T mean_dxhat = 0, mean_dxhat_xhat = 0;
                for (std::size_t c = 0; c < d; ++c) {
                    if (gg) gg[c] += gy[c] * xh[c];
                    if (gb) gb[c] += gy[c];
                    dxhat[c] = gy[c] * gamma[c];
                    mean_dxhat += dxhat[c];
                    mean_dxhat_xhat += dxhat[c] * xh[c];
                }
                if (!gx) continue;
                mean_dxhat /= static_cast<T>(d);
                mean_dxhat_xhat /= static_cast<T>(d);
                for (std::size_t c = 0; c < d; ++c) {
                    gx[r * d + c] += inv_std[r] * (dxhat[c] - mean_dxhat - xh[c] * mean_dxhat_xhat);
                }
            }
        });
}

/// Copies x[indices[i]] into output element i. Backward scatters-adds.
/// Reshape, transpose, slicing, and patch extraction are all expressed with it.
template <typename T>
Tensor<T> gather(const Tensor<T>& x, std::vector<std::size_t> indices, Shape out_shape, std::string op = "gather") {
    if (numel(out_shape) != indices.size()) {
        throw DimensionError(op + ": " + std::to_string(indices.size()) + " indices for output shape " +
                             to_string(out_shape));
    }
    std::vector<T> out(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= x.size()) throw DimensionError(op + ": index out of range for " + to_string(x.shape()));
        out[i] = x[indices[i]];
    }
    return make_result<T>(std::move(out_shape), std::move(out), std::move(op), {x},
                          [indices = std::move(indices)](detail::Node<T>& self) {
                              if (T* g = detail::parent_grad(self, 0)) {
                                  for (std::size_t i = 0; i < indices.size(); ++i) g[indices[i]] += self.grad[i];
                              }
                          });
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
    if (numel(shape) != x.size()) {
        throw DimensionError("reshape: cannot view " + to_string(x.shape()) + " as " + to_string(shape));
    }
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return gather(x, std::move(idx), std::move(shape), "reshape");
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& x) {
    detail::require_rank(x, 2, "transpose");
    const auto m = x.dim(0), n = x.dim(1);
    std::vector<std::size_t> idx(m * n);
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t r = 0; r < m; ++r) idx[c * m + r] = r * n + c;
    }
    return gather(x, std::move(idx), {n, m}, "transpose");
}

template <typename T>
Tensor<T> slice_rows(const Tensor<T>& x, std::size_t start, std::size_t count) {
    detail::require_rank(x, 2, "slice_rows");
    if (count == 0 || start + count > x.dim(0)) {
        throw DimensionError("slice_rows: rows [" + std::to_string(start) + ", " + std::to_string(start + count) +
                             ") outside " + to_string(x.shape()));
    }
    const auto n = x.dim(1);
    std::vector<std::size_t> idx(count * n);
    std::iota(idx.begin(), idx.end(), start * n);
    return gather(x, std::move(idx), {count, n}, "slice_rows");
}

template <typename T>
Tensor<T> slice_cols(const Tensor<T>& x, std::size_t start, std::size_t count) {
    detail::require_rank(x, 2, "slice_cols");
    if (count == 0 || start + count > x.dim(1)) {
        throw DimensionError("slice_cols: columns [" + std::to_string(start) + ", " +
                             std::to_string(start + count) + ") outside " + to_string(x.shape()));
    }
    const auto m = x.dim(0), n = x.dim(1);
    std::vector<std::size_t> idx(m * count);
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < count; ++c) idx[r * count + c] = r * n + start + c;
    }
    return gather(x, std::move(idx), {m, count}, "slice_cols");
}

/// Row r of a matrix as a rank-1 tensor.
template <typename T>
Tensor<T> row(const Tensor<T>& x, std::size_t r) {
    detail::require_rank(x, 2, "row");
    if (r >= x.dim(0)) throw DimensionError("row: index " + std::to_string(r) + " outside " + to_string(x.shape()));
    return reshape(slice_rows(x, r, 1), {x.dim(1)});
}

/// Reorders rows: output row i is input row order[i]. order must be a
/// permutation of 0..rows-1.
template <typename T>
Tensor<T> permute_rows(const Tensor<T>& x, const std::vector<std::size_t>& order) {
    detail::require_rank(x, 2, "permute_rows");
    const auto n = x.dim(1);
    if (order.size() != x.dim(0)) throw DimensionError("permute_rows: order length differs from row count");
    std::vector<bool> seen(order.size(), false);
    std::vector<std::size_t> idx;
    idx.reserve(order.size() * n);
    for (auto r : order) {
        if (r >= x.dim(0) || seen[r]) throw DimensionError("permute_rows: order is not a permutation");
        seen[r] = true;
        for (std::size_t c = 0; c < n; ++c) idx.push_back(r * n + c);
    }
    return gather(x, std::move(idx), {order.size(), n}, "permute_rows");
}

template <typename T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no inputs");
    const auto n = parts.front().shape().back();
    std::size_t rows = 0;
    std::vector<std::size_t> offsets;
    for (const auto& p : parts) {
        detail::require_rank(p, 2, "concat_rows");
        if (p.dim(1) != n) {
            throw DimensionError("concat_rows: width mismatch " + to_string(parts.front().shape()) + " vs " +
                                 to_string(p.shape()));
        }
        offsets.push_back(rows * n);
        rows += p.dim(0);
    }
    std::vector<T> out;
    out.reserve(rows * n);
    for (const auto& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
    return make_result<T>({rows, n}, std::move(out), "concat_rows", parts,
                          [offsets = std::move(offsets)](detail::Node<T>& self) {
                              for (std::size_t p = 0; p < offsets.size(); ++p) {
                                  if (T* g = detail::parent_grad(self, p)) {
                                      const auto len = self.parents[p]->data.size();
                                      for (std::size_t i = 0; i < len; ++i) g[i] += self.grad[offsets[p] + i];
                                  }
                              }
                          });
}

template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    const auto m = parts.front().dim(0);
    std::size_t cols = 0;
    std::vector<std::size_t> col_offsets;
    for (const auto& p : parts) {
        detail::require_rank(p, 2, "concat_cols");
        if (p.dim(0) != m) {
            throw DimensionError("concat_cols: height mismatch " + to_string(parts.front().shape()) + " vs " +
                                 to_string(p.shape()));
        }
        col_offsets.push_back(cols);
        cols += p.dim(1);
    }
    std::vector<T> out(m * cols);
    for (std::size_t p = 0; p < parts.size(); ++p) {
        const auto w = parts[p].dim(1);
        for (std::size_t r = 0; r < m; ++r) {
            std::copy_n(parts[p].data().data() + r * w, w, out.data() + r * cols + col_offsets[p]);
        }
    }
    return make_result<T>({m, cols}, std::move(out), "concat_cols", parts,
                          [m, cols, col_offsets = std::move(col_offsets)](detail::Node<T>& self) {
                              for (std::size_t p = 0; p < col_offsets.size(); ++p) {
                                  T* g = detail::parent_grad(self, p);
                                  if (!g) continue;
                                  const auto w = self.parents[p]->shape[1];
                                  for (std::size_t r = 0; r < m; ++r) {
                                      for (std::size_t c = 0; c < w; ++c) g[r * w + c] += self.grad[r * cols + col_offsets[p] + c];
                                  }
                              }
                          });
}

/// Output extent of an unpadded convolution along one axis.
inline std::size_t conv_out_extent(std::size_t in, std::size_t kernel, std::size_t stride) {
    return (in - kernel) / stride + 1;
}

/// Unpadded 2-D cross-correlation: x[C x H x W], w[C' x C x kh x kw] -> [C' x H' x W'].
/// Implemented as im2col followed by a matrix product.
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, std::size_t stride) {
    if (x.rank() != 3 || w.rank() != 4) {
        throw DimensionError("conv2d: expected input CxHxW and kernel C'xCxkhxkw, got " + to_string(x.shape()) +
                             " and " + to_string(w.shape()));
    }
    if (stride == 0) throw DimensionError("conv2d: stride must be positive");
    const auto c_in = x.dim(0), h = x.dim(1), wd = x.dim(2);
    const auto c_out = w.dim(0), kh = w.dim(2), kw = w.dim(3);
    if (w.dim(1) != c_in) {
        throw DimensionError("conv2d: kernel " + to_string(w.shape()) + " does not match input " +
                             to_string(x.shape()));
    }
    if (kh > h || kw > wd) {
        throw DimensionError("conv2d: kernel " + to_string(w.shape()) + " larger than input " +
                             to_string(x.shape()));
    }
    if (b && b.size() != c_out) {
        throw DimensionError("conv2d: bias " + to_string(b.shape()) + " does not match " + std::to_string(c_out) +
                             " output channels");
    }
    const auto ho = conv_out_extent(h, kh, stride), wo = conv_out_extent(wd, kw, stride);
    const auto patch = c_in * kh * kw;
    const auto positions = ho * wo;

    // cols[patch x positions]: column p holds the receptive field of output position p.
    std::vector<std::size_t> col_index(patch * positions);
    for (std::size_t c = 0; c < c_in; ++c) {
        for (std::size_t i = 0; i < kh; ++i) {
            for (std::size_t j = 0; j < kw; ++j) {
                const auto prow = (c * kh + i) * kw + j;
                for (std::size_t oy = 0; oy < ho; ++oy) {
                    for (std::size_t ox = 0; ox < wo; ++ox) {
                        col_index[prow * positions + oy * wo + ox] = (c * h + oy * stride + i) * wd + ox * stride + j;
                    }
                }
            }
        }
    }
    std::vector<T> cols(col_index.size());
    for (std::size_t i = 0; i < cols.size(); ++i) cols[i] = x[col_index[i]];

    std::vector<T> out(c_out * positions);
    detail::RowMatrix<T> prod = detail::load(w.data().data(), c_out, patch) * detail::load(cols.data(), patch, positions);
    detail::store(prod, out.data());
    if (b) {
        for (std::size_t o = 0; o < c_out; ++o)
            for (std::size_t p = 0; p < positions; ++p) out[o * positions + p] += b[o];
    }

    std::vector<Tensor<T>> inputs{x, w};
    if (b) inputs.push_back(b);
    return make_result<T>(
        {c_out, ho, wo}, std::move(out), "conv2d", std::move(inputs),
        [c_out, patch, positions, cols = std::move(cols), col_index = std::move(col_index)](detail::Node<T>& self) {
            const auto g = detail::load(self.grad.data(), c_out, positions);
            if (T* gw = detail::parent_grad(self, 1)) {
                detail::RowMatrix<T> d = g * detail::load(cols.data(), patch, positions).transpose();
                detail::accumulate(d, gw);
            }
            if (self.parents.size() > 2) {
                if (T* gb = detail::parent_grad(self, 2)) {
                    for (std::size_t o = 0; o < c_out; ++o) {
                        T s = T(0);
                        for (std::size_t p = 0; p < positions; ++p) s += self.grad[o * positions + p];
                        gb[o] += s;
                    }
                }
            }
            if (T* gx = detail::parent_grad(self, 0)) {
                detail::RowMatrix<T> gcols = detail::load(self.parents[1]->data.data(), c_out, patch).transpose() * g;
                const T* src = gcols.data();
                for (std::size_t i = 0; i < col_index.size(); ++i) gx[col_index[i]] += src[i];
            }
        });
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, std::size_t stride) {
    return conv2d(x, w, Tensor<T>{}, stride);
}

}  // namespace dfvt

#endif  // DFVT_OPS_HPP
