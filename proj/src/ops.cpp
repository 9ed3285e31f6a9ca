// Copyright 2026 The PoseNet Authors
// SPDX-License-Identifier: Apache-2.0

#include "posenet/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace posenet::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;
using detail::make_result;
using ImplPtr = std::shared_ptr<TensorImpl>;

// Grad buffer of a tracked input, or nullptr when it needs none.
double* grad_ptr(const ImplPtr& impl) {
  return impl->requires_grad ? detail::grad_buffer(*impl).data() : nullptr;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw std::invalid_argument(message);
}

std::string pair_shapes(const Tensor& a, const Tensor& b) {
  return shape_string(a.shape()) + " and " + shape_string(b.shape());
}

// Row-major strides of `shape` right-aligned to `rank` axes, with 0 on axes
// where the operand broadcasts.
std::vector<std::int64_t> broadcast_strides(const Shape& shape, std::size_t rank) {
  std::vector<std::int64_t> strides(rank, 0);
  std::int64_t stride = 1;
  for (std::size_t i = 0; i < shape.size(); ++i) {
    const std::size_t axis = shape.size() - 1 - i;
    const std::size_t out_axis = rank - 1 - i;
    strides[out_axis] = shape[axis] == 1 ? 0 : stride;
    stride *= shape[axis];
  }
  return strides;
}

std::int64_t offset_of(std::int64_t flat, const Shape& extents, const std::vector<std::int64_t>& strides) {
  std::int64_t offset = 0;
  for (std::size_t i = extents.size(); i-- > 0;) {
    const auto idx = flat % extents[i];
    flat /= extents[i];
    offset += idx * strides[i];
  }
  return offset;
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() >= 2 && b.rank() >= 2, "matmul needs rank >= 2 operands, got " + pair_shapes(a, b));
  const auto m = a.dim(-2);
  const auto p = a.dim(-1);
  const auto q = b.dim(-1);
  require(b.dim(-2) == p, "matmul inner extents differ: " + pair_shapes(a, b));

  const Shape a_batch(a.shape().begin(), a.shape().end() - 2);
  const Shape b_batch(b.shape().begin(), b.shape().end() - 2);
  const std::size_t batch_rank = std::max(a_batch.size(), b_batch.size());
  Shape batch(batch_rank, 1);
  for (std::size_t i = 0; i < batch_rank; ++i) {
    const auto ea = i < a_batch.size() ? a_batch[a_batch.size() - 1 - i] : 1;
    const auto eb = i < b_batch.size() ? b_batch[b_batch.size() - 1 - i] : 1;
    require(ea == eb || ea == 1 || eb == 1, "matmul batch extents do not broadcast: " + pair_shapes(a, b));
    batch[batch_rank - 1 - i] = std::max(ea, eb);
  }
  const auto batches = numel(batch);
  Shape out_shape = batch;
  out_shape.push_back(m);
  out_shape.push_back(q);

  // Offsets of each batch's matrices in the operands.
  std::vector<std::int64_t> a_off(static_cast<std::size_t>(batches));
  std::vector<std::int64_t> b_off(static_cast<std::size_t>(batches));
  {
    auto sa = broadcast_strides(a_batch, batch_rank);
    auto sb = broadcast_strides(b_batch, batch_rank);
    for (std::int64_t i = 0; i < batches; ++i) {
      a_off[static_cast<std::size_t>(i)] = offset_of(i, batch, sa) * m * p;
      b_off[static_cast<std::size_t>(i)] = offset_of(i, batch, sb) * p * q;
    }
  }
  const bool shared_rhs = b_batch.empty() || numel(b_batch) == 1;
  const bool flat_lhs = shared_rhs && numel(a_batch) == batches;

  std::vector<double> out(static_cast<std::size_t>(batches * m * q), 0.0);
  if (flat_lhs) {
    // One GEMM over all rows of a.
    MatMap(out.data(), batches * m, q).noalias() =
        ConstMatMap(a.data().data(), batches * m, p) * ConstMatMap(b.data().data(), p, q);
  } else {
    for (std::int64_t i = 0; i < batches; ++i) {
      MatMap(out.data() + i * m * q, m, q).noalias() =
          ConstMatMap(a.data().data() + a_off[static_cast<std::size_t>(i)], m, p) *
          ConstMatMap(b.data().data() + b_off[static_cast<std::size_t>(i)], p, q);
    }
  }

  auto ai = a.impl();
  auto bi = b.impl();
  return make_result("matmul", std::move(out_shape), std::move(out), {&a, &b},
                     [ai, bi, m, p, q, batches, flat_lhs, a_off, b_off](const TensorImpl& o) {
                       double* ga = grad_ptr(ai);
                       double* gb = grad_ptr(bi);
                       const double* go = o.grad.data();
                       if (flat_lhs) {
                         ConstMatMap dc(go, batches * m, q);
                         if (ga) MatMap(ga, batches * m, p).noalias() += dc * ConstMatMap(bi->data.data(), p, q).transpose();
                         if (gb) MatMap(gb, p, q).noalias() += ConstMatMap(ai->data.data(), batches * m, p).transpose() * dc;
                         return;
                       }
                       for (std::int64_t i = 0; i < batches; ++i) {
                         const auto ao = a_off[static_cast<std::size_t>(i)];
                         const auto bo = b_off[static_cast<std::size_t>(i)];
                         ConstMatMap dc(go + i * m * q, m, q);
                         if (ga) MatMap(ga + ao, m, p).noalias() += dc * ConstMatMap(bi->data.data() + bo, p, q).transpose();
                         if (gb) MatMap(gb + bo, p, q).noalias() += ConstMatMap(ai->data.data() + ao, m, p).transpose() * dc;
                       }
                     });
}

namespace {

Tensor softmax_impl(const Tensor& logits, const Mask* mask) {
  require(logits.rank() >= 1, "softmax needs rank >= 1");
  const auto n = logits.dim(-1);
  const auto rows = n == 0 ? 0 : logits.numel() / n;
  const Shape lead(logits.shape().begin(), logits.shape().end() - 1);

  std::vector<std::int64_t> mask_row_offset;
  if (mask != nullptr) {
    const auto& ms = mask->shape();
    require(!ms.empty() && ms.back() == n && ms.size() <= logits.shape().size(),
            "softmax mask shape " + shape_string(ms) + " incompatible with logits " + shape_string(logits.shape()));
    const Shape mlead(ms.begin(), ms.end() - 1);
    for (std::size_t i = 0; i < mlead.size(); ++i) {
      const auto le = lead[lead.size() - mlead.size() + i];
      require(mlead[i] == le || mlead[i] == 1, "softmax mask shape " + shape_string(ms) +
                                                   " does not broadcast to " + shape_string(logits.shape()));
    }
    const auto strides = broadcast_strides(mlead, lead.size());
    mask_row_offset.resize(static_cast<std::size_t>(rows));
    for (std::int64_t r = 0; r < rows; ++r) mask_row_offset[static_cast<std::size_t>(r)] = offset_of(r, lead, strides) * n;
  }

  const auto x = logits.data();
  std::vector<double> y(x.size(), 0.0);
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * n;
    double* out = y.data() + r * n;
    auto allowed = [&](std::int64_t j) {
      return mask == nullptr || (*mask)[mask_row_offset[static_cast<std::size_t>(r)] + j];
    };
    double max_v = -std::numeric_limits<double>::infinity();
    bool any = false;
    for (std::int64_t j = 0; j < n; ++j) {
      if (allowed(j)) {
        max_v = std::max(max_v, in[j]);
        any = true;
      }
    }
    if (!any) throw std::invalid_argument("softmax row " + std::to_string(r) + " is fully masked");
    double total = 0.0;
    for (std::int64_t j = 0; j < n; ++j) {
      if (allowed(j)) {
        out[j] = std::exp(in[j] - max_v);
        total += out[j];
      }
    }
    const double inv = 1.0 / total;
    for (std::int64_t j = 0; j < n; ++j) out[j] *= inv;
  }

  auto xi = logits.impl();
  return make_result("softmax", logits.shape(), std::move(y), {&logits}, [xi, n, rows](const TensorImpl& o) {
    double* gx = grad_ptr(xi);
    if (!gx) return;
    for (std::int64_t r = 0; r < rows; ++r) {
      const double* yr = o.data.data() + r * n;
      const double* gr = o.grad.data() + r * n;
      double dot = 0.0;
      for (std::int64_t j = 0; j < n; ++j) dot += yr[j] * gr[j];
      double* dx = gx + r * n;
      for (std::int64_t j = 0; j < n; ++j) dx[j] += yr[j] * (gr[j] - dot);
    }
  });
}

struct TapRange {
  std::int64_t offset;  // input position = output position + offset
  std::int64_t begin;   // first valid output position
  std::int64_t end;     // one past the last valid output position
};

std::vector<TapRange> tap_ranges(std::int64_t k, std::int64_t n, std::int64_t dilation, Padding padding) {
  const std::int64_t left = padding == Padding::kCausal ? (k - 1) * dilation : ((k - 1) / 2) * dilation;
  std::vector<TapRange> taps;
  taps.reserve(static_cast<std::size_t>(k));
  for (std::int64_t j = 0; j < k; ++j) {
    const auto off = j * dilation - left;
    const auto begin = std::max<std::int64_t>(0, -off);
    const auto end = std::min<std::int64_t>(n, n - off);
    taps.push_back({off, begin, std::max(begin, end)});
  }
  return taps;
}

}  // namespace

Tensor softmax(const Tensor& logits) { return softmax_impl(logits, nullptr); }

Tensor softmax(const Tensor& logits, const Mask& mask) { return softmax_impl(logits, &mask); }

Tensor conv1d(const Tensor& x, const Tensor& kernel, std::int64_t dilation, Padding padding) {
  require(x.rank() == 3, "conv1d input must be [b, n, d_in], got " + shape_string(x.shape()));
  require(kernel.rank() == 3, "conv1d kernel must be [k, d_in, d_out], got " + shape_string(kernel.shape()));
  require(dilation >= 1, "conv1d dilation must be >= 1");
  const auto b = x.dim(0), n = x.dim(1), din = x.dim(2);
  const auto k = kernel.dim(0), dout = kernel.dim(2);
  require(k >= 1, "conv1d kernel width must be >= 1");
  require(kernel.dim(1) == din, "conv1d channel mismatch: " + pair_shapes(x, kernel));

  const auto taps = tap_ranges(k, n, dilation, padding);
  std::vector<double> out(static_cast<std::size_t>(b * n * dout), 0.0);
  for (std::int64_t bi = 0; bi < b; ++bi) {
    for (std::int64_t j = 0; j < k; ++j) {
      const auto& tap = taps[static_cast<std::size_t>(j)];
      const auto rows = tap.end - tap.begin;
      if (rows <= 0) continue;
      MatMap(out.data() + (bi * n + tap.begin) * dout, rows, dout).noalias() +=
          ConstMatMap(x.data().data() + (bi * n + tap.begin + tap.offset) * din, rows, din) *
          ConstMatMap(kernel.data().data() + j * din * dout, din, dout);
    }
  }
  auto xi = x.impl();
  auto ki = kernel.impl();
  return make_result(
      "conv1d", {b, n, dout}, std::move(out), {&x, &kernel},
      [xi, ki, taps, b, n, din, dout, k](const TensorImpl& o) {
        double* gx = grad_ptr(xi);
        double* gk = grad_ptr(ki);
        for (std::int64_t bi = 0; bi < b; ++bi) {
          for (std::int64_t j = 0; j < k; ++j) {
            const auto& tap = taps[static_cast<std::size_t>(j)];
            const auto rows = tap.end - tap.begin;
            if (rows <= 0) continue;
            ConstMatMap dy(o.grad.data() + (bi * n + tap.begin) * dout, rows, dout);
            const auto xrow = (bi * n + tap.begin + tap.offset) * din;
            if (gx) MatMap(gx + xrow, rows, din).noalias() += dy * ConstMatMap(ki->data.data() + j * din * dout, din, dout).transpose();
            if (gk) MatMap(gk + j * din * dout, din, dout).noalias() += ConstMatMap(xi->data.data() + xrow, rows, din).transpose() * dy;
          }
        }
      },
      OpAttrs{dilation, padding});
}

Tensor depthwise_conv1d(const Tensor& x, const Tensor& kernel, std::int64_t dilation, Padding padding) {
  require(x.rank() == 3, "depthwise_conv1d input must be [b, n, d], got " + shape_string(x.shape()));
  require(kernel.rank() == 2, "depthwise kernel must be [k, d], got " + shape_string(kernel.shape()));
  require(dilation >= 1, "depthwise_conv1d dilation must be >= 1");
  const auto b = x.dim(0), n = x.dim(1), d = x.dim(2);
  const auto k = kernel.dim(0);
  require(k >= 1, "depthwise kernel width must be >= 1");
  require(kernel.dim(1) == d, "depthwise channel mismatch: " + pair_shapes(x, kernel));

  const auto taps = tap_ranges(k, n, dilation, padding);
  const auto xs = x.data();
  const auto ks = kernel.data();
  std::vector<double> out(static_cast<std::size_t>(b * n * d), 0.0);
  for (std::int64_t bi = 0; bi < b; ++bi) {
    for (std::int64_t j = 0; j < k; ++j) {
      const auto& tap = taps[static_cast<std::size_t>(j)];
      const double* w = ks.data() + j * d;
      for (std::int64_t t = tap.begin; t < tap.end; ++t) {
        double* o = out.data() + (bi * n + t) * d;
        const double* in = xs.data() + (bi * n + t + tap.offset) * d;
        for (std::int64_t c = 0; c < d; ++c) o[c] += in[c] * w[c];
      }
    }
  }
  auto xi = x.impl();
  auto ki = kernel.impl();
  return make_result(
      "depthwise_conv1d", {b, n, d}, std::move(out), {&x, &kernel},
      [xi, ki, taps, b, n, d, k](const TensorImpl& o) {
        double* gx = grad_ptr(xi);
        double* gk = grad_ptr(ki);
        for (std::int64_t bi = 0; bi < b; ++bi) {
          for (std::int64_t j = 0; j < k; ++j) {
            const auto& tap = taps[static_cast<std::size_t>(j)];
            const double* w = ki->data.data() + j * d;
            for (std::int64_t t = tap.begin; t < tap.end; ++t) {
              const double* dy = o.grad.data() + (bi * n + t) * d;
              const auto src = (bi * n + t + tap.offset) * d;
              if (gx) {
                for (std::int64_t c = 0; c < d; ++c) gx[src + c] += dy[c] * w[c];
              }
              if (gk) {
                const double* in = xi->data.data() + src;
                for (std::int64_t c = 0; c < d; ++c) gk[j * d + c] += dy[c] * in[c];
              }
            }
          }
        }
      },
      OpAttrs{dilation, padding});
}

Tensor depthwise_sep_conv(const Tensor& x, const Tensor& depth_kernel, const Tensor& point_kernel,
                          std::int64_t dilation, Padding padding) {
  require(point_kernel.rank() == 2 && x.rank() == 3 && point_kernel.dim(0) == x.dim(2),
          "pointwise kernel " + shape_string(point_kernel.shape()) + " does not match input " +
              shape_string(x.shape()));
  return matmul(depthwise_conv1d(x, depth_kernel, dilation, padding), point_kernel);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps) {
  require(x.rank() >= 1, "layer_norm needs rank >= 1");
  const auto d = x.dim(-1);
  require(d >= 1, "layer_norm needs a non-empty feature axis");
  require(gain.shape() == Shape{d} && bias.shape() == Shape{d},
          "layer_norm gain/bias must be [" + std::to_string(d) + "], got " + pair_shapes(gain, bias));
  require(eps > 0.0, "layer_norm eps must be positive");
  const auto rows = x.numel() / d;
  const auto xs = x.data();
  const auto g = gain.data();
  const auto be = bias.data();
  std::vector<double> y(xs.size());
  std::vector<double> xhat(xs.size());
  std::vector<double> rstd(static_cast<std::size_t>(rows));
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* in = xs.data() + r * d;
    double mu = 0.0;
    for (std::int64_t c = 0; c < d; ++c) mu += in[c];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::int64_t c = 0; c < d; ++c) var += (in[c] - mu) * (in[c] - mu);
    var /= static_cast<double>(d);
    const double rs = 1.0 / std::sqrt(var + eps);
    rstd[static_cast<std::size_t>(r)] = rs;
    for (std::int64_t c = 0; c < d; ++c) {
      const double h = (in[c] - mu) * rs;
      xhat[static_cast<std::size_t>(r * d + c)] = h;
      y[static_cast<std::size_t>(r * d + c)] = h * g[static_cast<std::size_t>(c)] + be[static_cast<std::size_t>(c)];
    }
  }
  auto xi = x.impl();
  auto gi = gain.impl();
  auto bi = bias.impl();
  return make_result("layer_norm", x.shape(), std::move(y), {&x, &gain, &bias},
                     [xi, gi, bi, xhat = std::move(xhat), rstd = std::move(rstd), rows, d](const TensorImpl& o) {
                       double* gx = grad_ptr(xi);
                       double* gg = grad_ptr(gi);
                       double* gb = grad_ptr(bi);
                       const double* gain_v = gi->data.data();
                       const auto inv_d = 1.0 / static_cast<double>(d);
                       for (std::int64_t r = 0; r < rows; ++r) {
                         const double* dy = o.grad.data() + r * d;
                         const double* h = xhat.data() + r * d;
                         if (gg || gb) {
                           for (std::int64_t c = 0; c < d; ++c) {
                             if (gg) gg[c] += dy[c] * h[c];
                             if (gb) gb[c] += dy[c];
                           }
                         }
                         if (!gx) continue;
                         double mean_dg = 0.0;
                         double mean_dgh = 0.0;
                         for (std::int64_t c = 0; c < d; ++c) {
                           const double dg = dy[c] * gain_v[c];
                           mean_dg += dg;
                           mean_dgh += dg * h[c];
                         }
                         mean_dg *= inv_d;
                         mean_dgh *= inv_d;
                         const double rs = rstd[static_cast<std::size_t>(r)];
                         double* dx = gx + r * d;
                         for (std::int64_t c = 0; c < d; ++c) {
                           dx[c] += rs * (dy[c] * gain_v[c] - mean_dg - h[c] * mean_dgh);
                         }
                       }
                     });
}

Tensor relu(const Tensor& x) {
  const auto xs = x.data();
  std::vector<double> y(xs.size());
  std::transform(xs.begin(), xs.end(), y.begin(), [](double v) { return v > 0.0 ? v : 0.0; });
  auto xi = x.impl();
  return make_result("relu", x.shape(), std::move(y), {&x}, [xi](const TensorImpl& o) {
    double* gx = grad_ptr(xi);
    if (!gx) return;
    for (std::size_t i = 0; i < o.data.size(); ++i) {
      if (o.data[i] > 0.0) gx[i] += o.grad[i];
    }
  });
}

namespace {

// Number of times b repeats inside a when b's shape is a suffix of a's.
std::int64_t suffix_repeats(const Tensor& a, const Tensor& b, const char* op) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  bool ok = bs.size() <= as.size() && std::equal(bs.begin(), bs.end(), as.end() - static_cast<std::ptrdiff_t>(bs.size()));
  require(ok, std::string(op) + " shape mismatch: " + pair_shapes(a, b));
  return b.numel() == 0 ? 0 : a.numel() / b.numel();
}

Tensor add_scaled(const Tensor& a, const Tensor& b, double sign, const char* tag) {
  const auto repeats = suffix_repeats(a, b, tag);
  const auto inner = b.numel();
  const auto as = a.data();
  const auto bs = b.data();
  std::vector<double> y(as.begin(), as.end());
  for (std::int64_t r = 0; r < repeats; ++r) {
    double* yr = y.data() + r * inner;
    for (std::int64_t i = 0; i < inner; ++i) yr[i] += sign * bs[static_cast<std::size_t>(i)];
  }
  auto ai = a.impl();
  auto bi = b.impl();
  return make_result(tag, a.shape(), std::move(y), {&a, &b}, [ai, bi, repeats, inner, sign](const TensorImpl& o) {
    if (double* ga = grad_ptr(ai)) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) ga[i] += o.grad[i];
    }
    if (double* gb = grad_ptr(bi)) {
      for (std::int64_t r = 0; r < repeats; ++r) {
        const double* gr = o.grad.data() + r * inner;
        for (std::int64_t i = 0; i < inner; ++i) gb[i] += sign * gr[i];
      }
    }
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return add_scaled(a, b, 1.0, "add"); }

Tensor sub(const Tensor& a, const Tensor& b) { return add_scaled(a, b, -1.0, "sub"); }

Tensor mul(const Tensor& a, const Tensor& b) {
  require(a.shape() == b.shape(), "mul shape mismatch: " + pair_shapes(a, b));
  const auto as = a.data();
  const auto bs = b.data();
  std::vector<double> y(as.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = as[i] * bs[i];
  auto ai = a.impl();
  auto bi = b.impl();
  return make_result("mul", a.shape(), std::move(y), {&a, &b}, [ai, bi](const TensorImpl& o) {
    double* ga = grad_ptr(ai);
    double* gb = grad_ptr(bi);
    for (std::size_t i = 0; i < o.grad.size(); ++i) {
      if (ga) ga[i] += o.grad[i] * bi->data[i];
      if (gb) gb[i] += o.grad[i] * ai->data[i];
    }
  });
}

Tensor scale(const Tensor& x, double factor) {
  const auto xs = x.data();
  std::vector<double> y(xs.size());
  std::transform(xs.begin(), xs.end(), y.begin(), [factor](double v) { return v * factor; });
  auto xi = x.impl();
  return make_result("scale", x.shape(), std::move(y), {&x}, [xi, factor](const TensorImpl& o) {
    double* gx = grad_ptr(xi);
    if (!gx) return;
    for (std::size_t i = 0; i < o.grad.size(); ++i) gx[i] += factor * o.grad[i];
  });
}

Tensor sum(const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  auto xi = x.impl();
  return make_result("sum", {}, {total}, {&x}, [xi](const TensorImpl& o) {
    double* gx = grad_ptr(xi);
    if (!gx) return;
    for (std::size_t i = 0; i < xi->data.size(); ++i) gx[i] += o.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  require(x.numel() > 0, "mean of an empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(x.numel()));
}

Tensor transpose_last_two(const Tensor& x) {
  require(x.rank() >= 2, "transpose_last_two needs rank >= 2, got " + shape_string(x.shape()));
  const auto r = x.dim(-2), c = x.dim(-1);
  const auto batches = x.numel() / std::max<std::int64_t>(1, r * c);
  Shape shape = x.shape();
  std::swap(shape[shape.size() - 1], shape[shape.size() - 2]);
  std::vector<double> y(static_cast<std::size_t>(x.numel()));
  for (std::int64_t bi = 0; bi < batches; ++bi) {
    MatMap(y.data() + bi * r * c, c, r) = ConstMatMap(x.data().data() + bi * r * c, r, c).transpose();
  }
  auto xi = x.impl();
  return make_result("transpose", std::move(shape), std::move(y), {&x}, [xi, batches, r, c](const TensorImpl& o) {
    double* gx = grad_ptr(xi);
    if (!gx) return;
    for (std::int64_t bi = 0; bi < batches; ++bi) {
      MatMap(gx + bi * r * c, r, c) += ConstMatMap(o.grad.data() + bi * r * c, c, r).transpose();
    }
  });
}

Tensor reshape(const Tensor& x, Shape shape) {
  require(numel(shape) == x.numel(), "cannot reshape " + shape_string(x.shape()) + " to " + shape_string(shape));
  const auto xs = x.data();
  auto xi = x.impl();
  return make_result("reshape", std::move(shape), std::vector<double>(xs.begin(), xs.end()), {&x},
                     [xi](const TensorImpl& o) {
                       double* gx = grad_ptr(xi);
                       if (!gx) return;
                       for (std::size_t i = 0; i < o.grad.size(); ++i) gx[i] += o.grad[i];
                     });
}

std::vector<Tensor> split_channels(const Tensor& x, std::int64_t parts) {
  require(x.rank() >= 1 && parts >= 1, "split_channels needs rank >= 1 and parts >= 1");
  const auto d = x.dim(-1);
  require(d % parts == 0, "channel count " + std::to_string(d) + " is not divisible by " + std::to_string(parts));
  const auto seg = d / parts;
  const auto rows = d == 0 ? 0 : x.numel() / d;
  Shape shape = x.shape();
  shape.back() = seg;
  std::vector<Tensor> out;
  out.reserve(static_cast<std::size_t>(parts));
  const auto xs = x.data();
  auto xi = x.impl();
  for (std::int64_t p = 0; p < parts; ++p) {
    std::vector<double> y(static_cast<std::size_t>(rows * seg));
    for (std::int64_t r = 0; r < rows; ++r) {
      std::copy_n(xs.data() + r * d + p * seg, seg, y.data() + r * seg);
    }
    out.push_back(make_result("split_channels", shape, std::move(y), {&x}, [xi, rows, d, seg, p](const TensorImpl& o) {
      double* gx = grad_ptr(xi);
      if (!gx) return;
      for (std::int64_t r = 0; r < rows; ++r) {
        const double* g = o.grad.data() + r * seg;
        double* dst = gx + r * d + p * seg;
        for (std::int64_t c = 0; c < seg; ++c) dst[c] += g[c];
      }
    }));
  }
  return out;
}

Tensor concat_channels(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_channels of an empty list");
  const Shape lead(parts[0].shape().begin(), parts[0].shape().end() - 1);
  std::vector<std::int64_t> widths;
  std::int64_t d = 0;
  for (const auto& p : parts) {
    require(p.rank() == static_cast<std::int64_t>(lead.size()) + 1 &&
                std::equal(lead.begin(), lead.end(), p.shape().begin()),
            "concat_channels leading shapes differ: " + pair_shapes(parts[0], p));
    widths.push_back(p.dim(-1));
    d += p.dim(-1);
  }
  const auto rows = numel(lead);
  std::vector<double> y(static_cast<std::size_t>(rows * d));
  std::int64_t col = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const auto w = widths[p];
    const auto src = parts[p].data();
    for (std::int64_t r = 0; r < rows; ++r) std::copy_n(src.data() + r * w, w, y.data() + r * d + col);
    col += w;
  }
  Shape shape = lead;
  shape.push_back(d);
  std::vector<ImplPtr> impls;
  for (const auto& p : parts) impls.push_back(p.impl());
  return make_result("concat_channels", std::move(shape), std::move(y), parts,
                     [impls, widths, rows, d](const TensorImpl& o) {
                       std::int64_t col = 0;
                       for (std::size_t p = 0; p < impls.size(); ++p) {
                         const auto w = widths[p];
                         if (double* g = grad_ptr(impls[p])) {
                           for (std::int64_t r = 0; r < rows; ++r) {
                             const double* src = o.grad.data() + r * d + col;
                             for (std::int64_t c = 0; c < w; ++c) g[r * w + c] += src[c];
                           }
                         }
                         col += w;
                       }
                     });
}

Tensor embedding_lookup(const IdMatrix& ids, const Tensor& table) {
  require(table.rank() == 2, "embedding table must be [V, d], got " + shape_string(table.shape()));
  const auto vocab = table.dim(0), d = table.dim(1);
  const auto flat = ids.flat();
  std::vector<std::int64_t> index(flat.begin(), flat.end());
  for (auto id : index) {
    if (id < 0 || id >= vocab) {
      throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary of size " +
                              std::to_string(vocab));
    }
  }
  std::vector<double> y(index.size() * static_cast<std::size_t>(d));
  const auto ts = table.data();
  for (std::size_t i = 0; i < index.size(); ++i) std::copy_n(ts.data() + index[i] * d, d, y.data() + i * d);
  auto ti = table.impl();
  return make_result("embedding_lookup", {ids.rows(), ids.cols(), d}, std::move(y), {&table},
                     [ti, index = std::move(index), d](const TensorImpl& o) {
                       double* gt = grad_ptr(ti);
                       if (!gt) return;
                       for (std::size_t i = 0; i < index.size(); ++i) {
                         const double* g = o.grad.data() + i * d;
                         double* dst = gt + index[i] * d;
                         for (std::int64_t c = 0; c < d; ++c) dst[c] += g[c];
                       }
                     });
}

Tensor mask_positions(const Tensor& x, const Mask& mask) {
  require(x.rank() == 3 && mask.shape() == Shape{x.dim(0), x.dim(1)},
          "mask_positions needs x [b, n, d] and mask [b, n], got " + shape_string(x.shape()) + " and " +
              shape_string(mask.shape()));
  const auto d = x.dim(2);
  const auto positions = x.dim(0) * x.dim(1);
  const auto xs = x.data();
  std::vector<double> y(xs.begin(), xs.end());
  for (std::int64_t p = 0; p < positions; ++p) {
    if (!mask[p]) std::fill_n(y.data() + p * d, d, 0.0);
  }
  auto xi = x.impl();
  return make_result("mask_positions", x.shape(), std::move(y), {&x}, [xi, mask, positions, d](const TensorImpl& o) {
    double* gx = grad_ptr(xi);
    if (!gx) return;
    for (std::int64_t p = 0; p < positions; ++p) {
      if (!mask[p]) continue;
      for (std::int64_t c = 0; c < d; ++c) gx[p * d + c] += o.grad[static_cast<std::size_t>(p * d + c)];
    }
  });
}

}  // namespace posenet::ops
