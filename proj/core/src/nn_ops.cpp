// Copyright (c) 2026, The DDMM Authors
// SPDX-License-Identifier: Apache-2.0

#include "ddmm/nn_ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace ddmm::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapMat = Eigen::Map<const RowMat<T>>;

template <typename T>
std::vector<T>& scratch() {
  thread_local std::vector<T> buf;
  return buf;
}

template <typename T>
std::vector<T>& scratch2() {
  thread_local std::vector<T> buf;
  return buf;
}

// col is (c * 9) x (h * w).
template <typename T>
void im2col3x3(const T* x, Shape s, T* col) {
  const std::size_t hw = s.plane();
  for (int ci = 0; ci < s.c; ++ci) {
    const T* xc = x + static_cast<std::size_t>(ci) * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        T* row = col + (static_cast<std::size_t>(ci) * 9 + ky * 3 + kx) * hw;
        const int dy = ky - 1, dx = kx - 1;
        for (int y = 0; y < s.h; ++y) {
          const int sy = y + dy;
          T* out = row + static_cast<std::size_t>(y) * s.w;
          if (sy < 0 || sy >= s.h) {
            std::fill(out, out + s.w, T(0));
            continue;
          }
          const T* in = xc + static_cast<std::size_t>(sy) * s.w;
          const int x0 = std::max(0, -dx), x1 = std::min(s.w, s.w - dx);
          for (int xx = 0; xx < x0; ++xx) out[xx] = T(0);
          std::copy(in + x0 + dx, in + x1 + dx, out + x0);
          for (int xx = x1; xx < s.w; ++xx) out[xx] = T(0);
        }
      }
    }
  }
}

template <typename T>
void col2im3x3_add(const T* col, Shape s, T* dx) {
  const std::size_t hw = s.plane();
  for (int ci = 0; ci < s.c; ++ci) {
    T* xc = dx + static_cast<std::size_t>(ci) * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const T* row = col + (static_cast<std::size_t>(ci) * 9 + ky * 3 + kx) * hw;
        const int dy = ky - 1, ddx = kx - 1;
        for (int y = 0; y < s.h; ++y) {
          const int sy = y + dy;
          if (sy < 0 || sy >= s.h) continue;
          const T* in = row + static_cast<std::size_t>(y) * s.w;
          T* out = xc + static_cast<std::size_t>(sy) * s.w;
          const int x0 = std::max(0, -ddx), x1 = std::min(s.w, s.w - ddx);
          for (int xx = x0; xx < x1; ++xx) out[xx + ddx] += in[xx];
        }
      }
    }
  }
}

template <typename T>
inline T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace

template <typename T>
void conv3x3_forward(std::span<const T> x, Shape in, std::span<const T> weight,
                     std::span<const T> bias, int cout, std::span<T> y) {
  const std::size_t hw = in.plane();
  const int k = in.c * 9;
  auto& col = scratch<T>();
  col.resize(static_cast<std::size_t>(k) * hw);
  im2col3x3(x.data(), in, col.data());
  CMapMat<T> W(weight.data(), cout, k);
  CMapMat<T> C(col.data(), k, static_cast<Eigen::Index>(hw));
  MapMat<T> Y(y.data(), cout, static_cast<Eigen::Index>(hw));
  Y.noalias() = W * C;
  for (int o = 0; o < cout; ++o) Y.row(o).array() += bias[static_cast<std::size_t>(o)];
}

template <typename T>
void conv3x3_backward(std::span<const T> x, Shape in, std::span<const T> weight, int cout,
                      std::span<const T> dy, std::span<T> dweight, std::span<T> dbias,
                      std::span<T> dx) {
  const std::size_t hw = in.plane();
  const int k = in.c * 9;
  auto& col = scratch<T>();
  col.resize(static_cast<std::size_t>(k) * hw);
  im2col3x3(x.data(), in, col.data());
  CMapMat<T> C(col.data(), k, static_cast<Eigen::Index>(hw));
  CMapMat<T> dY(dy.data(), cout, static_cast<Eigen::Index>(hw));
  MapMat<T> dW(dweight.data(), cout, k);
  dW.noalias() += dY * C.transpose();
  // Fixed-order sum: Eigen's vectorised redux depends on pointer alignment.
  for (int o = 0; o < cout; ++o) {
    T acc = 0;
    const T* row = dy.data() + static_cast<std::size_t>(o) * hw;
    for (std::size_t i = 0; i < hw; ++i) acc += row[i];
    dbias[static_cast<std::size_t>(o)] += acc;
  }
  if (dx.empty()) return;
  auto& dcol = scratch2<T>();
  dcol.resize(static_cast<std::size_t>(k) * hw);
  CMapMat<T> W(weight.data(), cout, k);
  MapMat<T> dC(dcol.data(), k, static_cast<Eigen::Index>(hw));
  dC.noalias() = W.transpose() * dY;
  col2im3x3_add(dcol.data(), in, dx.data());
}

template <typename T>
void group_norm_forward(std::span<const T> x, Shape s, int groups, std::span<const T> scale,
                        std::span<const T> shift, std::span<T> y, NormStats& stats, double eps) {
  const int cg = s.c / groups;
  const std::size_t hw = s.plane();
  const std::size_t n = static_cast<std::size_t>(cg) * hw;
  stats.mean.assign(static_cast<std::size_t>(groups), 0.0);
  stats.rstd.assign(static_cast<std::size_t>(groups), 0.0);
  for (int g = 0; g < groups; ++g) {
    const T* xg = x.data() + static_cast<std::size_t>(g) * n;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += static_cast<double>(xg[i]);
    const double mean = sum / static_cast<double>(n);
    double var = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = static_cast<double>(xg[i]) - mean;
      var += d * d;
    }
    var /= static_cast<double>(n);
    const double rstd = 1.0 / std::sqrt(var + eps);
    stats.mean[g] = mean;
    stats.rstd[g] = rstd;
    for (int cc = 0; cc < cg; ++cc) {
      const int c = g * cg + cc;
      const double gamma = static_cast<double>(scale[c]);
      const double beta = static_cast<double>(shift[c]);
      const T* xc = x.data() + static_cast<std::size_t>(c) * hw;
      T* yc = y.data() + static_cast<std::size_t>(c) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        yc[i] = static_cast<T>((static_cast<double>(xc[i]) - mean) * rstd * gamma + beta);
      }
    }
  }
}

template <typename T>
void group_norm_backward(std::span<const T> x, Shape s, int groups, std::span<const T> scale,
                         const NormStats& stats, std::span<const T> dy, std::span<T> dscale,
                         std::span<T> dshift, std::span<T> dx) {
  const int cg = s.c / groups;
  const std::size_t hw = s.plane();
  const double n = static_cast<double>(cg) * static_cast<double>(hw);
  for (int g = 0; g < groups; ++g) {
    const double mean = stats.mean[g];
    const double rstd = stats.rstd[g];
    double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
    for (int cc = 0; cc < cg; ++cc) {
      const int c = g * cg + cc;
      const double gamma = static_cast<double>(scale[c]);
      const T* xc = x.data() + static_cast<std::size_t>(c) * hw;
      const T* dyc = dy.data() + static_cast<std::size_t>(c) * hw;
      double dg = 0.0, db = 0.0;
      for (std::size_t i = 0; i < hw; ++i) {
        const double xhat = (static_cast<double>(xc[i]) - mean) * rstd;
        const double d = static_cast<double>(dyc[i]);
        dg += d * xhat;
        db += d;
        sum_dxhat += d * gamma;
        sum_dxhat_xhat += d * gamma * xhat;
      }
      dscale[c] += static_cast<T>(dg);
      dshift[c] += static_cast<T>(db);
    }
    for (int cc = 0; cc < cg; ++cc) {
      const int c = g * cg + cc;
      const double gamma = static_cast<double>(scale[c]);
      const T* xc = x.data() + static_cast<std::size_t>(c) * hw;
      const T* dyc = dy.data() + static_cast<std::size_t>(c) * hw;
      T* dxc = dx.data() + static_cast<std::size_t>(c) * hw;
      for (std::size_t i = 0; i < hw; ++i) {
        const double xhat = (static_cast<double>(xc[i]) - mean) * rstd;
        const double dxhat = static_cast<double>(dyc[i]) * gamma;
        dxc[i] = static_cast<T>(rstd / n * (n * dxhat - sum_dxhat - xhat * sum_dxhat_xhat));
      }
    }
  }
}

template <typename T>
void silu_forward(std::span<const T> x, std::span<T> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] * sigmoid(x[i]);
}

template <typename T>
void silu_backward(std::span<const T> x, std::span<const T> dy, std::span<T> dx) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const T s = sigmoid(x[i]);
    dx[i] = dy[i] * s * (T(1) + x[i] * (T(1) - s));
  }
}

template <typename T>
void linear_forward(std::span<const T> x, std::span<const T> weight, std::span<const T> bias,
                    int out, std::span<T> y) {
  const std::size_t in = x.size();
  for (int o = 0; o < out; ++o) {
    const T* w = weight.data() + static_cast<std::size_t>(o) * in;
    T acc = bias[static_cast<std::size_t>(o)];
    for (std::size_t i = 0; i < in; ++i) acc += w[i] * x[i];
    y[static_cast<std::size_t>(o)] = acc;
  }
}

template <typename T>
void linear_backward(std::span<const T> x, std::span<const T> weight, int out,
                     std::span<const T> dy, std::span<T> dweight, std::span<T> dbias,
                     std::span<T> dx) {
  const std::size_t in = x.size();
  for (int o = 0; o < out; ++o) {
    const T d = dy[static_cast<std::size_t>(o)];
    T* dw = dweight.data() + static_cast<std::size_t>(o) * in;
    for (std::size_t i = 0; i < in; ++i) dw[i] += d * x[i];
    dbias[static_cast<std::size_t>(o)] += d;
  }
  if (dx.empty()) return;
  for (std::size_t i = 0; i < in; ++i) {
    T acc = T(0);
    for (int o = 0; o < out; ++o) acc += weight[static_cast<std::size_t>(o) * in + i] * dy[o];
    dx[i] += acc;
  }
}

template <typename T>
void avgpool2_forward(std::span<const T> x, Shape in, std::span<T> y) {
  const int oh = in.h / 2, ow = in.w / 2;
  for (int c = 0; c < in.c; ++c) {
    const T* xc = x.data() + static_cast<std::size_t>(c) * in.plane();
    T* yc = y.data() + static_cast<std::size_t>(c) * oh * ow;
    for (int yy = 0; yy < oh; ++yy) {
      const T* r0 = xc + static_cast<std::size_t>(2 * yy) * in.w;
      const T* r1 = r0 + in.w;
      for (int xx = 0; xx < ow; ++xx) {
        yc[yy * ow + xx] = T(0.25) * (r0[2 * xx] + r0[2 * xx + 1] + r1[2 * xx] + r1[2 * xx + 1]);
      }
    }
  }
}

template <typename T>
void avgpool2_backward(Shape in, std::span<const T> dy, std::span<T> dx) {
  const int oh = in.h / 2, ow = in.w / 2;
  for (int c = 0; c < in.c; ++c) {
    T* dxc = dx.data() + static_cast<std::size_t>(c) * in.plane();
    const T* dyc = dy.data() + static_cast<std::size_t>(c) * oh * ow;
    for (int yy = 0; yy < in.h; ++yy) {
      for (int xx = 0; xx < in.w; ++xx) {
        dxc[static_cast<std::size_t>(yy) * in.w + xx] = T(0.25) * dyc[(yy / 2) * ow + xx / 2];
      }
    }
  }
}

template <typename T>
void upsample2_forward(std::span<const T> x, Shape in, std::span<T> y) {
  const int oh = in.h * 2, ow = in.w * 2;
  for (int c = 0; c < in.c; ++c) {
    const T* xc = x.data() + static_cast<std::size_t>(c) * in.plane();
    T* yc = y.data() + static_cast<std::size_t>(c) * oh * ow;
    for (int yy = 0; yy < oh; ++yy) {
      for (int xx = 0; xx < ow; ++xx) {
        yc[static_cast<std::size_t>(yy) * ow + xx] = xc[(yy / 2) * in.w + xx / 2];
      }
    }
  }
}

template <typename T>
void upsample2_backward(Shape in, std::span<const T> dy, std::span<T> dx) {
  const int ow = in.w * 2;
  for (int c = 0; c < in.c; ++c) {
    T* dxc = dx.data() + static_cast<std::size_t>(c) * in.plane();
    const T* dyc = dy.data() + static_cast<std::size_t>(c) * in.plane() * 4;
    for (int yy = 0; yy < in.h; ++yy) {
      for (int xx = 0; xx < in.w; ++xx) {
        const T* r0 = dyc + static_cast<std::size_t>(2 * yy) * ow + 2 * xx;
        dxc[static_cast<std::size_t>(yy) * in.w + xx] = r0[0] + r0[1] + r0[ow] + r0[ow + 1];
      }
    }
  }
}

template <typename T>
void timestep_embedding(int t, int dim, std::span<T> out) {
  const int half = dim / 2;
  for (int k = 0; k < half; ++k) {
    const double freq = std::exp(-std::log(10000.0) * k / half);
    const double arg = static_cast<double>(t) * freq;
    out[static_cast<std::size_t>(k)] = static_cast<T>(std::sin(arg));
    out[static_cast<std::size_t>(k + half)] = static_cast<T>(std::cos(arg));
  }
}

#define DDMM_NN_INSTANTIATE(T)                                                                   \
  template void conv3x3_forward<T>(std::span<const T>, Shape, std::span<const T>,                \
                                   std::span<const T>, int, std::span<T>);                       \
  template void conv3x3_backward<T>(std::span<const T>, Shape, std::span<const T>, int,          \
                                    std::span<const T>, std::span<T>, std::span<T>,              \
                                    std::span<T>);                                               \
  template void group_norm_forward<T>(std::span<const T>, Shape, int, std::span<const T>,        \
                                      std::span<const T>, std::span<T>, NormStats&, double);     \
  template void group_norm_backward<T>(std::span<const T>, Shape, int, std::span<const T>,       \
                                       const NormStats&, std::span<const T>, std::span<T>,       \
                                       std::span<T>, std::span<T>);                              \
  template void silu_forward<T>(std::span<const T>, std::span<T>);                               \
  template void silu_backward<T>(std::span<const T>, std::span<const T>, std::span<T>);          \
  template void linear_forward<T>(std::span<const T>, std::span<const T>, std::span<const T>,    \
                                  int, std::span<T>);                                            \
  template void linear_backward<T>(std::span<const T>, std::span<const T>, int,                  \
                                   std::span<const T>, std::span<T>, std::span<T>,               \
                                   std::span<T>);                                                \
  template void avgpool2_forward<T>(std::span<const T>, Shape, std::span<T>);                    \
  template void avgpool2_backward<T>(Shape, std::span<const T>, std::span<T>);                   \
  template void upsample2_forward<T>(std::span<const T>, Shape, std::span<T>);                   \
  template void upsample2_backward<T>(Shape, std::span<const T>, std::span<T>);                  \
  template void timestep_embedding<T>(int, int, std::span<T>);

DDMM_NN_INSTANTIATE(float)
DDMM_NN_INSTANTIATE(double)

#undef DDMM_NN_INSTANTIATE

}  // namespace ddmm::nn
