#include <Eigen/Core>
#include <algorithm>
#include <cstring>
#include <string>

#include "vinet/errors.hpp"
#include "vinet/ops.hpp"

namespace vinet {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;

constexpr std::size_t kDirectMaxOutChannels = 1;

struct ConvGeometry {
  std::size_t batch, in_c, h, w, out_c, k, stride, pad, groups, out_h, out_w;
  std::size_t in_c_group() const { return in_c / groups; }
  std::size_t out_c_group() const { return out_c / groups; }
  std::size_t col_rows() const { return in_c * k * k; }
  std::size_t col_cols() const { return out_h * out_w; }
};

// Output columns [begin, end) of tap column kj that read inside the image.
struct ColRange {
  std::size_t begin, end;
};

ColRange tap_cols(const ConvGeometry& g, std::size_t kj) {
  const std::size_t begin = g.pad > kj ? (g.pad - kj + g.stride - 1) / g.stride : 0;
  if (g.w + g.pad <= kj) return {begin, begin};
  const std::size_t end = std::min(g.out_w, (g.w - 1 + g.pad - kj) / g.stride + 1);
  return {begin, std::max(begin, end)};
}

// Column buffers hold several samples side by side: row r of sample n starts
// at col + r * ld + n * cols.
void im2col(const double* in, const ConvGeometry& g, double* col, std::size_t ld) {
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  for (std::size_t c = 0; c < g.in_c; ++c) {
    const double* plane = in + c * g.h * g.w;
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        double* row = col + ((c * g.k + ki) * g.k + kj) * ld;
        const ColRange r = tap_cols(g, kj);
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) - pad;
          double* dst = row + oh * g.out_w;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) {
            std::fill(dst, dst + g.out_w, 0.0);
            continue;
          }
          std::fill(dst, dst + r.begin, 0.0);
          std::fill(dst + r.end, dst + g.out_w, 0.0);
          if (r.begin == r.end) continue;
          const double* src = plane + static_cast<std::size_t>(ih) * g.w + r.begin * g.stride + kj - g.pad;
          if (g.stride == 1) {
            std::copy(src, src + (r.end - r.begin), dst + r.begin);
          } else {
            for (std::size_t ow = r.begin; ow < r.end; ++ow) dst[ow] = src[(ow - r.begin) * g.stride];
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, const ConvGeometry& g, double* in, std::size_t ld) {
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  for (std::size_t c = 0; c < g.in_c; ++c) {
    double* plane = in + c * g.h * g.w;
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        const double* row = col + ((c * g.k + ki) * g.k + kj) * ld;
        const ColRange r = tap_cols(g, kj);
        for (std::size_t oh = 0; oh < g.out_h; ++oh) {
          const auto ih = static_cast<std::ptrdiff_t>(oh * g.stride + ki) - pad;
          if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(g.h)) continue;
          if (r.begin == r.end) continue;
          const double* src = row + oh * g.out_w;
          double* dst = plane + static_cast<std::size_t>(ih) * g.w + r.begin * g.stride + kj - g.pad;
          for (std::size_t ow = r.begin; ow < r.end; ++ow) dst[(ow - r.begin) * g.stride] += src[ow];
        }
      }
    }
  }
}

// Stride-1 kernels that accumulate shifted rows directly, skipping the column
// buffer. Only faster than the GEMM path for single-channel outputs.
struct RowSpan {
  std::size_t begin, end;  // output columns whose input column is inside the image
};

inline RowSpan valid_cols(const ConvGeometry& g, std::size_t kj) {
  const std::size_t begin = g.pad > kj ? g.pad - kj : 0;
  const std::size_t end = std::min(g.out_w, g.w + g.pad - kj);
  return {begin, std::max(begin, end)};
}

inline RowSpan valid_rows(const ConvGeometry& g, std::size_t ki) {
  const std::size_t begin = g.pad > ki ? g.pad - ki : 0;
  const std::size_t end = std::min(g.out_h, g.h + g.pad - ki);
  return {begin, std::max(begin, end)};
}

template <typename F>
void for_each_tap(const ConvGeometry& g, F&& f) {
  const std::size_t icg = g.in_c_group(), ocg = g.out_c_group();
  for (std::size_t oc = 0; oc < g.out_c; ++oc) {
    const std::size_t gi = oc / ocg;
    for (std::size_t icl = 0; icl < icg; ++icl) {
      const std::size_t ic = gi * icg + icl;
      for (std::size_t ki = 0; ki < g.k; ++ki) {
        const RowSpan rows = valid_rows(g, ki);
        for (std::size_t kj = 0; kj < g.k; ++kj) {
          const RowSpan cols = valid_cols(g, kj);
          const std::size_t widx = ((oc * icg + icl) * g.k + ki) * g.k + kj;
          // Input offset of output (oh, ow) is (oh + ki - pad) * w + ow + kj - pad.
          const std::ptrdiff_t shift = (static_cast<std::ptrdiff_t>(ki) - static_cast<std::ptrdiff_t>(g.pad)) *
                                           static_cast<std::ptrdiff_t>(g.w) +
                                       static_cast<std::ptrdiff_t>(kj) - static_cast<std::ptrdiff_t>(g.pad);
          f(oc, ic, widx, rows, cols, shift);
        }
      }
    }
  }
}

void direct_forward(const double* in, const double* weight, const ConvGeometry& g, double* out) {
  std::fill(out, out + g.out_c * g.out_h * g.out_w, 0.0);
  for_each_tap(g, [&](std::size_t oc, std::size_t ic, std::size_t widx, RowSpan rows, RowSpan cols,
                      std::ptrdiff_t shift) {
    const double wv = weight[widx];
    const double* plane = in + ic * g.h * g.w;
    double* o = out + oc * g.out_h * g.out_w;
    for (std::size_t oh = rows.begin; oh < rows.end; ++oh) {
      const double* src = plane + static_cast<std::ptrdiff_t>(oh * g.w) + shift;
      double* dst = o + oh * g.out_w;
      for (std::size_t ow = cols.begin; ow < cols.end; ++ow) dst[ow] += wv * src[ow];
    }
  });
}

void direct_backward(const double* in, const double* weight, const double* grad, const ConvGeometry& g, double* dw,
                     double* dx) {
  for_each_tap(g, [&](std::size_t oc, std::size_t ic, std::size_t widx, RowSpan rows, RowSpan cols,
                      std::ptrdiff_t shift) {
    const double* go = grad + oc * g.out_h * g.out_w;
    const std::ptrdiff_t ic_off = static_cast<std::ptrdiff_t>(ic * g.h * g.w);
    if (dw) {
      double acc = 0.0;
      const auto n = static_cast<Eigen::Index>(cols.end - cols.begin);
      for (std::size_t oh = rows.begin; oh < rows.end; ++oh) {
        const double* src = in + ic_off + static_cast<std::ptrdiff_t>(oh * g.w) + shift;
        const double* gr = go + oh * g.out_w;
        acc += Eigen::Map<const Eigen::VectorXd>(gr + cols.begin, n).dot(
            Eigen::Map<const Eigen::VectorXd>(src + cols.begin, n));
      }
      dw[widx] += acc;
    }
    if (dx) {
      const double wv = weight[widx];
      for (std::size_t oh = rows.begin; oh < rows.end; ++oh) {
        double* dst = dx + ic_off + static_cast<std::ptrdiff_t>(oh * g.w) + shift;
        const double* gr = go + oh * g.out_w;
        for (std::size_t ow = cols.begin; ow < cols.end; ++ow) dst[ow] += wv * gr[ow];
      }
    }
  });
}

bool use_direct(const ConvGeometry& g) { return g.stride == 1 && g.out_c_group() <= kDirectMaxOutChannels; }

ConvGeometry conv_geometry(const Tensor& input, const Tensor& weight, const Tensor& bias,
                           std::size_t stride, std::size_t padding, std::size_t groups) {
  if (input.dim() != 3 && input.dim() != 4) {
    throw ContractViolation("conv2d: input must be CxHxW or NxCxHxW, got " + shape_str(input.shape()));
  }
  if (weight.dim() != 4) throw ContractViolation("conv2d: weight must be 4-D, got " + shape_str(weight.shape()));
  if (stride == 0) throw ContractViolation("conv2d: stride must be positive");
  if (groups == 0) throw ContractViolation("conv2d: groups must be positive");
  const std::size_t off = input.dim() == 4 ? 1 : 0;
  ConvGeometry g{};
  g.batch = off ? input.size(0) : 1;
  g.in_c = input.size(off);
  g.h = input.size(off + 1);
  g.w = input.size(off + 2);
  g.out_c = weight.size(0);
  g.k = weight.size(2);
  g.stride = stride;
  g.pad = padding;
  g.groups = groups;
  if (weight.size(3) != g.k) {
    throw ContractViolation("conv2d: kernel must be square, got " + shape_str(weight.shape()));
  }
  if (g.in_c % groups != 0 || g.out_c % groups != 0) {
    throw ContractViolation("conv2d: channels in=" + std::to_string(g.in_c) + " out=" +
                            std::to_string(g.out_c) + " not divisible by groups=" + std::to_string(groups));
  }
  if (weight.size(1) * groups != g.in_c) {
    throw ContractViolation("conv2d: weight expects " + std::to_string(weight.size(1) * groups) +
                            " input channels but input " + shape_str(input.shape()) + " has " +
                            std::to_string(g.in_c));
  }
  if (g.k > g.h + 2 * padding || g.k > g.w + 2 * padding) {
    throw ContractViolation("conv2d: kernel " + std::to_string(g.k) + " exceeds padded input " +
                            std::to_string(g.h + 2 * padding) + "x" + std::to_string(g.w + 2 * padding));
  }
  if (bias.defined() && (bias.dim() != 1 || bias.size(0) != g.out_c)) {
    throw ContractViolation("conv2d: bias " + shape_str(bias.shape()) + " does not match " +
                            std::to_string(g.out_c) + " output channels");
  }
  g.out_h = (g.h + 2 * padding - g.k) / stride + 1;
  g.out_w = (g.w + 2 * padding - g.k) / stride + 1;
  return g;
}

}  // namespace

// Samples per im2col chunk; the column buffer stays near 2^16 doubles so it
// fits in L2.
std::size_t chunk_size(const ConvGeometry& g) {
  const std::size_t per = g.col_rows() * g.col_cols();
  return std::clamp<std::size_t>((std::size_t{1} << 16) / std::max<std::size_t>(per, 1), 1, g.batch);
}

Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride,
              std::size_t padding, std::size_t groups) {
  const ConvGeometry g = conv_geometry(input, weight, bias, stride, padding, groups);
  const std::size_t rows = g.col_rows(), cols = g.col_cols();
  const std::size_t rows_g = rows / g.groups, ocg = g.out_c_group();
  const std::size_t in_stride = g.in_c * g.h * g.w;
  const std::size_t out_stride = g.out_c * cols;

  std::vector<double> out(g.batch * out_stride);
  const auto x = input.values();
  const auto wv = weight.values();
  if (use_direct(g)) {
    for (std::size_t n = 0; n < g.batch; ++n) {
      direct_forward(x.data() + n * in_stride, wv.data(), g, out.data() + n * out_stride);
    }
  } else {
    const std::size_t chunk = chunk_size(g);
    std::vector<double> col(rows * chunk * cols);
    RowMat prod;
    for (std::size_t n0 = 0; n0 < g.batch; n0 += chunk) {
      const std::size_t m = std::min(chunk, g.batch - n0), ld = m * cols;
      for (std::size_t i = 0; i < m; ++i) im2col(x.data() + (n0 + i) * in_stride, g, col.data() + i * cols, ld);
      for (std::size_t gi = 0; gi < g.groups; ++gi) {
        ConstMapMat wm(wv.data() + gi * ocg * rows_g, ocg, rows_g);
        ConstMapMat cm(col.data() + gi * rows_g * ld, rows_g, ld);
        prod.noalias() = wm * cm;
        for (std::size_t i = 0; i < m; ++i) {
          MapMat om(out.data() + (n0 + i) * out_stride + gi * ocg * cols, ocg, cols);
          om = prod.middleCols(i * cols, cols);
        }
      }
    }
  }
  if (bias.defined()) {
    const auto b = bias.values();
    for (std::size_t n = 0; n < g.batch; ++n)
      for (std::size_t c = 0; c < g.out_c; ++c) {
        double* o = out.data() + n * out_stride + c * cols;
        for (std::size_t p = 0; p < cols; ++p) o[p] += b[c];
      }
  }

  Shape shape = input.dim() == 4 ? Shape{g.batch, g.out_c, g.out_h, g.out_w} : Shape{g.out_c, g.out_h, g.out_w};
  return Tensor::record("conv2d", std::move(shape), std::move(out), {input, weight, bias},
                        [input, weight, bias, g](std::span<const double> grad) {
                          const std::size_t rows = g.col_rows(), cols = g.col_cols();
                          const std::size_t rows_g = rows / g.groups, ocg = g.out_c_group();
                          const std::size_t in_stride = g.in_c * g.h * g.w;
                          const std::size_t out_stride = g.out_c * cols;
                          const bool need_w = weight.requires_grad();
                          const bool need_x = input.requires_grad();
                          if (bias.defined() && bias.requires_grad()) {
                            auto db = bias.grad_buffer();
                            for (std::size_t n = 0; n < g.batch; ++n)
                              for (std::size_t c = 0; c < g.out_c; ++c) {
                                const double* go = grad.data() + n * out_stride + c * cols;
                                double s = 0.0;
                                for (std::size_t p = 0; p < cols; ++p) s += go[p];
                                db[c] += s;
                              }
                          }
                          if (!need_w && !need_x) return;
                          const auto x = input.values();
                          const auto wv = weight.values();
                          std::span<double> dw = need_w ? weight.grad_buffer() : std::span<double>{};
                          std::span<double> dx = need_x ? input.grad_buffer() : std::span<double>{};
                          if (use_direct(g)) {
                            for (std::size_t n = 0; n < g.batch; ++n) {
                              direct_backward(x.data() + n * in_stride, wv.data(), grad.data() + n * out_stride, g,
                                              need_w ? dw.data() : nullptr,
                                              need_x ? dx.data() + n * in_stride : nullptr);
                            }
                            return;
                          }
                          const std::size_t chunk = chunk_size(g);
                          std::vector<double> col(rows * chunk * cols);
                          RowMat gm;
                          for (std::size_t n0 = 0; n0 < g.batch; n0 += chunk) {
                            const std::size_t m = std::min(chunk, g.batch - n0), ld = m * cols;
                            if (need_w) {
                              for (std::size_t i = 0; i < m; ++i) {
                                im2col(x.data() + (n0 + i) * in_stride, g, col.data() + i * cols, ld);
                              }
                            }
                            for (std::size_t gi = 0; gi < g.groups; ++gi) {
                              gm.resize(static_cast<Eigen::Index>(ocg), static_cast<Eigen::Index>(ld));
                              for (std::size_t i = 0; i < m; ++i) {
                                gm.middleCols(i * cols, cols) =
                                    ConstMapMat(grad.data() + (n0 + i) * out_stride + gi * ocg * cols, ocg, cols);
                              }
                              if (need_w) {
                                ConstMapMat cm(col.data() + gi * rows_g * ld, rows_g, ld);
                                MapMat dwm(dw.data() + gi * ocg * rows_g, ocg, rows_g);
                                dwm.noalias() += gm * cm.transpose();
                              }
                              if (need_x) {
                                ConstMapMat wm(wv.data() + gi * ocg * rows_g, ocg, rows_g);
                                MapMat dcm(col.data() + gi * rows_g * ld, rows_g, ld);
                                dcm.noalias() = wm.transpose() * gm;
                              }
                            }
                            if (need_x) {
                              for (std::size_t i = 0; i < m; ++i) {
                                col2im_add(col.data() + i * cols, g, dx.data() + (n0 + i) * in_stride, ld);
                              }
                            }
                          }
                        });
}

}  // namespace vinet
