#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "vinet/errors.hpp"
#include "vinet/ops.hpp"
#include "vinet/random.hpp"

namespace vinet {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMapMat = Eigen::Map<const RowMat>;
using MapMat = Eigen::Map<RowMat>;

void accumulate(const Tensor& t, std::span<const double> g) {
  if (!t.requires_grad()) return;
  auto dst = t.grad_buffer();
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

struct Planes {
  std::size_t count, h, w;
};

Planes planes_of(const Tensor& t, const char* op) {
  if (t.dim() == 3) return {t.size(0), t.size(1), t.size(2)};
  if (t.dim() == 4) return {t.size(0) * t.size(1), t.size(2), t.size(3)};
  throw ContractViolation(std::string(op) + ": expected CxHxW or NxCxHxW, got " + shape_str(t.shape()));
}

}  // namespace

Tensor maxpool2d(const Tensor& input, std::size_t window, std::size_t stride) {
  const Planes p = planes_of(input, "maxpool2d");
  if (window == 0 || stride == 0) throw ContractViolation("maxpool2d: window and stride must be positive");
  if (window > p.h || window > p.w) {
    throw ContractViolation("maxpool2d: window " + std::to_string(window) + " larger than input " +
                            std::to_string(p.h) + "x" + std::to_string(p.w));
  }
  const std::size_t oh = (p.h - window) / stride + 1;
  const std::size_t ow = (p.w - window) / stride + 1;
  const auto x = input.values();
  std::vector<double> out(p.count * oh * ow);
  auto argmax = std::make_shared<std::vector<std::size_t>>(out.size());
  for (std::size_t c = 0; c < p.count; ++c) {
    const std::size_t base = c * p.h * p.w;
    for (std::size_t i = 0; i < oh; ++i) {
      for (std::size_t j = 0; j < ow; ++j) {
        std::size_t best = base + i * stride * p.w + j * stride;
        double best_value = x[best];
        for (std::size_t a = 0; a < window; ++a) {
          for (std::size_t b = 0; b < window; ++b) {
            const std::size_t idx = base + (i * stride + a) * p.w + j * stride + b;
            const double v = x[idx];
            const bool larger = v > best_value;
            best = larger ? idx : best;
            best_value = larger ? v : best_value;
          }
        }
        const std::size_t o = (c * oh + i) * ow + j;
        out[o] = best_value;
        (*argmax)[o] = best;
      }
    }
  }
  Shape shape = input.shape();
  shape[shape.size() - 2] = oh;
  shape[shape.size() - 1] = ow;
  return Tensor::record("maxpool2d", std::move(shape), std::move(out), {input},
                        [input, argmax](std::span<const double> g) {
                          if (!input.requires_grad()) return;
                          auto dx = input.grad_buffer();
                          for (std::size_t o = 0; o < g.size(); ++o) dx[(*argmax)[o]] += g[o];
                        });
}

Tensor relu(const Tensor& input) {
  const auto x = input.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > 0.0 ? x[i] : 0.0;
  return Tensor::record("relu", input.shape(), std::move(out), {input}, [input](std::span<const double> g) {
    if (!input.requires_grad()) return;
    const auto x = input.values();
    auto dx = input.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) dx[i] += x[i] > 0.0 ? g[i] : 0.0;
  });
}

Tensor batchnorm2d(const Tensor& input, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                   Mode mode, double epsilon) {
  if (input.dim() != 4) throw ContractViolation("batchnorm2d: input must be NxCxHxW, got " + shape_str(input.shape()));
  const std::size_t n = input.size(0), c = input.size(1), hw = input.size(2) * input.size(3);
  if (gamma.numel() != c || beta.numel() != c) {
    throw ContractViolation("batchnorm2d: gamma/beta must have " + std::to_string(c) + " entries");
  }
  if (state.running_mean.size() != c || state.running_var.size() != c) {
    throw ContractViolation("batchnorm2d: running stats sized for " + std::to_string(state.running_mean.size()) +
                            " channels, input has " + std::to_string(c));
  }
  const std::size_t count = n * hw;
  const auto x = input.values();
  const auto gv = gamma.values();
  const auto bv = beta.values();
  std::vector<double> mean(c), invstd(c);
  if (mode == Mode::train) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const double* p = x.data() + (b * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) s += p[i];
      }
      const double m = s / static_cast<double>(count);
      double v = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const double* p = x.data() + (b * c + ch) * hw;
        for (std::size_t i = 0; i < hw; ++i) v += (p[i] - m) * (p[i] - m);
      }
      const double var = v / static_cast<double>(count);
      mean[ch] = m;
      invstd[ch] = 1.0 / std::sqrt(var + epsilon);
      const double unbiased = count > 1 ? v / static_cast<double>(count - 1) : var;
      state.running_mean[ch] = (1.0 - kBatchNormMomentum) * state.running_mean[ch] + kBatchNormMomentum * m;
      state.running_var[ch] = (1.0 - kBatchNormMomentum) * state.running_var[ch] + kBatchNormMomentum * unbiased;
    }
  } else {
    for (std::size_t ch = 0; ch < c; ++ch) {
      mean[ch] = state.running_mean[ch];
      invstd[ch] = 1.0 / std::sqrt(state.running_var[ch] + epsilon);
    }
  }
  std::vector<double> out(x.size());
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = (b * c + ch) * hw;
      for (std::size_t i = 0; i < hw; ++i) out[off + i] = gv[ch] * (x[off + i] - mean[ch]) * invstd[ch] + bv[ch];
    }

  return Tensor::record(
      "batchnorm2d", input.shape(), std::move(out), {input, gamma, beta},
      [input, gamma, beta, mean, invstd, mode, n, c, hw](std::span<const double> g) {
        const auto x = input.values();
        const auto gv = gamma.values();
        const double count = static_cast<double>(n * hw);
        std::vector<double> sum_g(c, 0.0), sum_gx(c, 0.0);
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (b * c + ch) * hw;
            for (std::size_t i = 0; i < hw; ++i) {
              const double xhat = (x[off + i] - mean[ch]) * invstd[ch];
              sum_g[ch] += g[off + i];
              sum_gx[ch] += g[off + i] * xhat;
            }
          }
        if (gamma.requires_grad()) {
          auto dg = gamma.grad_buffer();
          for (std::size_t ch = 0; ch < c; ++ch) dg[ch] += sum_gx[ch];
        }
        if (beta.requires_grad()) {
          auto db = beta.grad_buffer();
          for (std::size_t ch = 0; ch < c; ++ch) db[ch] += sum_g[ch];
        }
        if (!input.requires_grad()) return;
        auto dx = input.grad_buffer();
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (b * c + ch) * hw;
            const double k = gv[ch] * invstd[ch];
            for (std::size_t i = 0; i < hw; ++i) {
              if (mode == Mode::train) {
                const double xhat = (x[off + i] - mean[ch]) * invstd[ch];
                dx[off + i] += k * (g[off + i] - sum_g[ch] / count - xhat * sum_gx[ch] / count);
              } else {
                dx[off + i] += k * g[off + i];
              }
            }
          }
      });
}

Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias) {
  if (weight.dim() != 2) throw ContractViolation("linear: weight must be 2-D, got " + shape_str(weight.shape()));
  if (input.dim() != 1 && input.dim() != 2) {
    throw ContractViolation("linear: input must be [N_in] or [N x N_in], got " + shape_str(input.shape()));
  }
  const std::size_t out_f = weight.size(0), in_f = weight.size(1);
  const std::size_t batch = input.dim() == 2 ? input.size(0) : 1;
  const std::size_t got = input.dim() == 2 ? input.size(1) : input.size(0);
  if (got != in_f) {
    throw ContractViolation("linear: input has " + std::to_string(got) + " features, weight " +
                            shape_str(weight.shape()) + " expects " + std::to_string(in_f));
  }
  if (bias.defined() && (bias.dim() != 1 || bias.size(0) != out_f)) {
    throw ContractViolation("linear: bias " + shape_str(bias.shape()) + " does not match " +
                            std::to_string(out_f) + " outputs");
  }
  std::vector<double> out(batch * out_f);
  {
    ConstMapMat xm(input.values().data(), batch, in_f);
    ConstMapMat wm(weight.values().data(), out_f, in_f);
    MapMat om(out.data(), batch, out_f);
    om.noalias() = xm * wm.transpose();
    if (bias.defined()) {
      const auto b = bias.values();
      for (std::size_t r = 0; r < batch; ++r)
        for (std::size_t o = 0; o < out_f; ++o) out[r * out_f + o] += b[o];
    }
  }
  Shape shape = input.dim() == 2 ? Shape{batch, out_f} : Shape{out_f};
  return Tensor::record("linear", std::move(shape), std::move(out), {input, weight, bias},
                        [input, weight, bias, batch, in_f, out_f](std::span<const double> g) {
                          ConstMapMat gm(g.data(), batch, out_f);
                          if (weight.requires_grad()) {
                            ConstMapMat xm(input.values().data(), batch, in_f);
                            MapMat dw(weight.grad_buffer().data(), out_f, in_f);
                            dw.noalias() += gm.transpose() * xm;
                          }
                          if (bias.defined() && bias.requires_grad()) {
                            auto db = bias.grad_buffer();
                            for (std::size_t r = 0; r < batch; ++r)
                              for (std::size_t o = 0; o < out_f; ++o) db[o] += g[r * out_f + o];
                          }
                          if (input.requires_grad()) {
                            ConstMapMat wm(weight.values().data(), out_f, in_f);
                            MapMat dx(input.grad_buffer().data(), batch, in_f);
                            dx.noalias() += gm * wm;
                          }
                        });
}

std::vector<double> softmax(std::span<const double> logits) {
  const double mx = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    p[k] = std::exp(logits[k] - mx);
    z += p[k];
  }
  for (auto& v : p) v /= z;
  return p;
}

Tensor softmax_cross_entropy(const Tensor& logits, int label) {
  if (logits.dim() != 1) {
    throw ContractViolation("softmax_cross_entropy: logits must be 1-D, got " + shape_str(logits.shape()));
  }
  const int labels[1] = {label};
  return softmax_cross_entropy(logits.reshape({1, logits.size(0)}), labels);
}

Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels) {
  if (logits.dim() != 2) {
    throw ContractViolation("softmax_cross_entropy: logits must be N x K, got " + shape_str(logits.shape()));
  }
  const std::size_t n = logits.size(0), k = logits.size(1);
  if (labels.size() != n) {
    throw ContractViolation("softmax_cross_entropy: " + std::to_string(labels.size()) + " labels for " +
                            std::to_string(n) + " rows");
  }
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= k) {
      throw ContractViolation("softmax_cross_entropy: label " + std::to_string(l) + " outside 0.." +
                              std::to_string(k - 1));
    }
  }
  const auto x = logits.values();
  auto probs = std::make_shared<std::vector<double>>(n * k);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto row = x.subspan(r * k, k);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t j = 0; j < k; ++j) z += std::exp(row[j] - mx);
    const double log_z = std::log(z) + mx;
    total += log_z - row[static_cast<std::size_t>(labels[r])];
    for (std::size_t j = 0; j < k; ++j) (*probs)[r * k + j] = std::exp(row[j] - log_z);
  }
  std::vector<int> owned(labels.begin(), labels.end());
  return Tensor::record("softmax_cross_entropy", {1}, {total / static_cast<double>(n)}, {logits},
                        [logits, probs, owned, n, k](std::span<const double> g) {
                          if (!logits.requires_grad()) return;
                          auto dx = logits.grad_buffer();
                          const double s = g[0] / static_cast<double>(n);
                          for (std::size_t r = 0; r < n; ++r)
                            for (std::size_t j = 0; j < k; ++j) {
                              const double onehot = static_cast<int>(j) == owned[r] ? 1.0 : 0.0;
                              dx[r * k + j] += s * ((*probs)[r * k + j] - onehot);
                            }
                        });
}

Tensor global_avg_pool(const Tensor& input) {
  if (input.dim() != 4) throw ContractViolation("global_avg_pool: input must be NxCxHxW, got " + shape_str(input.shape()));
  const std::size_t nc = input.size(0) * input.size(1), hw = input.size(2) * input.size(3);
  const auto x = input.values();
  std::vector<double> out(nc);
  for (std::size_t i = 0; i < nc; ++i) {
    double s = 0.0;
    for (std::size_t p = 0; p < hw; ++p) s += x[i * hw + p];
    out[i] = s / static_cast<double>(hw);
  }
  return Tensor::record("global_avg_pool", {input.size(0), input.size(1)}, std::move(out), {input},
                        [input, nc, hw](std::span<const double> g) {
                          if (!input.requires_grad()) return;
                          auto dx = input.grad_buffer();
                          for (std::size_t i = 0; i < nc; ++i) {
                            const double v = g[i] / static_cast<double>(hw);
                            for (std::size_t p = 0; p < hw; ++p) dx[i * hw + p] += v;
                          }
                        });
}

Tensor sum(const Tensor& input) {
  double s = 0.0;
  for (double v : input.values()) s += v;
  return Tensor::record("sum", {1}, {s}, {input}, [input](std::span<const double> g) {
    if (!input.requires_grad()) return;
    auto dx = input.grad_buffer();
    for (auto& v : dx) v += g[0];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ContractViolation("add: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) + " differ");
  }
  const auto x = a.values(), y = b.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] + y[i];
  return Tensor::record("add", a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) {
    accumulate(a, g);
    accumulate(b, g);
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) {
    throw ContractViolation("mul: shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()) + " differ");
  }
  const auto x = a.values(), y = b.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * y[i];
  return Tensor::record("mul", a.shape(), std::move(out), {a, b}, [a, b](std::span<const double> g) {
    const auto x = a.values(), y = b.values();
    if (a.requires_grad()) {
      auto da = a.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * y[i];
    }
    if (b.requires_grad()) {
      auto db = b.grad_buffer();
      for (std::size_t i = 0; i < g.size(); ++i) db[i] += g[i] * x[i];
    }
  });
}

Tensor scale(const Tensor& a, double factor) {
  const auto x = a.values();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * factor;
  return Tensor::record("scale", a.shape(), std::move(out), {a}, [a, factor](std::span<const double> g) {
    if (!a.requires_grad()) return;
    auto da = a.grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) da[i] += g[i] * factor;
  });
}

Tensor fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return Tensor::from_data(std::move(shape), std::move(v), true);
}

}  // namespace vinet
