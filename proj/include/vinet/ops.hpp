#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vinet/tensor.hpp"

namespace vinet {

class Rng;

/// 2D cross-correlation (no kernel flip) with zero padding.
///
/// `input` is C_in x H x W or N x C_in x H x W; `weight` is
/// C_out x (C_in / groups) x k x k. `bias` may be undefined. Output spatial
/// size is floor((H + 2p - k) / stride) + 1.
Tensor conv2d(const Tensor& input, const Tensor& weight, const Tensor& bias, std::size_t stride = 1,
              std::size_t padding = 0, std::size_t groups = 1);

// Window max over C x H x W or N x C x H x W. Ties route the gradient to the
// first maximum in row-major scan order.
Tensor maxpool2d(const Tensor& input, std::size_t window, std::size_t stride);

Tensor relu(const Tensor& input);

enum class Mode { train, eval };

struct BatchNormState {
  std::vector<double> running_mean;
  std::vector<double> running_var;

  explicit BatchNormState(std::size_t channels = 0)
      : running_mean(channels, 0.0), running_var(channels, 1.0) {}
};

inline constexpr double kBatchNormMomentum = 0.1;
inline constexpr double kBatchNormEpsilon = 1e-5;

/// Per-channel batch normalisation over N x C x H x W. Train mode uses the
/// biased batch variance for normalisation and folds the unbiased one into
/// `state` with momentum 0.1; eval mode reads `state` only.
Tensor batchnorm2d(const Tensor& input, const Tensor& gamma, const Tensor& beta, BatchNormState& state,
                   Mode mode, double epsilon = kBatchNormEpsilon);

// y = W x + b for x of shape [N_in] or [N x N_in]; `bias` may be undefined.
Tensor linear(const Tensor& input, const Tensor& weight, const Tensor& bias);

// -log softmax(logits)[label], max-subtracted. logits: [K].
Tensor softmax_cross_entropy(const Tensor& logits, int label);
// Batch mean of the above; logits: [N x K].
Tensor softmax_cross_entropy(const Tensor& logits, std::span<const int> labels);

std::vector<double> softmax(std::span<const double> logits);

// N x C x H x W -> N x C.
Tensor global_avg_pool(const Tensor& input);

Tensor sum(const Tensor& input);
Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double factor);

// Parameter initialisation: weights uniform in +-sqrt(6 / fan_in).
Tensor fan_in_uniform(Shape shape, std::size_t fan_in, Rng& rng);

}  // namespace vinet
