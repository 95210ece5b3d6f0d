#include <cmath>

#include "vinet/errors.hpp"
#include "vinet/vtdm.hpp"

namespace vinet {

bool AffineParams::is_finite() const {
  for (double v : theta)
    if (!std::isfinite(v)) return false;
  return true;
}

AffineParams AffineParams::compose(const AffineParams& rhs) const {
  const auto& a = theta;
  const auto& b = rhs.theta;
  return {{a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2],
           a[2] * b[1] + a[3] * b[3]}};
}

std::vector<double> base_grid(std::size_t height, std::size_t width) {
  auto lattice = [](std::size_t i, std::size_t n) {
    return n == 1 ? 0.0 : -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
  };
  std::vector<double> g(height * width * 2);
  for (std::size_t r = 0; r < height; ++r)
    for (std::size_t c = 0; c < width; ++c) {
      g[(r * width + c) * 2] = lattice(c, width);
      g[(r * width + c) * 2 + 1] = lattice(r, height);
    }
  return g;
}

Tensor affine_grid(const Tensor& theta, std::size_t height, std::size_t width) {
  if (!((theta.dim() == 1 && theta.size(0) == 4) || (theta.dim() == 2 && theta.size(1) == 4))) {
    throw ContractViolation("affine_grid: theta must be [4] or N x 4, got " + shape_str(theta.shape()));
  }
  if (height == 0 || width == 0) throw ContractViolation("affine_grid: grid size must be positive");
  for (double v : theta.values())
    if (!std::isfinite(v)) throw ContractViolation("affine_grid: theta is not finite");
  const std::size_t n = theta.dim() == 2 ? theta.size(0) : 1;
  const std::size_t points = height * width;
  const auto base = base_grid(height, width);
  const auto t = theta.values();
  std::vector<double> out(n * points * 2);
  for (std::size_t b = 0; b < n; ++b) {
    const double* th = t.data() + b * 4;
    for (std::size_t p = 0; p < points; ++p) {
      const double xg = base[2 * p], yg = base[2 * p + 1];
      out[(b * points + p) * 2] = th[0] * xg + th[1] * yg;
      out[(b * points + p) * 2 + 1] = th[2] * xg + th[3] * yg;
    }
  }
  return Tensor::record("affine_grid", {n, height, width, 2}, std::move(out), {theta},
                        [theta, base, n, points](std::span<const double> g) {
                          if (!theta.requires_grad()) return;
                          auto dt = theta.grad_buffer();
                          for (std::size_t b = 0; b < n; ++b)
                            for (std::size_t p = 0; p < points; ++p) {
                              const double gx = g[(b * points + p) * 2], gy = g[(b * points + p) * 2 + 1];
                              const double xg = base[2 * p], yg = base[2 * p + 1];
                              dt[b * 4 + 0] += gx * xg;
                              dt[b * 4 + 1] += gx * yg;
                              dt[b * 4 + 2] += gy * xg;
                              dt[b * 4 + 3] += gy * yg;
                            }
                        });
}

namespace {

struct Tap {
  long x0, y0;
  double fx, fy;
  double px_scale, py_scale;
};

inline Tap make_tap(double x, double y, std::size_t h, std::size_t w) {
  const double sx = 0.5 * static_cast<double>(w - 1);
  const double sy = 0.5 * static_cast<double>(h - 1);
  double px = (x + 1.0) * sx;
  double py = (y + 1.0) * sy;
  // Far outside the image every tap reads zero; park the point so the integer
  // conversion below cannot overflow.
  if (!(px > -1.0 && px < static_cast<double>(w))) px = -2.0;
  if (!(py > -1.0 && py < static_cast<double>(h))) py = -2.0;
  const double fx0 = std::floor(px), fy0 = std::floor(py);
  return {static_cast<long>(fx0), static_cast<long>(fy0), px - fx0, py - fy0, sx, sy};
}

}  // namespace

Tensor bilinear_sample(const Tensor& image, const Tensor& grid) {
  if (image.dim() != 4) throw ContractViolation("bilinear_sample: image must be N x C x H x W, got " + shape_str(image.shape()));
  if (grid.dim() != 4 || grid.size(3) != 2 || grid.size(0) != image.size(0)) {
    throw ContractViolation("bilinear_sample: grid " + shape_str(grid.shape()) + " does not match image " +
                            shape_str(image.shape()));
  }
  const std::size_t n = image.size(0), c = image.size(1), h = image.size(2), w = image.size(3);
  const std::size_t oh = grid.size(1), ow = grid.size(2), points = oh * ow;
  const auto img = image.values();
  const auto gr = grid.values();
  std::vector<double> out(n * c * points, 0.0);
  const long lh = static_cast<long>(h), lw = static_cast<long>(w);
  auto inside = [lh, lw](long y, long x) { return x >= 0 && y >= 0 && x < lw && y < lh; };

  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t p = 0; p < points; ++p) {
      const Tap t = make_tap(gr[(b * points + p) * 2], gr[(b * points + p) * 2 + 1], h, w);
      const double w00 = (1 - t.fx) * (1 - t.fy), w01 = t.fx * (1 - t.fy);
      const double w10 = (1 - t.fx) * t.fy, w11 = t.fx * t.fy;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const double* plane = img.data() + (b * c + ch) * h * w;
        double v = 0.0;
        if (inside(t.y0, t.x0)) v += w00 * plane[t.y0 * lw + t.x0];
        if (inside(t.y0, t.x0 + 1)) v += w01 * plane[t.y0 * lw + t.x0 + 1];
        if (inside(t.y0 + 1, t.x0)) v += w10 * plane[(t.y0 + 1) * lw + t.x0];
        if (inside(t.y0 + 1, t.x0 + 1)) v += w11 * plane[(t.y0 + 1) * lw + t.x0 + 1];
        out[(b * c + ch) * points + p] = v;
      }
    }

  return Tensor::record(
      "bilinear_sample", {n, c, oh, ow}, std::move(out), {image, grid},
      [image, grid, n, c, h, w, points, lh, lw, inside](std::span<const double> g) {
        const auto img = image.values();
        const auto gr = grid.values();
        std::span<double> dimg = image.requires_grad() ? image.grad_buffer() : std::span<double>{};
        std::span<double> dgrid = grid.requires_grad() ? grid.grad_buffer() : std::span<double>{};
        for (std::size_t b = 0; b < n; ++b)
          for (std::size_t p = 0; p < points; ++p) {
            const Tap t = make_tap(gr[(b * points + p) * 2], gr[(b * points + p) * 2 + 1], h, w);
            const bool in00 = inside(t.y0, t.x0), in01 = inside(t.y0, t.x0 + 1);
            const bool in10 = inside(t.y0 + 1, t.x0), in11 = inside(t.y0 + 1, t.x0 + 1);
            double gx = 0.0, gy = 0.0;
            for (std::size_t ch = 0; ch < c; ++ch) {
              const double go = g[(b * c + ch) * points + p];
              if (go == 0.0) continue;
              const std::size_t base = (b * c + ch) * h * w;
              const double v00 = in00 ? img[base + t.y0 * lw + t.x0] : 0.0;
              const double v01 = in01 ? img[base + t.y0 * lw + t.x0 + 1] : 0.0;
              const double v10 = in10 ? img[base + (t.y0 + 1) * lw + t.x0] : 0.0;
              const double v11 = in11 ? img[base + (t.y0 + 1) * lw + t.x0 + 1] : 0.0;
              if (!dimg.empty()) {
                if (in00) dimg[base + t.y0 * lw + t.x0] += go * (1 - t.fx) * (1 - t.fy);
                if (in01) dimg[base + t.y0 * lw + t.x0 + 1] += go * t.fx * (1 - t.fy);
                if (in10) dimg[base + (t.y0 + 1) * lw + t.x0] += go * (1 - t.fx) * t.fy;
                if (in11) dimg[base + (t.y0 + 1) * lw + t.x0 + 1] += go * t.fx * t.fy;
              }
              gx += go * ((1 - t.fy) * (v01 - v00) + t.fy * (v11 - v10));
              gy += go * ((1 - t.fx) * (v10 - v00) + t.fx * (v11 - v01));
            }
            if (!dgrid.empty()) {
              dgrid[(b * points + p) * 2] += gx * t.px_scale;
              dgrid[(b * points + p) * 2 + 1] += gy * t.py_scale;
            }
          }
      });
}

}  // namespace vinet
